//! Library side of `photon-memory-sim`: configuration, scenario runners and
//! the mapping from failures to exit codes.

pub mod config;
pub mod scenarios;

use std::path::PathBuf;

use thiserror::Error;

pub use config::Config;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure in {scenario}: {source}")]
    Numeric {
        scenario: String,
        source: photon_memory::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },

    #[error("{failed} of {total} points failed (see the status column)")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => EXIT_CONFIG,
            CliError::Numeric { .. } => EXIT_NUMERIC,
            CliError::Partial { .. } => EXIT_PARTIAL,
        }
    }

    /// Sorts a library error into bad input (config) or a failed computation.
    pub fn from_core(scenario: &str, e: photon_memory::Error) -> Self {
        use photon_memory::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Format(_) | E::Csv(_) | E::Io(_) => {
                CliError::Config(format!("{scenario}: {e}"))
            }
            source => CliError::Numeric {
                scenario: scenario.to_string(),
                source,
            },
        }
    }
}

impl From<photon_memory::Error> for CliError {
    fn from(e: photon_memory::Error) -> Self {
        CliError::from_core("setup", e)
    }
}

/// Attaches the scenario name to library errors.
pub trait Context<T> {
    fn ctx(self, scenario: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for photon_memory::Result<T> {
    fn ctx(self, scenario: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(scenario, e))
    }
}
