use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("envelope has zero norm")]
    ZeroNorm,

    #[error("{pulse} pulse radicand is non-positive at t = {t:.6} us (value {value:.3e}); increase the regularisation constant")]
    NonPositiveRadicand {
        pulse: &'static str,
        t: f64,
        value: f64,
    },

    #[error("step size underflow at t = {t:.9} us (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("too many integration steps ({steps}) before t = {t:.6} us")]
    TooManySteps { t: f64, steps: usize },

    #[error("norm drift {drift:.3e} exceeds the allowed {allowed:.3e} at t = {t:.6} us")]
    NormDrift { t: f64, drift: f64, allowed: f64 },

    #[error("dimension {n_modes} modes exceeds the density-matrix reference limit of {max}")]
    DimensionTooLarge { n_modes: usize, max: usize },

    #[error("position x = {x} lies outside the transmission line [-{length}, 0]")]
    OutsideLine { x: f64, length: f64 },

    #[error("GRAPE requires lossless parameters (gamma = kappa_loss = 0), got gamma = {gamma}, kappa_loss = {kappa_loss}")]
    NotLossless { gamma: f64, kappa_loss: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
