//! Scenario configuration.
//!
//! Files are TOML with one flat table per section. Every key is optional and
//! defaults to the reference settings: (g, κ, γ) = (4.9, 2.42, 3.03) × 2π MHz,
//! a 0.5 μs sech photon on a ±6 Tc window and 211 line modes. Unknown keys are
//! rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use photon_memory::grape::{GrapeOptions, TcMinOptions};
use photon_memory::io_oracle::ChainOptions;
use photon_memory::model::{mhz, Geometry, PhotonEnvelope};
use photon_memory::propagator::PropagateOptions;
use photon_memory::pulses::Interpolation;
use photon_memory::SystemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub params: Params,
    pub pulse: PulseConfig,
    pub geometry: GeometryConfig,
    pub numerics: Numerics,
    pub sweep: SweepConfig,
    pub optimize: OptimizeConfig,
    pub tcmin: TcMinConfig,
    pub chain: ChainConfig,
}

/// Rates in units of 2π MHz, times in μs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub g_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub kappa_loss_mhz: f64,
    /// One-photon detuning Δ.
    pub delta_mhz: f64,
    /// Static two-photon detuning δ.
    pub two_photon_delta_mhz: f64,
    /// Photon coherence time.
    pub tc_us: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            g_mhz: 4.9,
            kappa_mhz: 2.42,
            gamma_mhz: 3.03,
            kappa_loss_mhz: 0.0,
            delta_mhz: 0.0,
            two_photon_delta_mhz: 0.0,
            tc_us: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseKind {
    F,
    D,
    G,
    X,
    #[serde(rename = "opt")]
    Opt,
    #[serde(rename = "file")]
    File,
}

impl fmt::Display for PulseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseKind::F => "F",
            PulseKind::D => "D",
            PulseKind::G => "G",
            PulseKind::X => "X",
            PulseKind::Opt => "opt",
            PulseKind::File => "file",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationConfig {
    Linear,
    Hold,
}

impl From<InterpolationConfig> for Interpolation {
    fn from(i: InterpolationConfig) -> Self {
        match i {
            InterpolationConfig::Linear => Interpolation::Linear,
            InterpolationConfig::Hold => Interpolation::Hold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub kind: PulseKind,
    /// Pulse CSV for `kind = "file"`, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// `hold` for piecewise-constant (optimised) pulses.
    pub interpolation: InterpolationConfig,
    /// Initial target population regularising Ω^F and Ω^D.
    pub rho0: f64,
    /// Optional amplitude cap in 2π MHz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap_mhz: Option<f64>,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            kind: PulseKind::X,
            file: None,
            interpolation: InterpolationConfig::Linear,
            rho0: photon_memory::pulses::DEFAULT_RHO0,
            cap_mhz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Odd number of line modes.
    pub n_modes: usize,
    /// Line length in μs; unset means `max(12 Tc, 15/κ)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_length_us: Option<f64>,
    /// Simulation window `±window_tc · Tc`.
    pub window_tc: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            n_modes: Geometry::DEFAULT_MODES,
            line_length_us: None,
            window_tc: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Relative tolerance of the amplitude integrator.
    pub tol: f64,
    /// Output samples per record.
    pub points: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { tol: 1e-9, points: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "kappa")]
    Kappa,
    Tc,
    #[serde(rename = "kappa_loss")]
    KappaLoss,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// Sweep axis. Rates are in 2π MHz and Tc in μs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: Scale,
    pub pulses: Vec<PulseKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            variable: SweepVariable::KappaLoss,
            start: 0.0,
            stop: 1.21,
            points: 11,
            scale: Scale::Linear,
            pulses: vec![PulseKind::X, PulseKind::G, PulseKind::F, PulseKind::D],
        }
    }
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = self.points as f64 - 1.0;
        (0..self.points)
            .map(|i| {
                let s = i as f64 / n;
                match self.scale {
                    Scale::Linear => self.start + s * (self.stop - self.start),
                    Scale::Log => (self.start.ln() + s * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

/// GRAPE settings. The photon and window come from `params` and `geometry`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub slices: usize,
    pub max_iters: usize,
    pub bound_mhz: f64,
    pub g_tol: f64,
    /// Extra coherence times for an η(Tc) comparison of Ω^X and GRAPE.
    pub tc_values: Vec<f64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            slices: photon_memory::grape::DEFAULT_SLICES,
            max_iters: 300,
            bound_mhz: photon_memory::grape::DEFAULT_BOUND_MHZ,
            g_tol: 1e-8,
            tc_values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcMinConfig {
    pub g_over_kappa_min: f64,
    pub g_over_kappa_max: f64,
    pub per_decade: usize,
    pub eta_target: f64,
    pub slices: usize,
    pub max_iters: usize,
    pub bisection_steps: usize,
    pub window_tc: f64,
    /// Mode band `±max(band_tc/Tc, band_kappa·κ)`.
    pub band_tc: f64,
    pub band_kappa: f64,
}

impl Default for TcMinConfig {
    fn default() -> Self {
        let d = TcMinOptions::default();
        Self {
            g_over_kappa_min: 0.1,
            g_over_kappa_max: 10.0,
            per_decade: 8,
            eta_target: d.eta_target,
            slices: d.grape.slices,
            max_iters: d.grape.max_iters,
            bisection_steps: d.bisection_steps,
            window_tc: d.window_tc,
            band_tc: d.band_tc,
            band_kappa: d.band_kappa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_nodes: usize,
    /// Samples per hop window.
    pub points: usize,
    pub tol: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        let d = ChainOptions::default();
        Self {
            n_nodes: d.n_nodes,
            points: d.points,
            tol: d.tol,
        }
    }
}

fn bad(key: &str, reason: impl fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be finite and >= 0, got {v}")))
    }
}

impl Config {
    /// Parses `text`; `origin` is only used in messages and to resolve
    /// relative pulse files.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))?;
        if let Some(f) = &cfg.pulse.file {
            if f.is_relative() {
                let base = origin.parent().unwrap_or(Path::new("."));
                cfg.pulse.file = Some(base.join(f));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        non_negative("params.g_mhz", p.g_mhz)?;
        positive("params.kappa_mhz", p.kappa_mhz)?;
        non_negative("params.gamma_mhz", p.gamma_mhz)?;
        non_negative("params.kappa_loss_mhz", p.kappa_loss_mhz)?;
        if !p.delta_mhz.is_finite() || !p.two_photon_delta_mhz.is_finite() {
            return Err(bad("params.delta_mhz", "detunings must be finite"));
        }
        positive("params.tc_us", p.tc_us)?;
        let g = &self.geometry;
        if g.n_modes < 3 || g.n_modes % 2 == 0 {
            return Err(bad("geometry.n_modes", format!("must be odd and >= 3, got {}", g.n_modes)));
        }
        if let Some(l) = g.line_length_us {
            positive("geometry.line_length_us", l)?;
        }
        positive("geometry.window_tc", g.window_tc)?;
        positive("pulse.rho0", self.pulse.rho0)?;
        if let Some(c) = self.pulse.cap_mhz {
            positive("pulse.cap_mhz", c)?;
        }
        if self.pulse.kind == PulseKind::File && self.pulse.file.is_none() {
            return Err(bad("pulse.file", "required when pulse.kind = \"file\""));
        }
        if !(self.numerics.tol > 0.0 && self.numerics.tol < 1e-2) {
            return Err(bad("numerics.tol", format!("must lie in (0, 1e-2), got {}", self.numerics.tol)));
        }
        if self.numerics.points < 2 {
            return Err(bad("numerics.points", "need at least 2"));
        }
        let s = &self.sweep;
        if s.points == 0 {
            return Err(bad("sweep.points", "need at least 1"));
        }
        if s.pulses.is_empty() {
            return Err(bad("sweep.pulses", "list at least one pulse"));
        }
        if s.pulses.contains(&PulseKind::File) {
            return Err(bad("sweep.pulses", "file pulses cannot be swept"));
        }
        if !s.start.is_finite() || !s.stop.is_finite() {
            return Err(bad("sweep.start", "range must be finite"));
        }
        if s.scale == Scale::Log && !(s.start > 0.0 && s.stop > 0.0) {
            return Err(bad("sweep.scale", "a log axis needs a positive range"));
        }
        let o = &self.optimize;
        if o.slices < photon_memory::grape::MIN_SLICES {
            return Err(bad(
                "optimize.slices",
                format!("need at least {}", photon_memory::grape::MIN_SLICES),
            ));
        }
        positive("optimize.bound_mhz", o.bound_mhz)?;
        positive("optimize.g_tol", o.g_tol)?;
        for &tc in &o.tc_values {
            positive("optimize.tc_values", tc)?;
        }
        let t = &self.tcmin;
        positive("tcmin.g_over_kappa_min", t.g_over_kappa_min)?;
        if !(t.g_over_kappa_max >= t.g_over_kappa_min) {
            return Err(bad("tcmin.g_over_kappa_max", "must be >= g_over_kappa_min"));
        }
        if t.per_decade == 0 {
            return Err(bad("tcmin.per_decade", "need at least 1"));
        }
        if !(t.eta_target > 0.0 && t.eta_target < 1.0) {
            return Err(bad("tcmin.eta_target", "must lie in (0, 1)"));
        }
        if t.slices < photon_memory::grape::MIN_SLICES {
            return Err(bad("tcmin.slices", format!("need at least {}", photon_memory::grape::MIN_SLICES)));
        }
        positive("tcmin.window_tc", t.window_tc)?;
        positive("tcmin.band_tc", t.band_tc)?;
        non_negative("tcmin.band_kappa", t.band_kappa)?;
        if self.chain.n_nodes < 2 {
            return Err(bad("chain.n_nodes", "need at least two nodes"));
        }
        if self.chain.points < 5 {
            return Err(bad("chain.points", "need at least 5"));
        }
        positive("chain.tol", self.chain.tol)?;
        Ok(())
    }

    /// Physical parameters and geometry for coherence time `tc`.
    pub fn system(&self, tc: f64) -> Result<SystemParams, CliError> {
        let p = &self.params;
        let kappa = mhz(p.kappa_mhz);
        let mut geo = Geometry::for_photon(tc, kappa, self.geometry.window_tc)?.with_modes(self.geometry.n_modes);
        if let Some(l) = self.geometry.line_length_us {
            geo.line_length = l;
        }
        let sp = SystemParams {
            g: mhz(p.g_mhz),
            kappa,
            kappa_loss: mhz(p.kappa_loss_mhz),
            gamma: mhz(p.gamma_mhz),
            delta_1: mhz(p.delta_mhz),
            delta_2: mhz(p.two_photon_delta_mhz),
            ..SystemParams::paper()
        }
        .with_geometry(geo);
        sp.validate()?;
        Ok(sp)
    }

    /// Sech photon of coherence time `tc` on the window of `params`.
    pub fn photon(&self, params: &SystemParams, tc: f64) -> Result<PhotonEnvelope, CliError> {
        Ok(PhotonEnvelope::sech_on_window(tc, params.t_start, params.t_end)?)
    }

    pub fn propagate_options(&self) -> PropagateOptions {
        PropagateOptions::with_tol(self.numerics.tol)
    }

    pub fn grape_options(&self) -> GrapeOptions {
        GrapeOptions {
            slices: self.optimize.slices,
            max_iters: self.optimize.max_iters,
            bound: mhz(self.optimize.bound_mhz),
            g_tol: self.optimize.g_tol,
            ..GrapeOptions::default()
        }
    }

    pub fn tcmin_options(&self) -> TcMinOptions {
        let t = &self.tcmin;
        let d = TcMinOptions::default();
        TcMinOptions {
            eta_target: t.eta_target,
            window_tc: t.window_tc,
            band_tc: t.band_tc,
            band_kappa: t.band_kappa,
            bisection_steps: t.bisection_steps,
            grape: GrapeOptions {
                slices: t.slices,
                max_iters: t.max_iters,
                bound: mhz(self.optimize.bound_mhz),
                ..d.grape
            },
        }
    }

    pub fn chain_options(&self) -> ChainOptions {
        ChainOptions {
            n_nodes: self.chain.n_nodes,
            points: self.chain.points,
            tol: self.chain.tol,
            delta: mhz(self.params.delta_mhz),
        }
    }

    /// `g` values of the Tc^min scan, `per_decade` per factor of ten.
    pub fn tcmin_couplings(&self) -> Vec<f64> {
        let t = &self.tcmin;
        let kappa = mhz(self.params.kappa_mhz);
        let decades = (t.g_over_kappa_max / t.g_over_kappa_min).log10();
        let steps = (decades * t.per_decade as f64).round() as usize;
        (0..=steps)
            .map(|k| kappa * t.g_over_kappa_min * 10f64.powf(k as f64 / t.per_decade as f64))
            .collect()
    }
}
