//! Physical parameters, the single-excitation basis, photon envelopes and the
//! discretised transmission line.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;

use crate::numeric::{derivative4, hermite, linspace, simpson, GAUSS3};
use crate::{Error, Result, C64};

/// Converts a rate quoted as `x × 2π MHz` into rad/μs.
pub fn mhz(x: f64) -> f64 {
    2.0 * PI * x
}

/// Relation between the sech time constant and the photon coherence time,
/// `Tc = π T / (4√3)`.
pub fn sech_time_for_coherence(tc: f64) -> f64 {
    4.0 * 3f64.sqrt() * tc / PI
}

/// `(1/√T) sech(2t/T)`.
pub fn sech_envelope(t_char: f64, t: f64) -> Result<f64> {
    if !(t_char > 0.0) || !t_char.is_finite() {
        return Err(Error::param("T", format!("must be positive, got {t_char}")));
    }
    Ok(sech(2.0 * t / t_char) / t_char.sqrt())
}

fn sech(x: f64) -> f64 {
    let ax = x.abs();
    if ax > 700.0 {
        0.0
    } else {
        let e = (-ax).exp();
        2.0 * e / (1.0 + e * e)
    }
}

/// Transmission-line discretisation and simulation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub n_modes: usize,
    pub line_length: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Geometry {
    pub const DEFAULT_MODES: usize = 211;

    /// Line length `max(12 Tc, 15/κ)` with a symmetric window of
    /// `±window_tc · Tc` and the default mode count.
    pub fn for_photon(tc: f64, kappa: f64, window_tc: f64) -> Result<Self> {
        if !(tc > 0.0) {
            return Err(Error::param("tc", format!("must be positive, got {tc}")));
        }
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        if !(window_tc > 0.0) {
            return Err(Error::param("window_tc", "must be positive"));
        }
        Ok(Self {
            n_modes: Self::DEFAULT_MODES,
            line_length: (12.0 * tc).max(15.0 / kappa),
            t_start: -window_tc * tc,
            t_end: window_tc * tc,
        })
    }

    pub fn with_modes(mut self, n_modes: usize) -> Self {
        self.n_modes = n_modes;
        self
    }

    /// Smallest odd mode count whose grid spans at least `±half_band` rad/μs.
    pub fn with_band(mut self, half_band: f64) -> Self {
        let half = (half_band * self.line_length / PI).ceil().max(1.0) as usize;
        self.n_modes = 2 * half + 1;
        self
    }
}

/// `(L, t_start, t_end)` for a photon of coherence time `tc`: `L = max(12 c Tc,
/// 15 c/κ)` and a window of `±6 Tc`.
pub fn default_scenario_geometry(tc: f64, kappa: f64) -> Result<(f64, f64, f64)> {
    let g = Geometry::for_photon(tc, kappa, 6.0)?;
    Ok((g.line_length, g.t_start, g.t_end))
}

/// All physical rates (angular, rad/μs), detunings and discretisation
/// constants of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Atom–cavity vacuum Rabi frequency.
    pub g: f64,
    /// Cavity amplitude decay into the transmission line.
    pub kappa: f64,
    /// Parasitic cavity amplitude decay.
    pub kappa_loss: f64,
    /// Excited-state amplitude decay.
    pub gamma: f64,
    /// One-photon detuning Δ.
    pub delta_1: f64,
    /// Two-photon detuning δ.
    pub delta_2: f64,
    pub n_modes: usize,
    /// Line length in light-travel μs.
    pub line_length: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl SystemParams {
    /// `(g, κ, γ) = (4.9, 2.42, 3.03) × 2π MHz`, no parasitic losses, resonant,
    /// geometry for a 0.5 μs photon.
    pub fn paper() -> Self {
        let kappa = mhz(2.42);
        let geometry = Geometry::for_photon(0.5, kappa, 6.0).expect("static geometry");
        Self {
            g: mhz(4.9),
            kappa,
            kappa_loss: 0.0,
            gamma: mhz(3.03),
            delta_1: 0.0,
            delta_2: 0.0,
            n_modes: geometry.n_modes,
            line_length: geometry.line_length,
            t_start: geometry.t_start,
            t_end: geometry.t_end,
        }
    }

    /// Builds parameters from rates given in units of 2π MHz.
    pub fn from_mhz(
        g: f64,
        kappa: f64,
        gamma: f64,
        kappa_loss: f64,
        geometry: Geometry,
    ) -> Result<Self> {
        let p = Self {
            g: mhz(g),
            kappa: mhz(kappa),
            kappa_loss: mhz(kappa_loss),
            gamma: mhz(gamma),
            delta_1: 0.0,
            delta_2: 0.0,
            n_modes: geometry.n_modes,
            line_length: geometry.line_length,
            t_start: geometry.t_start,
            t_end: geometry.t_end,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.n_modes = geometry.n_modes;
        self.line_length = geometry.line_length;
        self.t_start = geometry.t_start;
        self.t_end = geometry.t_end;
        self
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            n_modes: self.n_modes,
            line_length: self.line_length,
            t_start: self.t_start,
            t_end: self.t_end,
        }
    }

    /// Same system with `γ = κ_loss = 0`.
    pub fn lossless(mut self) -> Self {
        self.gamma = 0.0;
        self.kappa_loss = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        nonneg("g", self.g)?;
        nonneg("kappa", self.kappa)?;
        nonneg("kappa_loss", self.kappa_loss)?;
        nonneg("gamma", self.gamma)?;
        if !self.delta_1.is_finite() || !self.delta_2.is_finite() {
            return Err(Error::param("delta", "detunings must be finite"));
        }
        if self.n_modes < 3 || self.n_modes % 2 == 0 {
            return Err(Error::param(
                "n_modes",
                format!("must be odd and >= 3, got {}", self.n_modes),
            ));
        }
        if !(self.line_length > 0.0) || !self.line_length.is_finite() {
            return Err(Error::param("line_length", "must be positive"));
        }
        if !(self.t_start < 0.0 && self.t_end > 0.0) {
            return Err(Error::param(
                "window",
                format!(
                    "need t_start < 0 < t_end, got [{}, {}]",
                    self.t_start, self.t_end
                ),
            ));
        }
        Ok(())
    }

    /// Dimension of the full single-excitation space including both sinks.
    pub fn dim(&self) -> usize {
        self.n_modes + 5
    }

    /// Dimension of the coherent part (modes, cavity, |e⟩, |r⟩).
    pub fn coherent_dim(&self) -> usize {
        self.n_modes + 3
    }

    pub fn half_modes(&self) -> i64 {
        (self.n_modes as i64 - 1) / 2
    }

    /// Sum of the cavity decay rates, κ + κ_loss.
    pub fn kappa_total(&self) -> f64 {
        self.kappa + self.kappa_loss
    }
}

/// Labels of the single-excitation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisIndex {
    /// Transmission-line mode `n ∈ {−(N−1)/2, …, (N−1)/2}`.
    Mode(i64),
    /// |g, 1_c, vac⟩
    CavityPhoton,
    /// |e, 0_c, vac⟩
    ExcitedAtom,
    /// |r, 0_c, vac⟩
    TargetAtom,
    /// |ξ_e, 0_c, vac⟩
    SpontSink,
    /// |g, 0_c, vac⟩ reached through parasitic cavity loss.
    CavitySink,
}

impl BasisIndex {
    pub fn index(self, n_modes: usize) -> Option<usize> {
        let half = (n_modes as i64 - 1) / 2;
        match self {
            BasisIndex::Mode(n) if (-half..=half).contains(&n) => Some((n + half) as usize),
            BasisIndex::Mode(_) => None,
            BasisIndex::CavityPhoton => Some(n_modes),
            BasisIndex::ExcitedAtom => Some(n_modes + 1),
            BasisIndex::TargetAtom => Some(n_modes + 2),
            BasisIndex::SpontSink => Some(n_modes + 3),
            BasisIndex::CavitySink => Some(n_modes + 4),
        }
    }

    pub fn from_index(i: usize, n_modes: usize) -> Option<Self> {
        let half = (n_modes as i64 - 1) / 2;
        Some(match i {
            _ if i < n_modes => BasisIndex::Mode(i as i64 - half),
            _ if i == n_modes => BasisIndex::CavityPhoton,
            _ if i == n_modes + 1 => BasisIndex::ExcitedAtom,
            _ if i == n_modes + 2 => BasisIndex::TargetAtom,
            _ if i == n_modes + 3 => BasisIndex::SpontSink,
            _ if i == n_modes + 4 => BasisIndex::CavitySink,
            _ => return None,
        })
    }
}

/// Mode detunings `ω_n − ω_c = nπc/L`, ascending.
pub fn mode_grid(params: &SystemParams) -> Vec<f64> {
    let half = params.half_modes();
    let spacing = PI / params.line_length;
    (-half..=half).map(|n| n as f64 * spacing).collect()
}

/// Flat mode coupling `λ = √(κ c / L)`.
pub fn mode_coupling(params: &SystemParams) -> f64 {
    (params.kappa / params.line_length).sqrt()
}

/// Uniformly sampled complex envelope with cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct SampledEnvelope {
    t0: f64,
    dt: f64,
    values: Vec<C64>,
    slopes: Vec<C64>,
    curvatures: Vec<C64>,
    cumulative: Vec<f64>,
}

impl SampledEnvelope {
    pub fn new(t0: f64, dt: f64, values: Vec<C64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::param("samples", "need at least 5 samples"));
        }
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let slopes = derivative4(&values, dt);
        let curvatures = derivative4(&slopes, dt);
        let mut env = Self {
            t0,
            dt,
            values,
            slopes,
            curvatures,
            cumulative: Vec::new(),
        };
        let mut cumulative = Vec::with_capacity(env.values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..env.values.len() - 1 {
            acc += env.partial_norm(i, 1.0);
            cumulative.push(acc);
        }
        env.cumulative = cumulative;
        Ok(env)
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len() - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn eval(&self, t: f64) -> (C64, C64) {
        hermite(self.t0, self.dt, &self.values, &self.slopes, t)
    }

    // ∫ |E|² over the first `frac` of interval `i`.
    fn partial_norm(&self, i: usize, frac: f64) -> f64 {
        let a = self.t0 + self.dt * i as f64;
        let h = self.dt * frac;
        GAUSS3
            .iter()
            .map(|&(x, w)| w * h * self.eval(a + x * h).0.norm_sqr())
            .sum()
    }

    fn cumulative_norm(&self, t: f64) -> f64 {
        let x = (t - self.t0) / self.dt;
        if x <= 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        if x >= (n - 1) as f64 {
            return self.cumulative[n - 1];
        }
        let i = x.floor() as usize;
        let frac = x - i as f64;
        self.cumulative[i] + if frac > 0.0 { self.partial_norm(i, frac) } else { 0.0 }
    }

    fn second_derivative(&self, t: f64) -> C64 {
        hermite(self.t0, self.dt, &self.slopes, &self.curvatures, t).1
    }
}

/// Functional form of a photon envelope.
#[derive(Debug, Clone)]
pub enum EnvelopeRule {
    /// `(1/√T) sech(2(t − center)/T)`.
    Sech { t_char: f64, center: f64 },
    /// `A e^{rate (t − reference)}`.
    Exponential { amplitude: f64, rate: f64, reference: f64 },
    Sampled(Arc<SampledEnvelope>),
}

/// Time-domain amplitude `E_in(t)` [μs^{-1/2}] of a photon at the mirror plane,
/// together with its support window.
#[derive(Clone)]
pub struct PhotonEnvelope {
    rule: EnvelopeRule,
    scale: C64,
    t_start: f64,
    t_end: f64,
}

impl fmt::Debug for PhotonEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.rule {
            EnvelopeRule::Sech { t_char, center } => format!("Sech(T={t_char}, center={center})"),
            EnvelopeRule::Exponential { rate, .. } => format!("Exponential(rate={rate})"),
            EnvelopeRule::Sampled(s) => format!("Sampled({} points)", s.values.len()),
        };
        f.debug_struct("PhotonEnvelope")
            .field("rule", &kind)
            .field("scale", &self.scale)
            .field("window", &(self.t_start, self.t_end))
            .finish()
    }
}

impl PhotonEnvelope {
    fn check_window(t_start: f64, t_end: f64) -> Result<()> {
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::param(
                "window",
                format!("need t_start < t_end, got [{t_start}, {t_end}]"),
            ));
        }
        Ok(())
    }

    /// Hyperbolic-secant photon centred at `t = 0`.
    pub fn sech(t_char: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::sech_centered(t_char, 0.0, t_start, t_end)
    }

    pub fn sech_centered(t_char: f64, center: f64, t_start: f64, t_end: f64) -> Result<Self> {
        sech_envelope(t_char, 0.0)?;
        Self::check_window(t_start, t_end)?;
        Ok(Self {
            rule: EnvelopeRule::Sech { t_char, center },
            scale: C64::new(1.0, 0.0),
            t_start,
            t_end,
        })
    }

    /// Sech photon with the given coherence time on the window `±window_tc · Tc`.
    pub fn sech_for_coherence_time(tc: f64, window_tc: f64) -> Result<Self> {
        Self::sech(sech_time_for_coherence(tc), -window_tc * tc, window_tc * tc)
    }

    /// Sech photon with the given coherence time on an explicit window.
    pub fn sech_on_window(tc: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::sech(sech_time_for_coherence(tc), t_start, t_end)
    }

    /// Exponential envelope normalised to one over the window.
    pub fn exponential(rate: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::check_window(t_start, t_end)?;
        let width = t_end - t_start;
        let norm = if rate.abs() * width < 1e-12 {
            width
        } else {
            ((2.0 * rate * width).exp() - 1.0) / (2.0 * rate)
        };
        Ok(Self {
            rule: EnvelopeRule::Exponential {
                amplitude: 1.0 / norm.sqrt(),
                rate,
                reference: t_start,
            },
            scale: C64::new(1.0, 0.0),
            t_start,
            t_end,
        })
    }

    /// Uniform samples starting at `t0` with spacing `dt`; the window is the
    /// sampled range.
    pub fn sampled(t0: f64, dt: f64, values: Vec<C64>) -> Result<Self> {
        let s = SampledEnvelope::new(t0, dt, values)?;
        let (a, b) = (s.t_start(), s.t_end());
        Ok(Self {
            rule: EnvelopeRule::Sampled(Arc::new(s)),
            scale: C64::new(1.0, 0.0),
            t_start: a,
            t_end: b,
        })
    }

    /// Samples an arbitrary function on `n` uniform points of the window.
    pub fn from_fn(f: impl Fn(f64) -> C64, t_start: f64, t_end: f64, n: usize) -> Result<Self> {
        Self::check_window(t_start, t_end)?;
        let times = linspace(t_start, t_end, n.max(5));
        let dt = times[1] - times[0];
        Self::sampled(t_start, dt, times.iter().map(|&t| f(t)).collect())
    }

    pub fn rule(&self) -> &EnvelopeRule {
        &self.rule
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    /// Multiplies the amplitude by a complex factor.
    pub fn scaled(mut self, factor: C64) -> Self {
        self.scale *= factor;
        self
    }

    /// Copy rescaled to unit norm over its window.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Restricts or extends the window used for norms and quadrature.
    pub fn with_window(mut self, t_start: f64, t_end: f64) -> Result<Self> {
        Self::check_window(t_start, t_end)?;
        self.t_start = t_start;
        self.t_end = t_end;
        Ok(self)
    }

    /// Translates the envelope and its window by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let rule = match &self.rule {
            EnvelopeRule::Sech { t_char, center } => EnvelopeRule::Sech {
                t_char: *t_char,
                center: center + shift,
            },
            EnvelopeRule::Exponential {
                amplitude,
                rate,
                reference,
            } => EnvelopeRule::Exponential {
                amplitude: *amplitude,
                rate: *rate,
                reference: reference + shift,
            },
            EnvelopeRule::Sampled(s) => {
                let mut s2 = (**s).clone();
                s2.t0 += shift;
                EnvelopeRule::Sampled(Arc::new(s2))
            }
        };
        Self {
            rule,
            scale: self.scale,
            t_start: self.t_start + shift,
            t_end: self.t_end + shift,
        }
    }

    /// `E*(pivot − t)` on the mirrored window.
    pub fn time_reversed_conjugate(&self, pivot: f64) -> Self {
        let rule = match &self.rule {
            EnvelopeRule::Sech { t_char, center } => EnvelopeRule::Sech {
                t_char: *t_char,
                center: pivot - center,
            },
            EnvelopeRule::Exponential {
                amplitude,
                rate,
                reference,
            } => EnvelopeRule::Exponential {
                amplitude: *amplitude,
                rate: -rate,
                reference: pivot - reference,
            },
            EnvelopeRule::Sampled(s) => {
                let values: Vec<C64> = s.values.iter().rev().map(|v| v.conj()).collect();
                let t0 = pivot - s.t_end();
                EnvelopeRule::Sampled(Arc::new(
                    SampledEnvelope::new(t0, s.dt, values).expect("same sample count"),
                ))
            }
        };
        Self {
            rule,
            scale: self.scale.conj(),
            t_start: pivot - self.t_end,
            t_end: pivot - self.t_start,
        }
    }

    fn finish(&self, z: C64) -> C64 {
        z * self.scale
    }

    /// `E_in(t)`; analytic rules are evaluated everywhere, sampled envelopes
    /// vanish outside their grid.
    pub fn amplitude(&self, t: f64) -> C64 {
        let raw = match &self.rule {
            EnvelopeRule::Sech { t_char, center } => {
                C64::new(sech(2.0 * (t - center) / t_char) / t_char.sqrt(), 0.0)
            }
            EnvelopeRule::Exponential {
                amplitude,
                rate,
                reference,
            } => C64::new(amplitude * (rate * (t - reference)).exp(), 0.0),
            EnvelopeRule::Sampled(s) => s.eval(t).0,
        };
        self.finish(raw)
    }

    /// `dE_in/dt`.
    pub fn derivative(&self, t: f64) -> C64 {
        let raw = match &self.rule {
            EnvelopeRule::Sech { t_char, center } => {
                let u = 2.0 * (t - center) / t_char;
                C64::new(
                    -2.0 / t_char * sech(u) * u.tanh() / t_char.sqrt(),
                    0.0,
                )
            }
            EnvelopeRule::Exponential {
                amplitude,
                rate,
                reference,
            } => C64::new(rate * amplitude * (rate * (t - reference)).exp(), 0.0),
            EnvelopeRule::Sampled(s) => s.eval(t).1,
        };
        self.finish(raw)
    }

    /// `d²E_in/dt²`.
    pub fn second_derivative(&self, t: f64) -> C64 {
        let raw = match &self.rule {
            EnvelopeRule::Sech { t_char, center } => {
                let u = 2.0 * (t - center) / t_char;
                let (s, th) = (sech(u), u.tanh());
                C64::new(
                    4.0 / (t_char * t_char) * (s * th * th - s * s * s) / t_char.sqrt(),
                    0.0,
                )
            }
            EnvelopeRule::Exponential {
                amplitude,
                rate,
                reference,
            } => C64::new(rate * rate * amplitude * (rate * (t - reference)).exp(), 0.0),
            EnvelopeRule::Sampled(s) => s.second_derivative(t),
        };
        self.finish(raw)
    }

    /// `∫_{t_start}^{t} |E_in|² dt'`, clamped to the window.
    pub fn cumulative_norm(&self, t: f64) -> f64 {
        let t = t.clamp(self.t_start, self.t_end);
        let s2 = self.scale.norm_sqr();
        s2 * match &self.rule {
            EnvelopeRule::Sech { t_char, center } => {
                let th = |x: f64| (2.0 * (x - center) / t_char).tanh();
                0.5 * (th(t) - th(self.t_start))
            }
            EnvelopeRule::Exponential {
                amplitude,
                rate,
                reference,
            } => {
                let prim = |x: f64| {
                    if rate.abs() < 1e-300 {
                        amplitude * amplitude * x
                    } else {
                        amplitude * amplitude * (2.0 * rate * (x - reference)).exp()
                            / (2.0 * rate)
                    }
                };
                prim(t) - prim(self.t_start)
            }
            EnvelopeRule::Sampled(s) => s.cumulative_norm(t) - s.cumulative_norm(self.t_start),
        }
    }

    /// `∫_{t}^{t_end} |E_in|² dt'`, evaluated without cancellation for the
    /// analytic rules.
    pub fn remaining_norm(&self, t: f64) -> f64 {
        let t = t.clamp(self.t_start, self.t_end);
        match &self.rule {
            EnvelopeRule::Sech { t_char, center } => {
                let th = |x: f64| (2.0 * (x - center) / t_char).tanh();
                self.scale.norm_sqr() * 0.5 * (th(self.t_end) - th(t))
            }
            _ => self.norm() - self.cumulative_norm(t),
        }
    }

    /// Norm over the window.
    pub fn norm(&self) -> f64 {
        self.cumulative_norm(self.t_end)
    }

    /// `n` uniform samples over the window.
    pub fn sample(&self, n: usize) -> (Vec<f64>, Vec<C64>) {
        let times = linspace(self.t_start, self.t_end, n);
        let values = times.iter().map(|&t| self.amplitude(t)).collect();
        (times, values)
    }

    /// Fourier amplitude `∫ e^{iωt} E_in(t) dt`. Sech envelopes use the
    /// closed form over the whole line; the others integrate over the window.
    pub fn spectrum(&self, omegas: &[f64]) -> Vec<C64> {
        if let EnvelopeRule::Sech { t_char, center } = &self.rule {
            return omegas
                .iter()
                .map(|&w| {
                    let base = 0.5 * PI * t_char.sqrt() * sech(PI * w * t_char / 4.0);
                    C64::from_polar(base, w * center) * self.scale
                })
                .collect();
        }
        let w_max = omegas.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let width = self.t_end - self.t_start;
        let mut n = (16.0 * w_max * width / (2.0 * PI)).ceil() as usize;
        n = n.max(8192);
        if n % 2 == 1 {
            n += 1;
        }
        let (times, values) = self.sample(n + 1);
        let dt = times[1] - times[0];
        let weights = crate::numeric::simpson_weights(n + 1, dt);
        let weighted: Vec<C64> = values.iter().zip(&weights).map(|(v, w)| v * w).collect();
        omegas
            .iter()
            .map(|&w| {
                let step = C64::from_polar(1.0, w * dt);
                let mut phase = C64::from_polar(1.0, w * times[0]);
                let mut acc = C64::new(0.0, 0.0);
                for (k, v) in weighted.iter().enumerate() {
                    if k % 1024 == 0 {
                        phase = C64::from_polar(1.0, w * times[k]);
                    }
                    acc += v * phase;
                    phase *= step;
                }
                acc
            })
            .collect()
    }
}

/// Photon coherence time `sqrt(⟨t²⟩ − ⟨t⟩²)` with moments normalised by the
/// envelope norm over its window.
pub fn coherence_time(env: &PhotonEnvelope) -> Result<f64> {
    let n = 40_001;
    let (times, values) = env.sample(n);
    let dt = times[1] - times[0];
    let dens: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    let m0 = simpson(&dens, dt);
    if !(m0 > 0.0) || !m0.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let first: Vec<f64> = dens.iter().zip(&times).map(|(d, t)| d * t).collect();
    let mean = simpson(&first, dt) / m0;
    let second: Vec<f64> = dens
        .iter()
        .zip(&times)
        .map(|(d, t)| d * (t - mean) * (t - mean))
        .collect();
    Ok((simpson(&second, dt) / m0).max(0.0).sqrt())
}

/// Transmission-line mode amplitudes of a photon.
#[derive(Debug, Clone)]
pub struct ModeAmplitudes {
    /// Amplitudes referenced to `t = 0`, ordered like [`mode_grid`], with
    /// `Σ|E_k|² = 1`.
    pub amps: Vec<C64>,
    /// `Σ|E_k|²` before renormalisation.
    pub raw_norm: f64,
}

/// `E_k = sqrt(c/2L) ∫ e^{i(ω_k − ω_c)t} E_in(t) dt` on the mode grid,
/// renormalised to unit total probability.
pub fn photon_mode_amplitudes(env: &PhotonEnvelope, params: &SystemParams) -> Result<ModeAmplitudes> {
    params.validate()?;
    let omegas = mode_grid(params);
    let pref = (1.0 / (2.0 * params.line_length)).sqrt();
    let mut amps: Vec<C64> = env.spectrum(&omegas).into_iter().map(|z| z * pref).collect();
    let raw_norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if !(raw_norm > 0.0) || !raw_norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    if raw_norm < 0.999 {
        warn!(
            "mode amplitudes capture only {raw_norm:.5} of the photon (N = {}, L = {}); \
             increase the mode count or line length",
            params.n_modes, params.line_length
        );
    }
    let s = 1.0 / raw_norm.sqrt();
    amps.iter_mut().for_each(|a| *a *= s);
    Ok(ModeAmplitudes { amps, raw_norm })
}

/// Field arriving at the mirror plane, reconstructed from mode amplitudes
/// known at `t_ref`: `A(τ) = (2L)^{-1/2} Σ_n E_n(t_ref) e^{−i ω_n (τ − t_ref)}`.
///
/// For free propagation this inverts [`photon_mode_amplitudes`]. Applied after
/// a storage or retrieval run it returns `−E_out(τ)`, the outgoing wavepacket
/// as it left the mirror: the line is periodic with period 2L and the far end
/// flips the sign on reflection.
pub fn mirror_field(amps: &[C64], t_ref: f64, params: &SystemParams, times: &[f64]) -> Vec<C64> {
    let omegas = mode_grid(params);
    let pref = (1.0 / (2.0 * params.line_length)).sqrt();
    times
        .iter()
        .map(|&tau| {
            amps.iter()
                .zip(&omegas)
                .map(|(a, w)| a * C64::from_polar(1.0, -w * (tau - t_ref)))
                .sum::<C64>()
                * pref
        })
        .collect()
}
