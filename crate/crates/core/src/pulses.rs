//! Control pulses, closed-form efficiency bounds and the phase ↔ two-photon
//! detuning gauge map.

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use log::warn;

use crate::model::{PhotonEnvelope, SystemParams};
use crate::numeric::{derivative4, linspace, GAUSS3};
use crate::{Error, Result, C64};

/// Default initial target population used to regularise Ω^D (and Ω^F's `c1`).
pub const DEFAULT_RHO0: f64 = 1e-4;
/// Floor applied to cumulative norms inside Ω^G / Ω^X / Ω^X_retr.
pub const NORM_FLOOR: f64 = 1e-12;
/// Number of grid points used to verify radicands and tabulate integrals.
const CHECK_POINTS: usize = 12_001;

type ComplexFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Interpolation used between pulse samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// Piecewise constant, each sample held until the next sample time.
    Hold,
}

#[derive(Clone)]
enum PulseKind {
    Zero,
    Constant(C64),
    Analytic(ComplexFn),
    Samples {
        times: Arc<Vec<f64>>,
        values: Arc<Vec<C64>>,
        interp: Interpolation,
    },
}

/// Complex Rabi frequency Ω(t) [rad/μs] on a finite domain; zero outside.
///
/// Optionally carries a time-dependent two-photon detuning δ(t) added to the
/// static one of [`SystemParams`], an amplitude cap and the analytic rate of
/// change of its phase.
#[derive(Clone)]
pub struct ControlPulse {
    label: String,
    kind: PulseKind,
    t_start: f64,
    t_end: f64,
    scale: C64,
    cap: Option<f64>,
    clips: Arc<AtomicUsize>,
    clip_warned: Arc<AtomicBool>,
    detuning: Option<RealFn>,
    phase_rate: Option<RealFn>,
    /// Pivot `p` when the pulse is `conj(rule(p − t))`.
    reversal: Option<f64>,
    /// Domain before the reversal, so a double reversal restores it exactly.
    unreversed: (f64, f64),
}

impl fmt::Debug for ControlPulse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlPulse")
            .field("label", &self.label)
            .field("domain", &(self.t_start, self.t_end))
            .field("cap", &self.cap)
            .field("has_detuning", &self.detuning.is_some())
            .finish()
    }
}

impl ControlPulse {
    fn new(label: impl Into<String>, kind: PulseKind, t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::param(
                "domain",
                format!("need t_start < t_end, got [{t_start}, {t_end}]"),
            ));
        }
        Ok(Self {
            label: label.into(),
            kind,
            t_start,
            t_end,
            scale: C64::new(1.0, 0.0),
            cap: None,
            clips: Arc::new(AtomicUsize::new(0)),
            clip_warned: Arc::new(AtomicBool::new(false)),
            detuning: None,
            phase_rate: None,
            reversal: None,
            unreversed: (t_start, t_end),
        })
    }

    pub fn zero(t_start: f64, t_end: f64) -> Result<Self> {
        Self::new("zero", PulseKind::Zero, t_start, t_end)
    }

    pub fn constant(value: C64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new("constant", PulseKind::Constant(value), t_start, t_end)
    }

    pub fn from_fn(
        label: impl Into<String>,
        t_start: f64,
        t_end: f64,
        f: impl Fn(f64) -> C64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(label, PulseKind::Analytic(Arc::new(f)), t_start, t_end)
    }

    /// `M` equal slices covering `[t_start, t_end]`.
    pub fn piecewise(slices: Vec<C64>, t_start: f64, t_end: f64) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::param("slices", "need at least one slice"));
        }
        let m = slices.len();
        let dt = (t_end - t_start) / m as f64;
        let times: Vec<f64> = (0..m).map(|j| t_start + j as f64 * dt).collect();
        Self::new(
            "piecewise",
            PulseKind::Samples {
                times: Arc::new(times),
                values: Arc::new(slices),
                interp: Interpolation::Hold,
            },
            t_start,
            t_end,
        )
    }

    /// Pulse through the given samples. The domain is `[times[0], times[n-1]]`
    /// for linear interpolation; held samples extend to `t_end`.
    pub fn sampled(
        times: Vec<f64>,
        values: Vec<C64>,
        interp: Interpolation,
        t_end: Option<f64>,
    ) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::param("samples", "need >= 2 samples of matching length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("samples", "sample times must be strictly increasing"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::param("samples", "non-finite pulse value"));
        }
        let last = *times.last().expect("len >= 2");
        let end = t_end.unwrap_or(last).max(last);
        let start = times[0];
        Self::new(
            "sampled",
            PulseKind::Samples {
                times: Arc::new(times),
                values: Arc::new(values),
                interp,
            },
            start,
            end,
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    /// Caps `|Ω|`; every clipped evaluation is counted and the first logged.
    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = Some(cap);
        self.clips = Arc::new(AtomicUsize::new(0));
        self.clip_warned = Arc::new(AtomicBool::new(false));
        self
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    /// Number of evaluations clipped by the cap so far.
    pub fn clip_events(&self) -> usize {
        self.clips.load(Ordering::Relaxed)
    }

    /// Attaches a time-dependent two-photon detuning δ(t) [rad/μs].
    pub fn with_detuning(mut self, delta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.detuning = Some(Arc::new(delta));
        self
    }

    /// Extra two-photon detuning at `t` (zero when none is attached).
    pub fn detuning(&self, t: f64) -> f64 {
        match &self.detuning {
            None => 0.0,
            Some(f) => f(self.map_time(t)),
        }
    }

    pub fn has_detuning(&self) -> bool {
        self.detuning.is_some()
    }

    fn with_phase_rate(mut self, rate: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.phase_rate = Some(Arc::new(rate));
        self
    }

    /// Multiplies the pulse by a complex constant.
    pub fn scaled(mut self, factor: C64) -> Self {
        self.scale *= factor;
        self
    }

    // Maps a query time to the time of the underlying rule.
    fn map_time(&self, t: f64) -> f64 {
        match self.reversal {
            None => t,
            Some(pivot) => pivot - t,
        }
    }

    fn raw(&self, s: f64) -> C64 {
        match &self.kind {
            PulseKind::Zero => C64::new(0.0, 0.0),
            PulseKind::Constant(v) => *v,
            PulseKind::Analytic(f) => f(s),
            PulseKind::Samples {
                times,
                values,
                interp,
            } => sample_lookup(times, values, *interp, s, self.reversal.is_some()),
        }
    }

    /// Ω(t): zero outside the domain, clipped to the cap when set.
    pub fn value(&self, t: f64) -> C64 {
        if t < self.t_start || t > self.t_end {
            return C64::new(0.0, 0.0);
        }
        let raw = self.raw(self.map_time(t));
        let mut v = if self.reversal.is_some() { raw.conj() } else { raw } * self.scale;
        if let Some(cap) = self.cap {
            let m = v.norm();
            if m > cap {
                self.clips.fetch_add(1, Ordering::Relaxed);
                if !self.clip_warned.swap(true, Ordering::Relaxed) {
                    warn!(
                        "pulse `{}` clipped at t = {t:.6} us: |Omega| = {m:.4e} > cap {cap:.4e}",
                        self.label
                    );
                }
                v *= cap / m;
            }
        }
        v
    }

    pub fn sample(&self, times: &[f64]) -> Vec<C64> {
        times.iter().map(|&t| self.value(t)).collect()
    }

    /// Largest `|Ω|` on `n` uniform points of the domain.
    pub fn max_abs(&self, n: usize) -> f64 {
        linspace(self.t_start, self.t_end, n.max(2))
            .into_iter()
            .map(|t| self.value(t).norm())
            .fold(0.0, f64::max)
    }

    /// Times at which Ω(t) may jump; propagators step exactly onto these.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![self.t_start, self.t_end];
        if let PulseKind::Samples {
            times,
            interp: Interpolation::Hold,
            ..
        } = &self.kind
        {
            for &s in times.iter() {
                let t = match self.reversal {
                    None => s,
                    Some(pivot) => pivot - s,
                };
                out.push(t);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        out.dedup();
        out
    }

    /// Slice amplitudes of a forward, unscaled piecewise-constant pulse.
    pub fn slices(&self) -> Option<&[C64]> {
        match (&self.kind, self.reversal, self.scale == C64::new(1.0, 0.0)) {
            (
                PulseKind::Samples {
                    values,
                    interp: Interpolation::Hold,
                    ..
                },
                None,
                true,
            ) => Some(values.as_slice()),
            _ => None,
        }
    }

    /// Native samples (times, values) for sample-backed pulses.
    pub fn native_samples(&self) -> Option<(Vec<f64>, Vec<C64>, Interpolation)> {
        let PulseKind::Samples {
            times,
            values,
            interp,
        } = &self.kind
        else {
            return None;
        };
        if self.reversal.is_some() {
            return None;
        }
        let vals: Vec<C64> = values.iter().map(|v| v * self.scale).collect();
        let mut ts = times.as_ref().clone();
        let mut vs = vals;
        if *interp == Interpolation::Hold && *ts.last().expect("non-empty") < self.t_end {
            ts.push(self.t_end);
            vs.push(*vs.last().expect("non-empty"));
        }
        Some((ts, vs, *interp))
    }

    /// `Ω*(pivot − t)` on the mirrored domain `[pivot − t_end, pivot − t_start]`.
    pub fn time_reversed(&self, pivot: f64) -> Self {
        let mut out = self.clone();
        out.t_start = pivot - self.t_end;
        out.t_end = pivot - self.t_start;
        out.scale = self.scale.conj();
        match self.reversal {
            None => {
                out.reversal = Some(pivot);
                out.unreversed = (self.t_start, self.t_end);
            }
            Some(p1) => {
                // conj(conj(f(p1 − (pivot − t)))) = f(t − (pivot − p1))
                let shift = pivot - p1;
                out.reversal = None;
                out.t_start = self.unreversed.0 + shift;
                out.t_end = self.unreversed.1 + shift;
                out.kind = shift_kind(&self.kind, shift);
                out.detuning = shift_real(&self.detuning, shift);
                out.phase_rate = shift_real(&self.phase_rate, shift);
            }
        }
        out
    }

    /// Reverses around the domain midpoint so the domain is unchanged.
    pub fn time_reversed_in_domain(&self) -> Self {
        self.time_reversed(self.t_start + self.t_end)
    }

    /// Translates the pulse and its domain by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.t_start += shift;
        out.t_end += shift;
        match self.reversal {
            Some(p) => {
                out.reversal = Some(p + shift);
                out.unreversed = (self.unreversed.0 + shift, self.unreversed.1 + shift);
            }
            None => {
                out.kind = shift_kind(&self.kind, shift);
                out.detuning = shift_real(&self.detuning, shift);
                out.phase_rate = shift_real(&self.phase_rate, shift);
            }
        }
        out
    }

    /// Analytic χ̇(t) for pulses that know it.
    pub fn phase_rate(&self, t: f64) -> Option<f64> {
        let f = self.phase_rate.as_ref()?;
        // χ_rev(t) = −χ(p − t) ⇒ χ̇_rev(t) = χ̇(p − t)
        Some(f(self.map_time(t)))
    }
}

fn shift_real(f: &Option<RealFn>, shift: f64) -> Option<RealFn> {
    f.clone()
        .map(|f| Arc::new(move |t: f64| f(t - shift)) as RealFn)
}

fn shift_kind(kind: &PulseKind, shift: f64) -> PulseKind {
    match kind {
        PulseKind::Analytic(f) => {
            let f = f.clone();
            PulseKind::Analytic(Arc::new(move |t| f(t - shift)))
        }
        PulseKind::Samples {
            times,
            values,
            interp,
        } => PulseKind::Samples {
            times: Arc::new(times.iter().map(|t| t + shift).collect()),
            values: values.clone(),
            interp: *interp,
        },
        other => other.clone(),
    }
}

// `from_right` selects the right-continuous convention used by time-reversed
// held samples, so a reversed slice keeps the half-open orientation of the
// integration direction.
fn sample_lookup(
    times: &[f64],
    values: &[C64],
    interp: Interpolation,
    s: f64,
    from_right: bool,
) -> C64 {
    let n = times.len();
    match interp {
        Interpolation::Hold => {
            // Index of the last sample time <= s (or < s when reversed).
            let idx = if from_right {
                times.partition_point(|&x| x < s)
            } else {
                times.partition_point(|&x| x <= s)
            };
            if idx == 0 {
                values[0]
            } else {
                values[idx - 1]
            }
        }
        Interpolation::Linear => {
            if s <= times[0] {
                return values[0];
            }
            if s >= times[n - 1] {
                return values[n - 1];
            }
            let i = times.partition_point(|&x| x <= s) - 1;
            let w = (s - times[i]) / (times[i + 1] - times[i]);
            values[i] * (1.0 - w) + values[i + 1] * w
        }
    }
}

/// Cooperativity `C = g²/(κγ)`.
pub fn cooperativity(params: &SystemParams) -> Result<f64> {
    if !(params.kappa > 0.0) || !(params.gamma > 0.0) {
        return Err(Error::param(
            "kappa/gamma",
            format!(
                "cooperativity needs kappa, gamma > 0 (got {}, {})",
                params.kappa, params.gamma
            ),
        ));
    }
    Ok(params.g * params.g / (params.kappa * params.gamma))
}

/// Modified cooperativity `C′ = g²/(γ(κ+κ_loss))`.
pub fn modified_cooperativity(params: &SystemParams) -> Result<f64> {
    if !(params.kappa_total() > 0.0) || !(params.gamma > 0.0) {
        return Err(Error::param(
            "kappa/gamma",
            "modified cooperativity needs kappa + kappa_loss > 0 and gamma > 0",
        ));
    }
    Ok(params.g * params.g / (params.gamma * params.kappa_total()))
}

/// `η_max = C/(1+C)`.
pub fn eta_max(c: f64) -> f64 {
    c / (1.0 + c)
}

/// `η′_max = κ/(κ+κ_loss) · C′/(1+C′)`.
pub fn eta_prime_max(params: &SystemParams) -> Result<f64> {
    let cp = modified_cooperativity(params)?;
    Ok(params.kappa / params.kappa_total() * cp / (1.0 + cp))
}

/// Closed-form storage bounds of one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyBounds {
    pub c: f64,
    pub c_prime: f64,
    pub eta_max: f64,
    pub eta_prime_max: f64,
    /// `G = κ/(κ+κ_loss)`.
    pub g_factor: f64,
}

impl EfficiencyBounds {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let c = cooperativity(params)?;
        let c_prime = modified_cooperativity(params)?;
        Ok(Self {
            c,
            c_prime,
            eta_max: eta_max(c),
            eta_prime_max: eta_prime_max(params)?,
            g_factor: params.kappa / params.kappa_total(),
        })
    }
}

/// `γ(1+C′) = γ + g²/(κ+κ_loss)`, finite also for γ = 0.
pub fn effective_decay(params: &SystemParams, with_loss: bool) -> Result<f64> {
    let k = if with_loss {
        params.kappa_total()
    } else {
        params.kappa
    };
    if !(k > 0.0) {
        return Err(Error::param("kappa", "must be positive"));
    }
    let a = params.gamma + params.g * params.g / k;
    if !(a > 0.0) {
        return Err(Error::param("g/gamma", "gamma(1+C) must be positive"));
    }
    Ok(a)
}

fn check_radicand(
    name: &'static str,
    t_start: f64,
    t_end: f64,
    radicand: impl Fn(f64) -> f64,
) -> Result<()> {
    for t in linspace(t_start, t_end, CHECK_POINTS) {
        let v = radicand(t);
        if !(v > 0.0) {
            return Err(Error::NonPositiveRadicand {
                pulse: name,
                t,
                value: v,
            });
        }
    }
    Ok(())
}

fn require_g(params: &SystemParams, name: &str) -> Result<()> {
    if !(params.g > 0.0) {
        return Err(Error::param("g", format!("{name} needs g > 0")));
    }
    Ok(())
}

/// `F(t) = Ė_in − κ E_in` and its derivative.
fn f_and_fdot(env: &PhotonEnvelope, kappa: f64, t: f64) -> (C64, C64) {
    let d = env.derivative(t);
    let f = d - env.amplitude(t) * kappa;
    let fd = env.second_derivative(t) - d * kappa;
    (f, fd)
}

/// Default regularisation `c1 = 2κρ0 − |F(t1)|²/g²` for Ω^F.
pub fn default_c1(params: &SystemParams, env: &PhotonEnvelope, rho0: f64) -> Result<f64> {
    require_g(params, "c1")?;
    let (f, _) = f_and_fdot(env, params.kappa, env.t_start());
    Ok(2.0 * params.kappa * rho0 - f.norm_sqr() / (params.g * params.g))
}

/// Impedance-matching pulse in the adiabatic dark-state limit,
/// `Ω^F = g E_in / sqrt(c1 + 2κ∫|E_in|² − |E_in|²)`.
pub fn omega_f(params: &SystemParams, env: &PhotonEnvelope, c1: Option<f64>) -> Result<ControlPulse> {
    require_g(params, "Omega^F")?;
    if params.delta_1 != 0.0 {
        warn!("Omega^F assumes a resonant cavity (Delta = 0), got Delta = {}", params.delta_1);
    }
    let c1 = match c1 {
        Some(c) => c,
        None => default_c1(params, env, DEFAULT_RHO0)?,
    };
    if !(c1 > 0.0) {
        return Err(Error::param("c1", format!("must be positive, got {c1:.3e}")));
    }
    let (g, kappa) = (params.g, params.kappa);
    let e = env.clone();
    let radicand = move |t: f64| c1 + 2.0 * kappa * e.cumulative_norm(t) - e.amplitude(t).norm_sqr();
    check_radicand("Omega^F", env.t_start(), env.t_end(), &radicand)?;
    let e = env.clone();
    ControlPulse::from_fn("F", env.t_start(), env.t_end(), move |t| {
        e.amplitude(t) * g / radicand(t).max(f64::MIN_POSITIVE).sqrt()
    })
}

/// Impedance-matching pulse without adiabatic elimination,
/// `Ω^D = [g E_in + (Ḟ + γF)/g] / sqrt(2κρ0 + 2κ∫|E_in|² − |E_in|² − D/g²)`
/// with `D = 2γ∫|F|² + |F|²`.
pub fn omega_d(params: &SystemParams, env: &PhotonEnvelope, rho0: f64) -> Result<ControlPulse> {
    require_g(params, "Omega^D")?;
    if !(rho0 > 0.0) {
        return Err(Error::param("rho0", format!("must be positive, got {rho0}")));
    }
    if params.delta_1 != 0.0 {
        warn!("Omega^D assumes a resonant cavity (Delta = 0), got Delta = {}", params.delta_1);
    }
    let (g, kappa, gamma) = (params.g, params.kappa, params.gamma);
    let table = Arc::new(CumulativeTable::new(env.t_start(), env.t_end(), |t| {
        f_and_fdot(env, kappa, t).0.norm_sqr()
    }));
    let e = env.clone();
    let tab = table.clone();
    let radicand = move |t: f64| {
        let (f, _) = f_and_fdot(&e, kappa, t);
        2.0 * kappa * rho0 + 2.0 * kappa * e.cumulative_norm(t)
            - e.amplitude(t).norm_sqr()
            - (2.0 * gamma * tab.at(t) + f.norm_sqr()) / (g * g)
    };
    check_radicand("Omega^D", env.t_start(), env.t_end(), &radicand)?;
    let e = env.clone();
    ControlPulse::from_fn("D", env.t_start(), env.t_end(), move |t| {
        let (f, fd) = f_and_fdot(&e, kappa, t);
        let num = e.amplitude(t) * g + (fd + f * gamma) / g;
        num / radicand(t).max(f64::MIN_POSITIVE).sqrt()
    })
}

/// `(a + iΔ)/sqrt(2a) · E/sqrt(N) · exp(−iΔ/(2a) ln N)` with `N = ∫_{t1}^t |E|²`.
fn adiabatic_pulse(
    label: &str,
    a: f64,
    delta: f64,
    env: &PhotonEnvelope,
) -> Result<ControlPulse> {
    let pref = C64::new(a, delta) / (2.0 * a).sqrt();
    let e = env.clone();
    let pulse = ControlPulse::from_fn(label, env.t_start(), env.t_end(), move |t| {
        let n = e.cumulative_norm(t).max(NORM_FLOOR);
        pref * e.amplitude(t) / n.sqrt() * C64::from_polar(1.0, -delta / (2.0 * a) * n.ln())
    })?;
    let e = env.clone();
    Ok(pulse.with_phase_rate(move |t| {
        let n = e.cumulative_norm(t).max(NORM_FLOOR);
        -delta / (2.0 * a) * e.amplitude(t).norm_sqr() / n
    }))
}

/// Maximal-storage pulse of the adiabatic model (lossless cavity rates).
pub fn omega_g(params: &SystemParams, env: &PhotonEnvelope, delta: f64) -> Result<ControlPulse> {
    let a = effective_decay(params, false)?;
    adiabatic_pulse("G", a, delta, env)
}

/// Ω^G with κ → κ + κ_loss, compensating parasitic cavity losses.
pub fn omega_x(params: &SystemParams, env: &PhotonEnvelope, delta: f64) -> Result<ControlPulse> {
    let a = effective_decay(params, true)?;
    adiabatic_pulse("X", a, delta, env)
}

/// Retrieval pulse producing `env_out` (expected norm η′_max):
/// `(a − iΔ)/sqrt(2a) · E_out/sqrt(R) · exp(iΔ/(2a) ln(R/η′))` with
/// `R = ∫_t^{t2} |E_out|²`.
pub fn omega_x_retr(
    params: &SystemParams,
    env_out: &PhotonEnvelope,
    delta: f64,
) -> Result<ControlPulse> {
    let a = effective_decay(params, true)?;
    let eta = env_out.norm();
    if !(eta > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let pref = C64::new(a, -delta) / (2.0 * a).sqrt();
    let e = env_out.clone();
    let pulse = ControlPulse::from_fn("X_retr", env_out.t_start(), env_out.t_end(), move |t| {
        let r = e.remaining_norm(t).max(NORM_FLOOR);
        pref * e.amplitude(t) / r.sqrt() * C64::from_polar(1.0, delta / (2.0 * a) * (r / eta).ln())
    })?;
    let e = env_out.clone();
    Ok(pulse.with_phase_rate(move |t| {
        let r = e.remaining_norm(t).max(NORM_FLOOR);
        -delta / (2.0 * a) * e.amplitude(t).norm_sqr() / r
    }))
}

/// Result of moving a pulse phase into a two-photon detuning.
#[derive(Clone)]
pub struct GaugeTransform {
    /// `|Ω(t)|` carrying the transformed detuning δ(t) = −χ̇(t).
    pub magnitude: ControlPulse,
    /// χ̇(t) on the check grid.
    pub times: Vec<f64>,
    pub chi_dot: Vec<f64>,
    /// Whether an analytic phase rate was available.
    pub analytic: bool,
}

impl GaugeTransform {
    /// Two-photon detuning that reproduces the complex pulse, δ(t) = −χ̇(t)
    /// for `H ⊃ δ|r⟩⟨r| + Ω|e⟩⟨r| + h.c.`.
    pub fn detuning(&self, t: f64) -> f64 {
        self.magnitude.detuning(t)
    }
}

/// Replaces `Ω = |Ω| e^{iχ}` by the real pulse `|Ω|` together with the
/// two-photon detuning `δ(t) = −χ̇(t)` that makes both propagations identical.
///
/// Pulses built by [`omega_g`], [`omega_x`] and [`omega_x_retr`] carry their
/// phase rate analytically; other pulses are differentiated numerically on a
/// fine grid, with a warning when the sampled phase is not smooth.
pub fn phase_to_detuning(pulse: &ControlPulse) -> Result<GaugeTransform> {
    let (a, b) = pulse.domain();
    let times = linspace(a, b, CHECK_POINTS);
    let p = pulse.clone();
    let (rate, analytic): (RealFn, bool) = if pulse.phase_rate.is_some() {
        let q = pulse.clone();
        (
            Arc::new(move |t: f64| q.phase_rate(t).expect("analytic phase rate")),
            true,
        )
    } else {
        let vals = pulse.sample(&times);
        let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut phase = Vec::with_capacity(vals.len());
        let mut prev = 0.0;
        let mut rough = false;
        for (i, v) in vals.iter().enumerate() {
            let raw = if v.norm() > 0.0 { v.arg() } else { prev };
            let mut x = raw;
            if i > 0 {
                while x - prev > std::f64::consts::PI {
                    x -= 2.0 * std::f64::consts::PI;
                }
                while x - prev < -std::f64::consts::PI {
                    x += 2.0 * std::f64::consts::PI;
                }
                if (x - prev).abs() > 0.5 && v.norm() > 1e-6 * peak {
                    rough = true;
                }
            }
            phase.push(x);
            prev = x;
        }
        if rough {
            warn!(
                "pulse `{}` has a non-smooth sampled phase; detuning from finite differences",
                pulse.label()
            );
        }
        let dt = times[1] - times[0];
        let cplx: Vec<C64> = phase.iter().map(|&x| C64::new(x, 0.0)).collect();
        let d: Vec<f64> = derivative4(&cplx, dt).iter().map(|z| z.re).collect();
        let t0 = times[0];
        let d = Arc::new(d);
        (
            Arc::new(move |t: f64| crate::numeric::linear(t0, dt, &d, t)),
            false,
        )
    };
    let chi_dot: Vec<f64> = times.iter().map(|&t| rate(t)).collect();
    let r2 = rate.clone();
    let magnitude = ControlPulse::from_fn(
        format!("|{}|", pulse.label()),
        a,
        b,
        move |t| C64::new(p.value(t).norm(), 0.0),
    )?
    .with_detuning(move |t| -r2(t));
    Ok(GaugeTransform {
        magnitude,
        times,
        chi_dot,
        analytic,
    })
}

/// Cumulative integral of a non-negative function on a fine uniform grid,
/// with 3-point Gauss quadrature per cell and linear interpolation inside.
struct CumulativeTable {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl CumulativeTable {
    fn new(t0: f64, t1: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = CHECK_POINTS;
        let dt = (t1 - t0) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..n - 1 {
            let a = t0 + i as f64 * dt;
            acc += GAUSS3.iter().map(|&(x, w)| w * dt * f(a + x * dt)).sum::<f64>();
            values.push(acc);
        }
        Self { t0, dt, values }
    }

    fn at(&self, t: f64) -> f64 {
        crate::numeric::linear(self.t0, self.dt, &self.values, t)
    }
}
