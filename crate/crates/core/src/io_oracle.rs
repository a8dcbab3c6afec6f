//! Low-dimensional input–output model of storage and retrieval.
//!
//! Two levels of approximation are available separately so that each can be
//! compared against the full-mode propagator: the Markov input–output
//! amplitude equations with an explicit cavity amplitude, and the
//! cavity-eliminated equations in which the excited state decays at the
//! enhanced rate `γ(1+C′)`.

use log::warn;

use crate::model::PhotonEnvelope;
use crate::numeric::{linspace, GAUSS3};
use crate::ode::{integrate, OdeOptions};
use crate::pulses::{effective_decay, eta_prime_max, omega_x_retr, ControlPulse};
use crate::{Error, Result, SystemParams, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Threshold on `|r(t_end)|²` below which a retrieval counts as complete.
pub const EMPTIED_THRESHOLD: f64 = 1e-4;

/// Cavity, excited-state and target amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AmplitudeState {
    pub c: C64,
    pub e: C64,
    pub r: C64,
}

/// Trajectory of a low-dimensional run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<AmplitudeState>,
    /// Output field at the mirror on the same grid.
    pub e_out: Vec<C64>,
    /// `∫_{t_start}^{t} |E_out|²`.
    pub out_norm: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> AmplitudeState {
        *self.states.last().expect("non-empty trajectory")
    }

    /// Sampled output envelope on the trajectory grid (uniform grids only).
    pub fn output_envelope(&self) -> Result<PhotonEnvelope> {
        let dt = self.times[1] - self.times[0];
        PhotonEnvelope::sampled(self.times[0], dt, self.e_out.clone())
    }
}

/// Result of a storage run.
#[derive(Debug, Clone)]
pub struct StorageResult {
    pub trajectory: Trajectory,
    /// `|r(t2)|² / ∫|E_in|²`.
    pub eta: f64,
}

/// Result of a retrieval run.
#[derive(Debug, Clone)]
pub struct RetrievalResult {
    pub trajectory: Trajectory,
    /// `∫ |E_out|²` over the window.
    pub efficiency: f64,
    /// `|r(t_end)|² < 10⁻⁴`.
    pub emptied: bool,
    /// Largest residual of `|e|² + |r|² + 2γ(1+C′)∫|e|² = 1` on the grid
    /// (cavity-eliminated model only; zero otherwise).
    pub decay_identity_residual: f64,
}

fn warn_regime(params: &SystemParams) {
    if params.kappa_loss > params.kappa {
        warn!(
            "kappa_loss = {} exceeds kappa = {}; outside the validated regime of the \
             input-output relation",
            params.kappa_loss, params.kappa
        );
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 2 {
        return Err(Error::param("t_grid", "need at least two output times"));
    }
    Ok(())
}

/// Markov input–output equations with an explicit cavity amplitude:
/// `ċ = −ig e − i√(2κ) E_in − (κ+κ_loss) c`, `ė = (iΔ−γ) e − ig c − iΩ r`,
/// `ṙ = −iΩ* e`, and `E_out = i√(2κ) c − E_in`.
pub fn storage_ode(
    params: &SystemParams,
    env: &PhotonEnvelope,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
) -> Result<StorageResult> {
    check_grid(t_grid)?;
    warn_regime(params);
    let input = |t: f64| env.amplitude(t);
    let traj = cavity_model(params, pulse, t_grid, tol, AmplitudeState::default(), &input)?;
    let t_end = *t_grid.last().expect("checked");
    let den = env.cumulative_norm(t_end) - env.cumulative_norm(t_grid[0]);
    let eta = if den > 0.0 {
        traj.last().r.norm_sqr() / den
    } else {
        f64::NAN
    };
    Ok(StorageResult {
        trajectory: traj,
        eta,
    })
}

/// Retrieval with the explicit-cavity equations from `r(t_start) = 1` and no
/// input field.
pub fn retrieval_cavity_ode(
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
) -> Result<RetrievalResult> {
    check_grid(t_grid)?;
    warn_regime(params);
    let start = AmplitudeState {
        r: C64::new(1.0, 0.0),
        ..AmplitudeState::default()
    };
    let traj = cavity_model(params, pulse, t_grid, tol, start, &|_| ZERO)?;
    let efficiency = *traj.out_norm.last().expect("non-empty");
    let emptied = traj.last().r.norm_sqr() < EMPTIED_THRESHOLD;
    Ok(RetrievalResult {
        trajectory: traj,
        efficiency,
        emptied,
        decay_identity_residual: 0.0,
    })
}

fn cavity_model(
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
    start: AmplitudeState,
    input: &dyn Fn(f64) -> C64,
) -> Result<Trajectory> {
    let (g, kt, gamma, delta) = (params.g, params.kappa_total(), params.gamma, params.delta_1);
    let s2k = (2.0 * params.kappa).sqrt();
    let out = |t: f64, c: C64| I * s2k * c - input(t);
    let sys = (4usize, |t: f64, y: &[C64], dy: &mut [C64]| {
        let (c, e, r) = (y[0], y[1], y[2]);
        let om = pulse.value(t);
        let dd = params.delta_2 + pulse.detuning(t);
        dy[0] = -I * g * e - I * s2k * input(t) - c * kt;
        dy[1] = (I * delta - gamma) * e - I * g * c - I * om * r;
        dy[2] = -I * om.conj() * e - I * dd * r;
        dy[3] = C64::new(out(t, c).norm_sqr(), 0.0);
    });
    let y0 = [start.c, start.e, start.r, ZERO];
    let mut traj = Trajectory::default();
    integrate(&sys, &y0, t_grid, &pulse.breakpoints(), &OdeOptions::with_tol(tol), |_, t, y| {
        traj.times.push(t);
        traj.states.push(AmplitudeState {
            c: y[0],
            e: y[1],
            r: y[2],
        });
        traj.e_out.push(out(t, y[0]));
        traj.out_norm.push(y[3].re);
        Ok(())
    })?;
    Ok(traj)
}

/// Cavity-eliminated storage:
/// `ė = [iΔ − γ(1+C′)] e − iΩ r − G√(2γC) E_in`, `ṙ = −iΩ* e`,
/// `E_out = G√(2γC) e + (κ−κ_loss)/(κ+κ_loss) E_in`.
pub fn storage_eliminated(
    params: &SystemParams,
    env: &PhotonEnvelope,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
) -> Result<StorageResult> {
    check_grid(t_grid)?;
    warn_regime(params);
    let input = |t: f64| env.amplitude(t);
    let (traj, _) = eliminated_model(params, pulse, t_grid, tol, AmplitudeState::default(), &input)?;
    let t_end = *t_grid.last().expect("checked");
    let den = env.cumulative_norm(t_end) - env.cumulative_norm(t_grid[0]);
    let eta = if den > 0.0 {
        traj.last().r.norm_sqr() / den
    } else {
        f64::NAN
    };
    Ok(StorageResult {
        trajectory: traj,
        eta,
    })
}

/// Cavity-eliminated retrieval from `r(t_start) = 1` with no input. The
/// efficiency `∫|E_out|²` tends to `G C′/(1+C′)` when |r⟩ is fully emptied.
pub fn retrieval_ode(
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
) -> Result<RetrievalResult> {
    check_grid(t_grid)?;
    warn_regime(params);
    let start = AmplitudeState {
        r: C64::new(1.0, 0.0),
        ..AmplitudeState::default()
    };
    let (traj, residual) = eliminated_model(params, pulse, t_grid, tol, start, &|_| ZERO)?;
    let efficiency = *traj.out_norm.last().expect("non-empty");
    let emptied = traj.last().r.norm_sqr() < EMPTIED_THRESHOLD;
    Ok(RetrievalResult {
        trajectory: traj,
        efficiency,
        emptied,
        decay_identity_residual: residual,
    })
}

fn eliminated_model(
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
    start: AmplitudeState,
    input: &dyn Fn(f64) -> C64,
) -> Result<(Trajectory, f64)> {
    let a = effective_decay(params, true)?;
    let kt = params.kappa_total();
    // G√(2γC) = √(2κ) g/(κ+κ_loss), finite for γ = 0.
    let coupling = (2.0 * params.kappa).sqrt() * params.g / kt;
    let refl = (params.kappa - params.kappa_loss) / kt;
    let delta = params.delta_1;
    let out = |t: f64, e: C64| e * coupling + input(t) * refl;
    let sys = (5usize, |t: f64, y: &[C64], dy: &mut [C64]| {
        let (e, r) = (y[1], y[2]);
        let om = pulse.value(t);
        let dd = params.delta_2 + pulse.detuning(t);
        dy[0] = ZERO;
        dy[1] = C64::new(-a, delta) * e - I * om * r - input(t) * coupling;
        dy[2] = -I * om.conj() * e - I * dd * r;
        dy[3] = C64::new(out(t, e).norm_sqr(), 0.0);
        dy[4] = C64::new(e.norm_sqr(), 0.0);
    });
    let y0 = [ZERO, start.e, start.r, ZERO, ZERO];
    let p0 = start.e.norm_sqr() + start.r.norm_sqr();
    let mut traj = Trajectory::default();
    let mut residual: f64 = 0.0;
    integrate(&sys, &y0, t_grid, &pulse.breakpoints(), &OdeOptions::with_tol(tol), |_, t, y| {
        let (e, r) = (y[1], y[2]);
        traj.times.push(t);
        // Adiabatically eliminated cavity amplitude.
        let c = (-I * params.g * e - I * (2.0 * params.kappa).sqrt() * input(t)) / kt;
        traj.states.push(AmplitudeState { c, e, r });
        traj.e_out.push(out(t, e));
        traj.out_norm.push(y[3].re);
        let identity = e.norm_sqr() + r.norm_sqr() + 2.0 * a * y[4].re - p0;
        residual = residual.max(identity.abs());
        Ok(())
    })?;
    Ok((traj, residual))
}

/// Closed-form output field of the retrieval once the excited state is also
/// eliminated: `E_out(t) = i√(2γGC′) Ω(t)/(iΔ − a) · exp(∫_{t1}^t |Ω|²/(iΔ − a))`
/// with `a = γ(1+C′)`, evaluated on `times` (the first entry is `t1`).
pub fn analytic_output(params: &SystemParams, pulse: &ControlPulse, times: &[f64]) -> Result<Vec<C64>> {
    let a = effective_decay(params, true)?;
    let den = C64::new(-a, params.delta_1);
    // γ G C′ = κ g²/(κ+κ_loss)²
    let kt = params.kappa_total();
    let amp = (2.0 * params.kappa * params.g * params.g / (kt * kt)).sqrt();
    let cum = cumulative_pulse_energy(pulse, times);
    Ok(times
        .iter()
        .zip(&cum)
        .map(|(&t, &w)| I * amp * pulse.value(t) / den * (C64::new(w, 0.0) / den).exp())
        .collect())
}

/// Right-hand side of the cumulative-norm identity of the analytic output:
/// `G C′/(1+C′) · [1 − exp(−2a/(a²+Δ²) ∫|Ω|²)]`.
pub fn analytic_output_norm(params: &SystemParams, pulse: &ControlPulse, times: &[f64]) -> Result<Vec<f64>> {
    let a = effective_decay(params, true)?;
    let kt = params.kappa_total();
    let big_g = params.kappa / kt;
    // G C′/(1+C′) = G (a − γ)/a
    let bound = big_g * (a - params.gamma) / a;
    let d = params.delta_1;
    let cum = cumulative_pulse_energy(pulse, times);
    Ok(cum
        .iter()
        .map(|w| bound * (1.0 - (-2.0 * a / (a * a + d * d) * w).exp()))
        .collect())
}

/// `∫_{times[0]}^{t} |Ω|²` at every entry of `times`, by 3-point Gauss
/// quadrature on 16 sub-cells per interval.
pub fn cumulative_pulse_energy(pulse: &ControlPulse, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    if times.is_empty() {
        return out;
    }
    out.push(0.0);
    for w in times.windows(2) {
        let sub = 16;
        let h = (w[1] - w[0]) / sub as f64;
        for k in 0..sub {
            let a = w[0] + k as f64 * h;
            acc += GAUSS3
                .iter()
                .map(|&(x, wt)| wt * h * pulse.value(a + x * h).norm_sqr())
                .sum::<f64>();
        }
        out.push(acc);
    }
    out
}

/// One hop of the storage chain.
#[derive(Debug, Clone)]
pub struct ChainHop {
    /// Node index starting at 1.
    pub node: usize,
    /// Probability stored in |r⟩ over the norm of the photon that arrived.
    pub eta: f64,
    /// Norm of the photon this node then re-emitted (not-a-number for the
    /// last node, which keeps its excitation).
    pub emitted_norm: f64,
    /// Envelope that arrived at this node, on `[0, T]`.
    pub incoming: PhotonEnvelope,
}

/// Settings of a chain run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub n_nodes: usize,
    /// Output samples per hop window.
    pub points: usize,
    pub tol: f64,
    pub delta: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            n_nodes: 5,
            points: 4001,
            tol: 1e-10,
            delta: 0.0,
        }
    }
}

/// Passes a photon through `n_nodes` identical atom–cavity nodes. Node 1
/// stores `env0`; every later node stores the photon re-emitted by its
/// predecessor, which retrieves with Ω^X_retr aimed at the shape of `env0`.
/// Each storage pulse is the time reversal of the retrieval pulse that would
/// emit the time-reversed incoming photon. Dynamics use the explicit-cavity
/// input–output equations on the window `[0, T]`, `T = t2 − t1`.
pub fn node_chain(params: &SystemParams, env0: &PhotonEnvelope, opts: &ChainOptions) -> Result<Vec<ChainHop>> {
    if opts.n_nodes < 2 {
        return Err(Error::param("n_nodes", "need at least two nodes"));
    }
    if opts.points < 5 {
        return Err(Error::param("points", "need at least 5 samples per hop"));
    }
    let p = SystemParams {
        delta_1: opts.delta,
        ..*params
    };
    let eta_p = eta_prime_max(&p)?;
    let (t1, t2) = env0.window();
    let period = t2 - t1;
    let grid = linspace(0.0, period, opts.points);
    let first = env0.shifted(-t1);
    // Retrieval pulse targeting √η′ · env0 on [0, T].
    let target = first.clone().scaled(C64::new(eta_p.sqrt(), 0.0));
    let retrieve = omega_x_retr(&p, &target, opts.delta)?;

    let mut hops = Vec::with_capacity(opts.n_nodes);
    let mut incoming = first;
    for node in 1..=opts.n_nodes {
        let store = storage_pulse(&p, &incoming, opts.delta, eta_p)?;
        let stored = storage_ode(&p, &incoming, &store, &grid, opts.tol)?;
        let r_amp = stored.trajectory.last().r;
        let mut hop = ChainHop {
            node,
            eta: stored.eta,
            emitted_norm: f64::NAN,
            incoming: incoming.clone(),
        };
        if node < opts.n_nodes {
            let out = retrieval_cavity_ode(&p, &retrieve, &grid, opts.tol)?;
            // Linearity: the emitted field scales with the stored amplitude.
            let values: Vec<C64> = out.trajectory.e_out.iter().map(|e| e * r_amp).collect();
            let dt = grid[1] - grid[0];
            incoming = PhotonEnvelope::sampled(0.0, dt, values)?;
            hop.emitted_norm = incoming.norm();
        }
        hops.push(hop);
    }
    Ok(hops)
}

/// Storage pulse for `incoming`: time reversal of the Ω^X_retr pulse that
/// would emit `√η′ · E_in*(T − t)/‖E_in‖`.
pub fn storage_pulse(
    params: &SystemParams,
    incoming: &PhotonEnvelope,
    delta: f64,
    eta_p: f64,
) -> Result<ControlPulse> {
    let (a, b) = incoming.window();
    let unit = incoming.clone().normalized()?;
    let reversed = unit
        .time_reversed_conjugate(a + b)
        .scaled(C64::new(eta_p.sqrt(), 0.0));
    Ok(omega_x_retr(params, &reversed, delta)?
        .time_reversed(a + b)
        .with_label("X_store"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz;
    use crate::pulses::EfficiencyBounds;

    fn lossy() -> SystemParams {
        SystemParams {
            kappa_loss: mhz(0.33),
            ..SystemParams::paper()
        }
    }

    fn window_env() -> PhotonEnvelope {
        PhotonEnvelope::sech_for_coherence_time(0.5, 6.0).unwrap()
    }

    #[test]
    fn no_drive_no_storage() {
        let p = lossy();
        let env = window_env();
        let pulse = ControlPulse::zero(-3.0, 3.0).unwrap();
        let res = storage_ode(&p, &env, &pulse, &linspace(-3.0, 3.0, 101), 1e-9).unwrap();
        assert_eq!(res.trajectory.last().r, ZERO);
        let ret = retrieval_ode(&p, &pulse, &linspace(0.0, 6.0, 101), 1e-9).unwrap();
        assert_eq!(ret.efficiency, 0.0);
        assert!(!ret.emptied);
    }

    #[test]
    fn decoupled_atom_stays_empty() {
        let mut p = lossy();
        p.g = 0.0;
        let env = window_env();
        let pulse = ControlPulse::constant(C64::new(5.0, 0.0), -3.0, 3.0).unwrap();
        let res = storage_ode(&p, &env, &pulse, &linspace(-3.0, 3.0, 101), 1e-9).unwrap();
        for s in &res.trajectory.states {
            assert_eq!(s.e, ZERO);
            assert_eq!(s.r, ZERO);
        }
    }

    #[test]
    fn retrieval_reaches_bound() {
        let p = lossy();
        let b = EfficiencyBounds::new(&p).unwrap();
        let target = window_env().shifted(3.0).scaled(C64::new(b.eta_prime_max.sqrt(), 0.0));
        let pulse = omega_x_retr(&p, &target, 0.0).unwrap();
        let grid = linspace(0.0, 6.0, 2001);
        let res = retrieval_ode(&p, &pulse, &grid, 1e-10).unwrap();
        assert!(res.emptied);
        assert!((res.efficiency - b.g_factor * b.c_prime / (1.0 + b.c_prime)).abs() < 1e-3);
        assert!(res.decay_identity_residual < 1e-8, "{}", res.decay_identity_residual);
        let lossless = SystemParams::paper();
        let b0 = EfficiencyBounds::new(&lossless).unwrap();
        let t0 = window_env().shifted(3.0).scaled(C64::new(b0.eta_max.sqrt(), 0.0));
        let res0 = retrieval_ode(&lossless, &omega_x_retr(&lossless, &t0, 0.0).unwrap(), &grid, 1e-10).unwrap();
        assert!((res0.efficiency - b0.c / (1.0 + b0.c)).abs() < 1e-3);
    }

    #[test]
    fn analytic_output_identity_and_phase() {
        let p = lossy();
        let target = window_env().shifted(3.0).scaled(C64::new(0.8, 0.0));
        let pulse = omega_x_retr(&p, &target, 0.0).unwrap();
        let times = linspace(0.0, 6.0, 3001);
        let field = analytic_output(&p, &pulse, &times).unwrap();
        let rhs = analytic_output_norm(&p, &pulse, &times).unwrap();
        let dens: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
        let dt = times[1] - times[0];
        // Trapezoid cumulative of |E_out|² versus the closed form.
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for i in 1..times.len() {
            acc += 0.5 * dt * (dens[i] + dens[i - 1]);
            worst = worst.max((acc - rhs[i]).abs());
        }
        assert!(worst < 1e-4, "{worst}");
        // Δ = 0: constant phase where the field is non-negligible.
        let ph0 = field[1500].arg();
        for z in field.iter().step_by(100).filter(|z| z.norm() > 1e-6) {
            assert!((z.arg() - ph0).abs() < 1e-9);
        }
    }

    #[test]
    fn chain_requires_two_nodes() {
        let opts = ChainOptions {
            n_nodes: 1,
            ..ChainOptions::default()
        };
        assert!(node_chain(&lossy(), &window_env(), &opts).is_err());
    }
}
