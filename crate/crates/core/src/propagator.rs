//! Single-excitation dynamics of transmission line, cavity and atom.
//!
//! The coherent part is an arrowhead matrix: every line mode couples only to
//! the cavity. Dissipation sends population into two absorbing sinks whose
//! populations are the time integrals of `2γ|e|²` and `2κ_loss|c|²`.

use crate::model::{mode_coupling, mode_grid, photon_mode_amplitudes, PhotonEnvelope, SystemParams};
use crate::numeric::linspace;
use crate::ode::{integrate, OdeOptions, OdeSystem};
use crate::pulses::ControlPulse;
use crate::{Error, Result, C64};

/// Largest mode count accepted by [`propagate_density_reference`].
pub const DENSITY_MAX_MODES: usize = 61;
/// Default number of output samples.
pub const DEFAULT_OUTPUT_POINTS: usize = 2000;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Amplitudes over `{Mode(n)…, CavityPhoton, ExcitedAtom, TargetAtom}` plus the
/// populations already lost to the two sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amps: Vec<C64>,
    pub p_spont: f64,
    pub p_cavloss: f64,
    pub t: f64,
}

impl QuantumState {
    fn empty(params: &SystemParams, t: f64) -> Self {
        Self {
            amps: vec![ZERO; params.coherent_dim()],
            p_spont: 0.0,
            p_cavloss: 0.0,
            t,
        }
    }

    /// Photon in the line at `params.t_start`, empty cavity, atom in |g⟩.
    pub fn photon(env: &PhotonEnvelope, params: &SystemParams) -> Result<Self> {
        let modes = photon_mode_amplitudes(env, params)?;
        let t1 = params.t_start;
        let mut s = Self::empty(params, t1);
        for ((a, e), w) in s.amps.iter_mut().zip(&modes.amps).zip(mode_grid(params)) {
            *a = e * C64::from_polar(1.0, -w * t1);
        }
        Ok(s)
    }

    /// One cavity photon, everything else empty.
    pub fn cavity_photon(params: &SystemParams, t: f64) -> Self {
        let mut s = Self::empty(params, t);
        s.amps[params.n_modes] = C64::new(1.0, 0.0);
        s
    }

    /// Atom in |r⟩, as at the start of a retrieval.
    pub fn target_atom(params: &SystemParams, t: f64) -> Self {
        let mut s = Self::empty(params, t);
        s.amps[params.n_modes + 2] = C64::new(1.0, 0.0);
        s
    }

    pub fn n_modes(&self) -> usize {
        self.amps.len() - 3
    }

    pub fn modes(&self) -> &[C64] {
        &self.amps[..self.n_modes()]
    }

    pub fn cavity(&self) -> C64 {
        self.amps[self.n_modes()]
    }

    pub fn excited(&self) -> C64 {
        self.amps[self.n_modes() + 1]
    }

    pub fn target(&self) -> C64 {
        self.amps[self.n_modes() + 2]
    }

    /// Photon probability in the line, `P_r`.
    pub fn line_population(&self) -> f64 {
        self.modes().iter().map(|a| a.norm_sqr()).sum()
    }

    /// `Σ|amps|² + p_spont + p_cavloss`.
    pub fn total_probability(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() + self.p_spont + self.p_cavloss
    }

    fn to_vector(&self) -> Vec<C64> {
        let mut v = self.amps.clone();
        v.push(C64::new(self.p_spont, 0.0));
        v.push(C64::new(self.p_cavloss, 0.0));
        v
    }

    fn from_vector(v: &[C64], t: f64) -> Self {
        let n = v.len() - 2;
        Self {
            amps: v[..n].to_vec(),
            p_spont: v[n].re,
            p_cavloss: v[n + 1].re,
            t,
        }
    }
}

/// Time series of observables of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationRecord {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub p_r: Vec<f64>,
    pub p_s: Vec<f64>,
    pub p_loss: Vec<f64>,
    pub rho_rr: Vec<f64>,
    pub rho_ee: Vec<f64>,
    pub rho_aa: Vec<f64>,
    pub omega: Vec<C64>,
}

impl SimulationRecord {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            eta: Vec::with_capacity(n),
            p_r: Vec::with_capacity(n),
            p_s: Vec::with_capacity(n),
            p_loss: Vec::with_capacity(n),
            rho_rr: Vec::with_capacity(n),
            rho_ee: Vec::with_capacity(n),
            rho_aa: Vec::with_capacity(n),
            omega: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sum of all populations at sample `i` (one for an exact run).
    pub fn closure(&self, i: usize) -> f64 {
        self.rho_rr[i] + self.rho_ee[i] + self.rho_aa[i] + self.p_r[i] + self.p_s[i] + self.p_loss[i]
    }

    pub fn max_closure_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.closure(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Values at the last output time.
    pub fn final_eta(&self) -> f64 {
        *self.eta.last().unwrap_or(&f64::NAN)
    }

    pub fn final_rho_rr(&self) -> f64 {
        *self.rho_rr.last().unwrap_or(&f64::NAN)
    }

    /// Recomputes η(t) against an envelope (see [`efficiency`]).
    pub fn set_efficiency(&mut self, env: &PhotonEnvelope) {
        self.eta = efficiency(self, env);
    }

    fn push(&mut self, t: f64, omega: C64, rr: f64, ee: f64, aa: f64, pr: f64, ps: f64, pl: f64) {
        self.times.push(t);
        self.omega.push(omega);
        self.rho_rr.push(rr);
        self.rho_ee.push(ee);
        self.rho_aa.push(aa);
        self.p_r.push(pr);
        self.p_s.push(ps);
        self.p_loss.push(pl);
        self.eta.push(f64::NAN);
    }
}

/// `η(t) = ρ_rr(t) / ∫_{t1}^{t} |E_in|²`; not-a-number where the denominator
/// vanishes.
pub fn efficiency(record: &SimulationRecord, env: &PhotonEnvelope) -> Vec<f64> {
    record
        .times
        .iter()
        .zip(&record.rho_rr)
        .map(|(&t, &rr)| {
            let den = env.cumulative_norm(t);
            if den > 0.0 {
                rr / den
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Coherent single-excitation Hamiltonian at one instant, stored in arrowhead
/// form: mode detunings, the flat mode–cavity coupling λ and the atomic block.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowheadHamiltonian {
    pub mode_detunings: Vec<f64>,
    pub lambda: f64,
    pub g: f64,
    /// One-photon detuning Δ; the excited state carries `−Δ`.
    pub delta_1: f64,
    /// Two-photon detuning δ (static plus the pulse's own modulation).
    pub delta_2: f64,
    pub omega: C64,
}

impl ArrowheadHamiltonian {
    pub fn dim(&self) -> usize {
        self.mode_detunings.len() + 3
    }

    /// `out = H v` in O(N).
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        self.apply_with_modes(&self.mode_detunings, v, out);
    }

    /// Upper bound on the spectral norm: largest diagonal entry plus the norms
    /// of the three coupling blocks (`λ√N`, `g`, `|Ω|`).
    pub fn norm_bound(&self) -> f64 {
        let diag = self
            .mode_detunings
            .iter()
            .fold(self.delta_1.abs().max(self.delta_2.abs()), |m, w| m.max(w.abs()));
        diag + self.lambda * (self.mode_detunings.len() as f64).sqrt() + self.g.abs() + self.omega.norm()
    }

    /// Dense row-major copy (tests and small reference calculations).
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let d = self.dim();
        let mut m = vec![vec![ZERO; d]; d];
        let mut e = vec![ZERO; d];
        let mut col = vec![ZERO; d];
        for j in 0..d {
            e.iter_mut().for_each(|x| *x = ZERO);
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for i in 0..d {
                m[i][j] = col[i];
            }
        }
        m
    }
}

/// Assembles the coherent Hamiltonian of `params` with the pulse evaluated at `t`.
pub fn build_hamiltonian(params: &SystemParams, omega: &ControlPulse, t: f64) -> ArrowheadHamiltonian {
    ArrowheadHamiltonian {
        mode_detunings: mode_grid(params),
        lambda: mode_coupling(params),
        g: params.g,
        delta_1: params.delta_1,
        delta_2: params.delta_2 + omega.detuning(t),
        omega: omega.value(t),
    }
}

struct AmplitudeSystem<'a> {
    params: &'a SystemParams,
    pulse: &'a ControlPulse,
    h: ArrowheadHamiltonian,
}

impl<'a> AmplitudeSystem<'a> {
    fn new(params: &'a SystemParams, pulse: &'a ControlPulse) -> Self {
        Self {
            params,
            pulse,
            h: build_hamiltonian(params, pulse, params.t_start),
        }
    }
}

impl OdeSystem for AmplitudeSystem<'_> {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.params.n_modes;
        let h = ArrowheadHamiltonian {
            omega: self.pulse.value(t),
            delta_2: self.params.delta_2 + self.pulse.detuning(t),
            ..self.h.clone_scalars()
        };
        h.apply_with_modes(&self.h.mode_detunings, y, dy);
        // dψ/dt = −i H ψ − γ e − κ_loss c
        for x in dy[..n + 3].iter_mut() {
            *x = C64::new(x.im, -x.re);
        }
        let (c, e) = (y[n], y[n + 1]);
        dy[n] -= c * self.params.kappa_loss;
        dy[n + 1] -= e * self.params.gamma;
        dy[n + 3] = C64::new(2.0 * self.params.gamma * e.norm_sqr(), 0.0);
        dy[n + 4] = C64::new(2.0 * self.params.kappa_loss * c.norm_sqr(), 0.0);
    }
}

impl ArrowheadHamiltonian {
    fn clone_scalars(&self) -> Self {
        Self {
            mode_detunings: Vec::new(),
            lambda: self.lambda,
            g: self.g,
            delta_1: self.delta_1,
            delta_2: self.delta_2,
            omega: self.omega,
        }
    }

    // `apply` with the mode detunings supplied separately, so the per-call
    // Hamiltonian needs no allocation.
    fn apply_with_modes(&self, modes: &[f64], v: &[C64], out: &mut [C64]) {
        let n = modes.len();
        let (c, e, r) = (v[n], v[n + 1], v[n + 2]);
        let lc = c * self.lambda;
        let mut sum = ZERO;
        for i in 0..n {
            out[i] = v[i] * modes[i] + lc;
            sum += v[i];
        }
        out[n] = sum * self.lambda + e * self.g;
        out[n + 1] = e * (-self.delta_1) + c * self.g + self.omega * r;
        out[n + 2] = r * self.delta_2 + self.omega.conj() * e;
    }
}

/// Integrator settings of a propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    /// Relative local error tolerance; the absolute one is `tol/100`.
    pub tol: f64,
    /// Allowed deviation of the total probability from its initial value;
    /// `None` means `10·tol`, floored at `1e-7`.
    pub max_drift: Option<f64>,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_drift: None,
        }
    }
}

impl PropagateOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_drift: None,
        }
    }

    fn drift_limit(&self) -> f64 {
        self.max_drift.unwrap_or((10.0 * self.tol).max(1e-7))
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions::with_tol(self.tol)
    }
}

/// Uniform output grid over the simulation window.
pub fn default_grid(params: &SystemParams, n: usize) -> Vec<f64> {
    linspace(params.t_start, params.t_end, n.max(2))
}

/// Integrates the non-Hermitian amplitude equations, calling `observe` with
/// the state at every grid time.
pub fn propagate_with<F>(
    state0: &QuantumState,
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    opts: &PropagateOptions,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &QuantumState) -> Result<()>,
{
    params.validate()?;
    if state0.amps.len() != params.coherent_dim() {
        return Err(Error::param(
            "state0",
            format!(
                "{} amplitudes for a {}-dimensional coherent space",
                state0.amps.len(),
                params.coherent_dim()
            ),
        ));
    }
    if t_grid.is_empty() {
        return Ok(());
    }
    let system = AmplitudeSystem::new(params, pulse);
    let y0 = state0.to_vector();
    let p0 = state0.total_probability();
    let allowed = opts.drift_limit();
    let breaks = pulse.breakpoints();
    integrate(&system, &y0, t_grid, &breaks, &opts.ode(), |i, t, y| {
        let s = QuantumState::from_vector(y, t);
        let drift = (s.total_probability() - p0).abs();
        if drift > allowed {
            return Err(Error::NormDrift { t, drift, allowed });
        }
        observe(i, &s)
    })?;
    Ok(())
}

/// Integrates the amplitude equations and records all observables on `t_grid`.
/// Efficiency is left as not-a-number; see [`propagate_photon`].
pub fn propagate(
    state0: &QuantumState,
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    opts: &PropagateOptions,
) -> Result<(SimulationRecord, QuantumState)> {
    let mut rec = SimulationRecord::with_capacity(t_grid.len());
    let mut last = state0.clone();
    propagate_with(state0, params, pulse, t_grid, opts, |_, s| {
        rec.push(
            s.t,
            pulse.value(s.t),
            s.target().norm_sqr(),
            s.excited().norm_sqr(),
            s.cavity().norm_sqr(),
            s.line_population(),
            s.p_spont,
            s.p_cavloss,
        );
        last = s.clone();
        Ok(())
    })?;
    Ok((rec, last))
}

/// Stores the photon `env` with `pulse` on the default output grid and fills
/// in η(t). Returns the record and the final state.
pub fn propagate_photon(
    env: &PhotonEnvelope,
    params: &SystemParams,
    pulse: &ControlPulse,
    n_points: usize,
    opts: &PropagateOptions,
) -> Result<(SimulationRecord, QuantumState)> {
    let state0 = QuantumState::photon(env, params)?;
    let grid = default_grid(params, n_points);
    let (mut rec, last) = propagate(&state0, params, pulse, &grid, opts)?;
    rec.set_efficiency(env);
    Ok((rec, last))
}

/// Result of the density-matrix reference integration.
#[derive(Debug, Clone)]
pub struct DensityRecord {
    pub record: SimulationRecord,
    /// Largest `|Tr ρ − 1|` over the output grid.
    pub max_trace_error: f64,
    /// Largest `max|ρ − ρ†|` over the output grid.
    pub max_hermiticity_error: f64,
    /// Final density matrix, row-major over the full `N+5` basis.
    pub final_rho: Vec<C64>,
}

struct DensitySystem<'a> {
    params: &'a SystemParams,
    pulse: &'a ControlPulse,
    modes: Vec<f64>,
    lambda: f64,
}

impl DensitySystem<'_> {
    // out = H_eff v over the full basis (sinks are inert).
    fn heff(&self, h: &ArrowheadHamiltonian, v: &[C64], out: &mut [C64]) {
        let n = self.params.n_modes;
        h.apply_with_modes(&self.modes, v, out);
        out[n] += v[n] * C64::new(0.0, -self.params.kappa_loss);
        out[n + 1] += v[n + 1] * C64::new(0.0, -self.params.gamma);
        out[n + 3] = ZERO;
        out[n + 4] = ZERO;
    }
}

impl OdeSystem for DensitySystem<'_> {
    fn dim(&self) -> usize {
        let d = self.params.dim();
        d * d
    }

    fn rhs(&self, t: f64, rho: &[C64], drho: &mut [C64]) {
        let d = self.params.dim();
        let n = self.params.n_modes;
        let h = ArrowheadHamiltonian {
            mode_detunings: Vec::new(),
            lambda: self.lambda,
            g: self.params.g,
            delta_1: self.params.delta_1,
            delta_2: self.params.delta_2 + self.pulse.detuning(t),
            omega: self.pulse.value(t),
        };
        let mut col = vec![ZERO; d];
        let mut out = vec![ZERO; d];
        // −i H_eff ρ, column by column.
        for j in 0..d {
            for i in 0..d {
                col[i] = rho[i * d + j];
            }
            self.heff(&h, &col, &mut out);
            for i in 0..d {
                drho[i * d + j] = C64::new(out[i].im, -out[i].re);
            }
        }
        // + i ρ H_eff†: row i of ρH† is conj(H_eff conj(ρ[i, :])).
        for i in 0..d {
            for k in 0..d {
                col[k] = rho[i * d + k].conj();
            }
            self.heff(&h, &col, &mut out);
            for j in 0..d {
                let x = out[j].conj();
                drho[i * d + j] += C64::new(-x.im, x.re);
            }
        }
        let (c, e, xi, sink) = (n, n + 1, n + 3, n + 4);
        drho[xi * d + xi] += rho[e * d + e] * (2.0 * self.params.gamma);
        drho[sink * d + sink] += rho[c * d + c] * (2.0 * self.params.kappa_loss);
    }
}

/// Reference integration of the full Lindblad master equation on the
/// `(N+5)`-dimensional space, starting from the pure state `state0`.
pub fn propagate_density_reference(
    state0: &QuantumState,
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
) -> Result<DensityRecord> {
    params.validate()?;
    if params.n_modes > DENSITY_MAX_MODES {
        return Err(Error::DimensionTooLarge {
            n_modes: params.n_modes,
            max: DENSITY_MAX_MODES,
        });
    }
    let d = params.dim();
    let psi = state0.to_vector();
    let mut rho0 = vec![ZERO; d * d];
    for i in 0..params.coherent_dim() {
        for j in 0..params.coherent_dim() {
            rho0[i * d + j] = psi[i] * psi[j].conj();
        }
    }
    let n = params.n_modes;
    rho0[(n + 3) * d + n + 3] = C64::new(state0.p_spont, 0.0);
    rho0[(n + 4) * d + n + 4] = C64::new(state0.p_cavloss, 0.0);
    density_from_matrix(rho0, params, pulse, t_grid, tol)
}

/// As [`propagate_density_reference`] for an arbitrary initial density matrix
/// (row-major, `(N+5)²` entries).
pub fn density_from_matrix(
    rho0: Vec<C64>,
    params: &SystemParams,
    pulse: &ControlPulse,
    t_grid: &[f64],
    tol: f64,
) -> Result<DensityRecord> {
    params.validate()?;
    if params.n_modes > DENSITY_MAX_MODES {
        return Err(Error::DimensionTooLarge {
            n_modes: params.n_modes,
            max: DENSITY_MAX_MODES,
        });
    }
    let d = params.dim();
    if rho0.len() != d * d {
        return Err(Error::param("rho0", format!("need {} entries", d * d)));
    }
    let system = DensitySystem {
        params,
        pulse,
        modes: mode_grid(params),
        lambda: mode_coupling(params),
    };
    let n = params.n_modes;
    let mut rec = SimulationRecord::with_capacity(t_grid.len());
    let mut max_trace: f64 = 0.0;
    let mut max_herm: f64 = 0.0;
    let mut final_rho = rho0.clone();
    let breaks = pulse.breakpoints();
    integrate(
        &system,
        &rho0,
        t_grid,
        &breaks,
        &OdeOptions::with_tol(tol),
        |_, t, rho| {
            let diag = |i: usize| rho[i * d + i].re;
            let trace: f64 = (0..d).map(diag).sum();
            max_trace = max_trace.max((trace - 1.0).abs());
            for i in 0..d {
                for j in i..d {
                    max_herm = max_herm.max((rho[i * d + j] - rho[j * d + i].conj()).norm());
                }
            }
            rec.push(
                t,
                pulse.value(t),
                diag(n + 2),
                diag(n + 1),
                diag(n),
                (0..n).map(diag).sum(),
                diag(n + 3),
                diag(n + 4),
            );
            final_rho.copy_from_slice(rho);
            Ok(())
        },
    )?;
    Ok(DensityRecord {
        record: rec,
        max_trace_error: max_trace,
        max_hermiticity_error: max_herm,
        final_rho,
    })
}

/// Photon density along the line, `P(x) = (2/L)|Σ_n E_n sin(q_n π x/L)|²`, with
/// sine quantum numbers `q_n = n + (N+1)/2 ∈ {1…N}`.
pub fn spatial_distribution(
    state: &QuantumState,
    params: &SystemParams,
    x_grid: &[f64],
) -> Result<Vec<f64>> {
    let l = params.line_length;
    if let Some(&x) = x_grid.iter().find(|&&x| !(-l..=0.0).contains(&x)) {
        return Err(Error::OutsideLine { x, length: l });
    }
    let modes = state.modes();
    let k = std::f64::consts::PI / l;
    Ok(x_grid
        .iter()
        .map(|&x| {
            let amp: C64 = modes
                .iter()
                .enumerate()
                .map(|(i, a)| a * ((i + 1) as f64 * k * x).sin())
                .sum();
            2.0 / l * amp.norm_sqr()
        })
        .collect())
}
