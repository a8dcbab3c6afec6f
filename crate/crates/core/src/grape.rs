//! Optimal control of the storage pulse in the lossless model.
//!
//! The control is piecewise constant on `M` equal slices. Each slice
//! propagator `exp(−i H_k Δt)` is applied exactly (to the integrator's
//! round-off) with [`crate::expm`], and the gradient of
//! `J = |⟨r|U_M⋯U_1|ψ0⟩|²` comes from forward states, backward costates and
//! the Fréchet derivative of every slice exponential.

use log::{debug, warn};

use crate::expm::{expmv, expmv_with_derivatives};
use crate::model::{mhz, Geometry, PhotonEnvelope};
use crate::propagator::{
    build_hamiltonian, propagate_photon, ArrowheadHamiltonian, PropagateOptions, QuantumState,
    SimulationRecord,
};
use crate::pulses::{omega_x, ControlPulse};
use crate::{Error, Result, SystemParams, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const DEFAULT_SLICES: usize = 256;
pub const MIN_SLICES: usize = 16;
/// Flat initial guess when Ω^X is unusable, in MHz.
pub const FALLBACK_AMPLITUDE_MHZ: f64 = 0.1;
/// Default amplitude bound, in MHz.
pub const DEFAULT_BOUND_MHZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrapeOptions {
    pub slices: usize,
    pub max_iters: usize,
    /// Stop when the projected gradient norm falls below this.
    pub g_tol: f64,
    /// `|Ω| ≤ bound` on every slice [rad/μs].
    pub bound: f64,
    /// Number of L-BFGS correction pairs.
    pub memory: usize,
    /// Relative truncation tolerance of the slice exponentials.
    pub expm_tol: f64,
    /// Complex slice amplitudes; `None` picks real controls on resonance.
    pub complex: Option<bool>,
    /// Stop as soon as J reaches this value.
    pub target: Option<f64>,
    /// Stop when J gained less than `stall_tol` over the last `stall_iters`
    /// iterations (0 disables).
    pub stall_iters: usize,
    pub stall_tol: f64,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self {
            slices: DEFAULT_SLICES,
            max_iters: 300,
            g_tol: 1e-8,
            bound: mhz(DEFAULT_BOUND_MHZ),
            memory: 12,
            expm_tol: 1e-13,
            complex: None,
            target: None,
            stall_iters: 0,
            stall_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    GradientTolerance,
    /// No step along the search direction increased J.
    LineSearch,
    TargetReached,
    Stalled,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MaxIterations => "max_iterations",
            Self::GradientTolerance => "gradient_tolerance",
            Self::LineSearch => "line_search",
            Self::TargetReached => "target_reached",
            Self::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub pulse: ControlPulse,
    pub slices: Vec<C64>,
    /// J after every accepted iteration; entry 0 is the initial guess.
    pub eta_history: Vec<f64>,
    /// Projected gradient norm at the same points.
    pub grad_norms: Vec<f64>,
    pub termination: Termination,
    pub iterations: usize,
    /// Forward propagations performed (line search and gradients).
    pub evaluations: usize,
}

impl OptimizationReport {
    pub fn final_eta(&self) -> f64 {
        *self.eta_history.last().expect("history holds the initial guess")
    }
}

/// Lossless storage problem on a fixed window: photon in the line at
/// `t_start`, target state |r⟩ at `t_end`.
#[derive(Debug, Clone)]
pub struct StorageProblem {
    h: ArrowheadHamiltonian,
    psi0: Vec<C64>,
    t_start: f64,
    t_end: f64,
    tol: f64,
}

impl StorageProblem {
    pub fn new(params: &SystemParams, env: &PhotonEnvelope, expm_tol: f64) -> Result<Self> {
        if params.gamma != 0.0 || params.kappa_loss != 0.0 {
            return Err(Error::NotLossless {
                gamma: params.gamma,
                kappa_loss: params.kappa_loss,
            });
        }
        params.validate()?;
        let state = QuantumState::photon(env, params)?;
        let zero = ControlPulse::zero(params.t_start, params.t_end)?;
        Ok(Self {
            h: build_hamiltonian(params, &zero, params.t_start),
            psi0: state.amps,
            t_start: params.t_start,
            t_end: params.t_end,
            tol: expm_tol,
        })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn dim(&self) -> usize {
        self.psi0.len()
    }

    fn dt(&self, m: usize) -> f64 {
        (self.t_end - self.t_start) / m as f64
    }

    // exp(∓i H(Ω) dt) v
    fn slice_step(&self, h: &mut ArrowheadHamiltonian, omega: C64, dt: f64, v: &[C64], backward: bool) -> Vec<C64> {
        h.omega = omega;
        let norm = h.norm_bound() * dt;
        let f = if backward { I * dt } else { -I * dt };
        let hh = &*h;
        expmv(
            |x, out| {
                hh.apply(x, out);
                out.iter_mut().for_each(|o| *o *= f);
            },
            norm,
            v,
            self.tol,
        )
    }

    /// State at `t_end` under the given slices.
    pub fn final_state(&self, slices: &[C64]) -> Vec<C64> {
        let dt = self.dt(slices.len());
        let mut h = self.h.clone();
        let mut psi = self.psi0.clone();
        for &om in slices {
            psi = self.slice_step(&mut h, om, dt, &psi, false);
        }
        psi
    }

    /// `J = |⟨r|ψ(t_end)⟩|²`.
    pub fn eta(&self, slices: &[C64]) -> f64 {
        let psi = self.final_state(slices);
        psi[self.target_index()].norm_sqr()
    }

    fn target_index(&self) -> usize {
        self.psi0.len() - 1
    }

    /// J and its gradient `∂J/∂Re Ω_k + i ∂J/∂Im Ω_k` (imaginary parts are
    /// left at zero unless `complex`).
    pub fn eta_and_gradient(&self, slices: &[C64], complex: bool) -> (f64, Vec<C64>) {
        let m = slices.len();
        let dt = self.dt(m);
        let d = self.dim();
        let (ie, ir) = (d - 2, d - 1);
        let mut h = self.h.clone();

        // Costates χ_k = U_{k+1}† ⋯ U_M† |r⟩, stored for k = 1..M.
        let mut chis = vec![Vec::new(); m];
        let mut chi = vec![ZERO; d];
        chi[ir] = C64::new(1.0, 0.0);
        for k in (0..m).rev() {
            let next = self.slice_step(&mut h, slices[k], dt, &chi, true);
            chis[k] = std::mem::replace(&mut chi, next);
        }

        // ∂H/∂Re Ω = |e⟩⟨r| + |r⟩⟨e|, ∂H/∂Im Ω = i|e⟩⟨r| − i|r⟩⟨e|, times −i dt.
        let e_re = move |x: &[C64], out: &mut [C64]| {
            out.fill(ZERO);
            out[ie] = -I * dt * x[ir];
            out[ir] = -I * dt * x[ie];
        };
        let e_im = move |x: &[C64], out: &mut [C64]| {
            out.fill(ZERO);
            out[ie] = x[ir] * dt;
            out[ir] = -x[ie] * dt;
        };
        let dirs_re: [&dyn Fn(&[C64], &mut [C64]); 1] = [&e_re];
        let dirs_both: [&dyn Fn(&[C64], &mut [C64]); 2] = [&e_re, &e_im];
        let dirs: &[&dyn Fn(&[C64], &mut [C64])] = if complex { &dirs_both } else { &dirs_re };

        let mut psi = self.psi0.clone();
        let mut d_amp = vec![(ZERO, ZERO); m];
        for k in 0..m {
            h.omega = slices[k];
            let norm = (h.norm_bound() + 1.0) * dt;
            let hh = &h;
            let (next, derivs) = expmv_with_derivatives(
                |x, out| {
                    hh.apply(x, out);
                    out.iter_mut().for_each(|o| *o *= -I * dt);
                },
                dirs,
                norm,
                &psi,
                self.tol,
            );
            let overlap = |v: &[C64]| chis[k].iter().zip(v).map(|(c, x)| c.conj() * x).sum::<C64>();
            d_amp[k].0 = overlap(&derivs[0]);
            if complex {
                d_amp[k].1 = overlap(&derivs[1]);
            }
            psi = next;
        }
        let amp = psi[ir];
        let grad = d_amp
            .iter()
            .map(|(dre, dim)| {
                C64::new(2.0 * (amp.conj() * dre).re, if complex { 2.0 * (amp.conj() * dim).re } else { 0.0 })
            })
            .collect();
        (amp.norm_sqr(), grad)
    }
}

/// Ω^X sampled at slice midpoints and clipped to `bound`, or the flat
/// fallback if Ω^X cannot be built or is not finite.
pub fn initial_guess(params: &SystemParams, env: &PhotonEnvelope, slices: usize, bound: f64) -> Vec<C64> {
    let (a, b) = (params.t_start, params.t_end);
    let dt = (b - a) / slices as f64;
    let fallback = vec![C64::new(mhz(FALLBACK_AMPLITUDE_MHZ), 0.0); slices];
    let Ok(x) = omega_x(params, env, params.delta_1) else {
        warn!("Omega^X unavailable; flat initial guess");
        return fallback;
    };
    let vals: Vec<C64> = (0..slices).map(|k| x.value(a + (k as f64 + 0.5) * dt)).collect();
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        warn!("Omega^X not finite on the window; flat initial guess");
        return fallback;
    }
    vals.into_iter()
        .map(|v| if v.norm() > bound { v * (bound / v.norm()) } else { v })
        .collect()
}

/// Doubles the slice count without changing the pulse.
pub fn refine(slices: &[C64]) -> Vec<C64> {
    slices.iter().flat_map(|&s| [s, s]).collect()
}

struct Controls {
    complex: bool,
    bound: f64,
    m: usize,
}

impl Controls {
    fn pack(&self, slices: &[C64]) -> Vec<f64> {
        let mut x: Vec<f64> = slices.iter().map(|z| z.re).collect();
        if self.complex {
            x.extend(slices.iter().map(|z| z.im));
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> Vec<C64> {
        (0..self.m)
            .map(|k| C64::new(x[k], if self.complex { x[self.m + k] } else { 0.0 }))
            .collect()
    }

    fn pack_grad(&self, g: &[C64]) -> Vec<f64> {
        self.pack(g)
    }

    fn project(&self, x: &mut [f64]) {
        let b = self.bound;
        if self.complex {
            for k in 0..self.m {
                let r = x[k].hypot(x[self.m + k]);
                if r > b {
                    x[k] *= b / r;
                    x[self.m + k] *= b / r;
                }
            }
        } else {
            x.iter_mut().for_each(|v| *v = v.clamp(-b, b));
        }
    }

    // Gradient with outward components at active bounds removed.
    fn projected_grad(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let b = self.bound * (1.0 - 1e-12);
        let mut pg = g.to_vec();
        if self.complex {
            for k in 0..self.m {
                let (re, im) = (x[k], x[self.m + k]);
                let r = re.hypot(im);
                if r >= b {
                    let radial = (re * g[k] + im * g[self.m + k]) / r;
                    if radial > 0.0 {
                        pg[k] -= radial * re / r;
                        pg[self.m + k] -= radial * im / r;
                    }
                }
            }
        } else {
            for (p, (&xv, &gv)) in pg.iter_mut().zip(x.iter().zip(g)) {
                if (xv >= b && gv > 0.0) || (xv <= -b && gv < 0.0) {
                    *p = 0.0;
                }
            }
        }
        pg
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// Two-loop recursion giving an ascent direction H·g from stored (s, y) pairs
// of the maximisation (y = change of ∇J, so s·y < 0 for a concave model).
fn lbfgs_direction(mem: &[(Vec<f64>, Vec<f64>)], g: &[f64]) -> Vec<f64> {
    // Work on f = −J: ∇f = −g, y_f = −y.
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y) in mem.iter().rev() {
        let yf: Vec<f64> = y.iter().map(|v| -v).collect();
        let rho = 1.0 / dot(&yf, s);
        let a = rho * dot(s, &q);
        q.iter_mut().zip(&yf).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push((a, rho, yf));
    }
    if let Some((s, y)) = mem.last() {
        let gamma = -dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, _), (a, rho, yf)) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(&yf, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    // Descent direction of f is −q; ascent of J likewise.
    q.iter().map(|v| -v).collect()
}

/// Maximises the lossless storage efficiency over `opts.slices` slice
/// amplitudes on `[params.t_start, params.t_end]`. `initial` overrides the
/// Ω^X guess and must have `opts.slices` entries.
pub fn optimize_storage(
    params: &SystemParams,
    env: &PhotonEnvelope,
    opts: &GrapeOptions,
    initial: Option<&[C64]>,
) -> Result<OptimizationReport> {
    if opts.slices < MIN_SLICES {
        return Err(Error::param("slices", format!("need at least {MIN_SLICES}")));
    }
    if !(opts.bound > 0.0) {
        return Err(Error::param("bound", "must be positive"));
    }
    let problem = StorageProblem::new(params, env, opts.expm_tol)?;
    let complex = opts.complex.unwrap_or(params.delta_1 != 0.0 || params.delta_2 != 0.0);
    let ctl = Controls {
        complex,
        bound: opts.bound,
        m: opts.slices,
    };
    let start = match initial {
        Some(s) if s.len() != opts.slices => {
            return Err(Error::param(
                "initial",
                format!("{} slices given, {} expected", s.len(), opts.slices),
            ))
        }
        Some(s) => s.to_vec(),
        None => initial_guess(params, env, opts.slices, opts.bound),
    };
    let mut x = ctl.pack(&start);
    ctl.project(&mut x);

    let mut evaluations = 1;
    let (mut j, g) = problem.eta_and_gradient(&ctl.unpack(&x), complex);
    let mut g = ctl.pack_grad(&g);
    let mut eta_history = vec![j];
    let mut grad_norms = vec![norm2(&ctl.projected_grad(&x, &g))];
    let mut mem: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if opts.target.is_some_and(|t| j >= t) {
            termination = Termination::TargetReached;
            break;
        }
        let k = opts.stall_iters;
        if k > 0 && eta_history.len() > k && j - eta_history[eta_history.len() - 1 - k] < opts.stall_tol {
            termination = Termination::Stalled;
            break;
        }
        let pg = ctl.projected_grad(&x, &g);
        if norm2(&pg) < opts.g_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut dir = if mem.is_empty() { pg.clone() } else { lbfgs_direction(&mem, &pg) };
        if dot(&dir, &pg) <= 0.0 {
            mem.clear();
            dir = pg.clone();
        }
        let mut alpha = if mem.is_empty() {
            // First or restarted step: move the largest slice by 10% of the bound.
            let gmax = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            0.1 * opts.bound / gmax
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            ctl.project(&mut xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let predicted = dot(&g, &step);
            if predicted > 0.0 {
                evaluations += 1;
                let jn = problem.eta(&ctl.unpack(&xn));
                if jn > j && jn >= j + 1e-4 * predicted {
                    accepted = Some((xn, step));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, step)) = accepted else {
            if !mem.is_empty() {
                debug!("line search failed along the quasi-Newton direction; restarting");
                mem.clear();
                continue;
            }
            termination = Termination::LineSearch;
            break;
        };
        evaluations += 1;
        let (jn, gn) = problem.eta_and_gradient(&ctl.unpack(&xn), complex);
        let gn = ctl.pack_grad(&gn);
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        // Curvature of −J along the step must be positive.
        if -dot(&step, &y) > 1e-12 * norm2(&step) * norm2(&y) {
            mem.push((step, y));
            if mem.len() > opts.memory {
                mem.remove(0);
            }
        }
        x = xn;
        j = jn;
        g = gn;
        iterations += 1;
        eta_history.push(j);
        grad_norms.push(norm2(&ctl.projected_grad(&x, &g)));
        debug!("grape iteration {iterations}: J = {j:.8}");
    }

    let slices = ctl.unpack(&x);
    let pulse = ControlPulse::piecewise(slices.clone(), params.t_start, params.t_end)?.with_label("opt");
    Ok(OptimizationReport {
        pulse,
        slices,
        eta_history,
        grad_norms,
        termination,
        iterations,
        evaluations,
    })
}

/// Full propagation of `pulse` with the (possibly lossy) `params`; returns
/// η(t2) and the record on `n_points` output times.
pub fn evaluate_with_losses(
    pulse: &ControlPulse,
    params: &SystemParams,
    env: &PhotonEnvelope,
    n_points: usize,
    opts: &PropagateOptions,
) -> Result<(f64, SimulationRecord)> {
    let (rec, _) = propagate_photon(env, params, pulse, n_points, opts)?;
    Ok((rec.final_eta(), rec))
}

/// Settings of a minimum-coherence-time search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcMinOptions {
    pub eta_target: f64,
    /// Window `±window_tc · Tc`.
    pub window_tc: f64,
    /// Mode band `±max(band_tc/Tc, band_kappa·κ)`.
    pub band_tc: f64,
    pub band_kappa: f64,
    /// Bisection steps in `ln Tc` after bracketing.
    pub bisection_steps: usize,
    pub grape: GrapeOptions,
}

impl Default for TcMinOptions {
    fn default() -> Self {
        Self {
            eta_target: 2.0 / 3.0,
            window_tc: 6.0,
            band_tc: 4.0,
            band_kappa: 0.3,
            bisection_steps: 6,
            grape: GrapeOptions {
                slices: 64,
                max_iters: 150,
                g_tol: 1e-7,
                stall_iters: 10,
                stall_tol: 1e-4,
                ..GrapeOptions::default()
            },
        }
    }
}

/// One row of the Tc^min table.
#[derive(Debug, Clone, PartialEq)]
pub struct TcMinPoint {
    pub g: f64,
    /// `None` when the target was not reached in the scan range.
    pub tc_min: Option<f64>,
    /// Optimised η at `tc_min` (or at the largest Tc tried).
    pub eta_achieved: f64,
    /// GRAPE iterations summed over all Tc evaluated for this g.
    pub iters: usize,
}

/// Lossless parameters of one (g, Tc) point of the search.
pub fn tcmin_params(base: &SystemParams, g: f64, tc: f64, opts: &TcMinOptions) -> Result<SystemParams> {
    let geo = Geometry::for_photon(tc, base.kappa, opts.window_tc)?
        .with_band((opts.band_tc / tc).max(opts.band_kappa * base.kappa));
    Ok(SystemParams {
        g,
        gamma: 0.0,
        kappa_loss: 0.0,
        ..*base
    }
    .with_geometry(geo))
}

/// Optimised lossless efficiency for one (g, Tc), optionally warm-started.
pub fn optimized_eta(
    base: &SystemParams,
    g: f64,
    tc: f64,
    opts: &TcMinOptions,
    warm: Option<&[C64]>,
) -> Result<OptimizationReport> {
    let p = tcmin_params(base, g, tc, opts)?;
    let env = PhotonEnvelope::sech_on_window(tc, p.t_start, p.t_end)?;
    let grape = GrapeOptions {
        target: Some(opts.eta_target),
        ..opts.grape
    };
    optimize_storage(&p, &env, &grape, warm)
}

/// Smallest Tc whose optimised lossless η reaches `opts.eta_target`, for one g.
/// The search starts at `0.15 (κ/g² + 1/κ)`, brackets by factors of two and
/// bisects in `ln Tc`. Optimisations are warm-started from the nearest pulse
/// already found, which is valid because the slices scale with the window.
pub fn min_coherence_time_at(g: f64, base: &SystemParams, opts: &TcMinOptions) -> Result<TcMinPoint> {
    if !(opts.eta_target > 0.0 && opts.eta_target < 1.0) {
        return Err(Error::param("eta_target", "must lie in (0, 1)"));
    }
    if !(g > 0.0) {
        return Err(Error::param("g", "must be positive"));
    }
    let kappa = base.kappa;
    let mut iters = 0;
    let mut eval = |tc: f64, warm: Option<&[C64]>| -> Result<OptimizationReport> {
        let rep = optimized_eta(base, g, tc, opts, warm)?;
        iters += rep.iterations;
        debug!("tcmin g = {g:.4}: Tc = {tc:.5} -> eta = {:.5}", rep.final_eta());
        Ok(rep)
    };
    let guess = 0.15 * (kappa / (g * g) + 1.0 / kappa);
    let first = eval(guess, None)?;
    let target = opts.eta_target;
    let (mut lo, mut hi, mut lo_rep, mut hi_rep);
    if first.final_eta() >= target {
        hi = guess;
        hi_rep = first;
        lo = guess;
        lo_rep = None;
        for _ in 0..12 {
            lo = hi / 2.0;
            let r = eval(lo, Some(&hi_rep.slices))?;
            if r.final_eta() >= target {
                hi = lo;
                hi_rep = r;
            } else {
                lo_rep = Some(r);
                break;
            }
        }
        if lo_rep.is_none() {
            return Ok(TcMinPoint {
                g,
                tc_min: Some(hi),
                eta_achieved: hi_rep.final_eta(),
                iters,
            });
        }
    } else {
        lo = guess;
        lo_rep = Some(first);
        let mut found = None;
        hi = guess;
        for _ in 0..12 {
            hi = lo * 2.0;
            let warm = lo_rep.as_ref().map(|r| r.slices.clone());
            let r = eval(hi, warm.as_deref())?;
            if r.final_eta() >= target {
                found = Some(r);
                break;
            }
            lo = hi;
            lo_rep = Some(r);
        }
        match found {
            Some(r) => hi_rep = r,
            None => {
                return Ok(TcMinPoint {
                    g,
                    tc_min: None,
                    eta_achieved: lo_rep.map_or(f64::NAN, |r| r.final_eta()),
                    iters,
                })
            }
        }
    }
    for _ in 0..opts.bisection_steps {
        let mid = (lo * hi).sqrt();
        let r = eval(mid, Some(&hi_rep.slices))?;
        if r.final_eta() >= target {
            hi = mid;
            hi_rep = r;
        } else {
            lo = mid;
        }
    }
    Ok(TcMinPoint {
        g,
        tc_min: Some(hi),
        eta_achieved: hi_rep.final_eta(),
        iters,
    })
}

/// Tc^min for every g; points are independent and run in parallel when the
/// `parallel` feature is enabled. Results keep the order of `g_values`.
pub fn min_coherence_time(g_values: &[f64], base: &SystemParams, opts: &TcMinOptions) -> Vec<Result<TcMinPoint>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        g_values.par_iter().map(|&g| min_coherence_time_at(g, base, opts)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        g_values.iter().map(|&g| min_coherence_time_at(g, base, opts)).collect()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fit of `f1(g) = a κ/g²` to the bad-cavity points and `f2(g) = a′/κ` to
/// the good-cavity points (least squares in log space). Returns `(a, a′)`.
pub fn fit_two_regimes(kappa: f64, bad: &[(f64, f64)], good: &[(f64, f64)]) -> (f64, f64) {
    let geo_mean = |v: &mut dyn Iterator<Item = f64>| {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x.ln(), n + 1));
        (s / n as f64).exp()
    };
    let a = geo_mean(&mut bad.iter().map(|&(g, tc)| tc * g * g / kappa));
    let a2 = geo_mean(&mut good.iter().map(|&(_, tc)| tc * kappa));
    (a, a2)
}
