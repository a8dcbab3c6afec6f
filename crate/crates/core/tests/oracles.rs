//! Cross-checks of the full-mode propagator against independent
//! calculations: dense matrix exponentials, the input–output equations and
//! the closed-form retrieval output.

mod common;

use std::time::Instant;

use common::{scenario, store};
use nalgebra::DMatrix;
use photon_memory::expm::{expmv, expmv_with_derivatives};
use photon_memory::grape::StorageProblem;
use photon_memory::io_oracle::{
    analytic_output, analytic_output_norm, node_chain, retrieval_cavity_ode, retrieval_ode, storage_eliminated,
    storage_ode, ChainOptions,
};
use photon_memory::model::{mhz, mirror_field, Geometry, PhotonEnvelope};
use photon_memory::numeric::{linspace, simpson};
use photon_memory::propagator::{
    build_hamiltonian, propagate, propagate_photon, ArrowheadHamiltonian, PropagateOptions, QuantumState,
};
use photon_memory::pulses::{cooperativity, eta_max, eta_prime_max, omega_x, omega_x_retr, ControlPulse};
use photon_memory::{SystemParams, C64};

const LOSS: f64 = 0.33;
const I: C64 = C64 { re: 0.0, im: 1.0 };

fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

// Relative L2 distance after removing the best global phase.
fn rel_l2_up_to_phase(a: &[C64], b: &[C64]) -> f64 {
    let overlap: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = C64::from_polar(1.0, overlap.arg());
    let rotated: Vec<C64> = a.iter().map(|x| x * phase).collect();
    rel_l2(&rotated, b)
}

fn dense(h: &ArrowheadHamiltonian, factor: C64) -> DMatrix<C64> {
    let rows = h.to_dense();
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j] * factor)
}

fn small_hamiltonian() -> (SystemParams, ArrowheadHamiltonian) {
    let geo = Geometry::for_photon(0.05, SystemParams::paper().kappa, 6.0).unwrap().with_modes(11);
    let p = SystemParams::paper().lossless().with_geometry(geo);
    let pulse = ControlPulse::constant(C64::new(35.0, -12.0), p.t_start, p.t_end).unwrap();
    let h = build_hamiltonian(&p, &pulse, 0.0);
    (p, h)
}

#[test]
fn expmv_matches_dense_exponential() {
    let (_, h) = small_hamiltonian();
    let d = h.dim();
    let v: Vec<C64> = (0..d).map(|k| C64::new((k as f64).sin(), (0.3 * k as f64).cos())).collect();
    for dt in [1e-3, 0.02, 0.1] {
        let f = -I * dt;
        let got = expmv(
            |x, out| {
                h.apply(x, out);
                out.iter_mut().for_each(|o| *o *= f);
            },
            h.norm_bound() * dt,
            &v,
            1e-15,
        );
        let want = dense(&h, f).exp() * nalgebra::DVector::from_vec(v.clone());
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "dt = {dt}: {err:e}");
    }
}

#[test]
fn frechet_derivative_matches_block_exponential() {
    let (_, h) = small_hamiltonian();
    let d = h.dim();
    let dt = 0.03;
    let f = -I * dt;
    // Direction: derivative of −iH dt with respect to Re Ω (couples e and r).
    let (ie, ir) = (d - 2, d - 1);
    let dir = move |x: &[C64], out: &mut [C64]| {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        out[ie] = f * x[ir];
        out[ir] = f * x[ie];
    };
    let v: Vec<C64> = (0..d).map(|k| C64::new(1.0 / (1.0 + k as f64), 0.2)).collect();
    let (val, ders) = expmv_with_derivatives(
        |x, out| {
            h.apply(x, out);
            out.iter_mut().for_each(|o| *o *= f);
        },
        &[&dir],
        (h.norm_bound() + 1.0) * dt,
        &v,
        1e-15,
    );

    let a = dense(&h, f);
    let mut e = DMatrix::<C64>::zeros(d, d);
    e[(ie, ir)] = f;
    e[(ir, ie)] = f;
    let mut block = DMatrix::<C64>::zeros(2 * d, 2 * d);
    block.view_mut((0, 0), (d, d)).copy_from(&a);
    block.view_mut((d, d), (d, d)).copy_from(&a);
    block.view_mut((0, d), (d, d)).copy_from(&e);
    let big = block.exp();
    let vv = nalgebra::DVector::from_vec(v);
    let want_val = big.view((0, 0), (d, d)) * &vv;
    let want_der = big.view((0, d), (d, d)) * &vv;
    let e1 = val.iter().zip(want_val.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let e2 = ders[0].iter().zip(want_der.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(e1 < 1e-12, "value {e1:e}");
    assert!(e2 < 1e-12, "derivative {e2:e}");
}

#[test]
fn grape_slices_match_ode_propagation() {
    let geo = Geometry::for_photon(0.05, SystemParams::paper().kappa, 6.0).unwrap().with_modes(21);
    let p = SystemParams::paper().lossless().with_geometry(geo);
    let env = PhotonEnvelope::sech_on_window(0.05, p.t_start, p.t_end).unwrap();
    let prob = StorageProblem::new(&p, &env, 1e-14).unwrap();
    let slices: Vec<C64> = (0..16)
        .map(|k| C64::new(50.0 + 30.0 * (0.9 * k as f64).sin(), 10.0 * (0.4 * k as f64).cos()))
        .collect();
    let psi = prob.final_state(&slices);

    let pulse = ControlPulse::piecewise(slices, p.t_start, p.t_end).unwrap();
    let s0 = QuantumState::photon(&env, &p).unwrap();
    let (_, last) = propagate(&s0, &p, &pulse, &[p.t_start, p.t_end], &PropagateOptions::with_tol(1e-12)).unwrap();
    let err = psi.iter().zip(&last.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-7, "{err:e}");
}

#[test]
fn storage_efficiency_matches_input_output_model() {
    let (p, env) = scenario(0.5, mhz(LOSS));
    let x = omega_x(&p, &env, 0.0).unwrap();
    let full = store(&p, &env, &x).final_eta();
    let io = storage_ode(&p, &env, &x, &linspace(p.t_start, p.t_end, 2001), 1e-10).unwrap().eta;
    assert!((full - io).abs() / io < 0.01, "full {full} vs input-output {io}");
}

#[test]
fn cavity_elimination_converges_for_slow_photons() {
    let mut prev = f64::INFINITY;
    for tc in [0.5, 2.0, 20.0] {
        let (p, env) = scenario(tc, mhz(LOSS));
        let x = omega_x(&p, &env, 0.0).unwrap();
        let grid = linspace(p.t_start, p.t_end, 2001);
        let cav = storage_ode(&p, &env, &x, &grid, 1e-10).unwrap().eta;
        let elim = storage_eliminated(&p, &env, &x, &grid, 1e-10).unwrap().eta;
        let gap = (cav - elim).abs();
        assert!(gap < prev, "Tc = {tc}: {gap:e} did not shrink");
        prev = gap;

        let target = env.shifted(-p.t_start).scaled(C64::new(eta_prime_max(&p).unwrap().sqrt(), 0.0));
        let retr = omega_x_retr(&p, &target, 0.0).unwrap();
        let g2 = linspace(0.0, target.t_end(), 2001);
        let a = retrieval_cavity_ode(&p, &retr, &g2, 1e-10).unwrap();
        let b = retrieval_ode(&p, &retr, &g2, 1e-10).unwrap();
        if tc >= 20.0 {
            assert!(gap < 1e-4, "storage gap {gap:e}");
            let d = rel_l2(&a.trajectory.e_out, &b.trajectory.e_out);
            assert!(d < 2e-3, "retrieval output {d:e}");
        }
    }
}

#[test]
fn retrieval_pulse_reproduces_requested_envelope() {
    for tc in [2.0, 20.0] {
        let (p, env) = scenario(tc, mhz(LOSS));
        let eta_p = eta_prime_max(&p).unwrap();
        let target = env.shifted(-p.t_start).scaled(C64::new(eta_p.sqrt(), 0.0));
        let retr = omega_x_retr(&p, &target, 0.0).unwrap();
        let grid = linspace(0.0, target.t_end(), 2001);
        let out = retrieval_ode(&p, &retr, &grid, 1e-10).unwrap();
        let want: Vec<C64> = grid.iter().map(|&t| target.amplitude(t)).collect();
        let d = rel_l2_up_to_phase(&out.trajectory.e_out, &want);
        assert!(d < 1e-2, "Tc = {tc}: shape {d:e}");
        assert!((out.efficiency - eta_p).abs() < 1e-3, "Tc = {tc}: {}", out.efficiency);
        assert!(out.emptied);
    }
}

#[test]
fn analytic_output_matches_retrieval_for_slow_pulses() {
    let (p, env) = scenario(20.0, mhz(LOSS));
    let target = env.shifted(-p.t_start).scaled(C64::new(eta_prime_max(&p).unwrap().sqrt(), 0.0));
    let retr = omega_x_retr(&p, &target, 0.0).unwrap();
    let grid = linspace(0.0, target.t_end(), 4001);
    let ode = retrieval_ode(&p, &retr, &grid, 1e-10).unwrap();
    let closed = analytic_output(&p, &retr, &grid).unwrap();
    let d = rel_l2(&closed, &ode.trajectory.e_out);
    assert!(d < 0.02, "{d:e}");
}

#[test]
fn analytic_output_norm_identity() {
    for delta in [0.0, mhz(3.0)] {
        let (p, env) = scenario(1.0, mhz(LOSS));
        let p = SystemParams { delta_1: delta, ..p };
        let target = env.shifted(-p.t_start).scaled(C64::new(0.5, 0.0));
        let retr = omega_x_retr(&p, &target, delta).unwrap();
        let t_end = target.t_end();
        let n = 20001;
        let grid = linspace(0.0, t_end, n);
        let field = analytic_output(&p, &retr, &grid).unwrap();
        let dens: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
        let lhs = simpson(&dens, t_end / (n - 1) as f64);
        let rhs = *analytic_output_norm(&p, &retr, &grid).unwrap().last().unwrap();
        assert!((lhs - rhs).abs() < 1e-6, "Δ = {delta}: {lhs} vs {rhs}");
    }
}

#[test]
fn two_node_chain_reaches_cooperativity_bound() {
    let (p, env) = scenario(0.5, 0.0);
    let bound = eta_max(cooperativity(&p).unwrap());
    let opts = ChainOptions {
        n_nodes: 2,
        ..ChainOptions::default()
    };
    let hops = node_chain(&p, &env, &opts).unwrap();
    assert_eq!(hops.len(), 2);
    for h in &hops {
        assert!((h.eta - bound).abs() < 0.01, "node {}: {} vs {bound}", h.node, h.eta);
    }
}

#[test]
fn free_propagation_reconstructs_reflected_field() {
    let tc = 0.5;
    let mut errs = Vec::new();
    for n in [51, 101, 211] {
        let base = SystemParams {
            g: 0.0,
            ..SystemParams::paper()
        };
        let geo = Geometry::for_photon(tc, base.kappa, 6.0).unwrap().with_modes(n);
        let p = base.with_geometry(geo);
        let env = PhotonEnvelope::sech_on_window(tc, p.t_start, p.t_end).unwrap();
        let zero = ControlPulse::zero(p.t_start, p.t_end).unwrap();
        let (_, last) = propagate_photon(&env, &p, &zero, 10, &PropagateOptions::with_tol(1e-10)).unwrap();
        let grid = linspace(p.t_start, p.t_end, 1201);
        let rebuilt: Vec<C64> = mirror_field(last.modes(), p.t_end, &p, &grid).into_iter().map(|z| -z).collect();
        let io = storage_ode(&p, &env, &zero, &grid, 1e-11).unwrap();
        errs.push(rel_l2(&rebuilt, &io.trajectory.e_out));
    }
    assert!(errs[2] < 0.03, "{errs:?}");
    assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "no first-order convergence: {errs:?}");
}

#[test]
fn full_mode_retrieval_matches_cavity_model() {
    let (p, env) = scenario(0.5, mhz(LOSS));
    let target = env.clone().scaled(C64::new(eta_prime_max(&p).unwrap().sqrt(), 0.0));
    let retr = omega_x_retr(&p, &target, 0.0).unwrap();
    let grid = linspace(p.t_start, p.t_end, 1201);
    let io = retrieval_cavity_ode(&p, &retr, &grid, 1e-10).unwrap();
    let s0 = QuantumState::target_atom(&p, p.t_start);
    let (rec, last) = propagate(&s0, &p, &retr, &grid, &PropagateOptions::with_tol(1e-10)).unwrap();
    let rebuilt: Vec<C64> = mirror_field(last.modes(), p.t_end, &p, &grid).into_iter().map(|z| -z).collect();
    let d = rel_l2(&rebuilt, &io.trajectory.e_out);
    assert!(d < 0.01, "{d:e}");
    let line = *rec.p_r.last().unwrap();
    assert!((line - io.efficiency).abs() < 1e-3, "{line} vs {}", io.efficiency);
}

#[test]
fn halving_tolerance_changes_efficiency_less_than_tolerance() {
    let (p, env) = scenario(0.5, mhz(LOSS));
    let x = omega_x(&p, &env, 0.0).unwrap();
    for tol in [1e-7, 1e-8, 1e-9] {
        let a = propagate_photon(&env, &p, &x, 200, &PropagateOptions::with_tol(tol)).unwrap().0.final_eta();
        let b = propagate_photon(&env, &p, &x, 200, &PropagateOptions::with_tol(tol / 2.0)).unwrap().0.final_eta();
        assert!((a - b).abs() < tol, "tol {tol:e}: {:e}", (a - b).abs());
    }
}

#[test]
fn hamiltonian_product_scales_linearly() {
    let time = |n: usize| {
        let p = SystemParams::paper().with_geometry(Geometry::for_photon(0.5, SystemParams::paper().kappa, 6.0).unwrap().with_modes(n));
        let h = build_hamiltonian(&p, &ControlPulse::constant(C64::new(1.0, 0.0), p.t_start, p.t_end).unwrap(), 0.0);
        let v = vec![C64::new(1.0, 0.5); h.dim()];
        let mut out = vec![C64::new(0.0, 0.0); h.dim()];
        let reps = 2_000_000 / n;
        let start = Instant::now();
        for _ in 0..reps {
            h.apply(&v, &mut out);
            std::hint::black_box(&out);
        }
        start.elapsed().as_secs_f64() / reps as f64
    };
    time(1001);
    let small = time(1001);
    let large = time(100_001);
    // Quadratic cost would give a ratio near 10⁴.
    assert!(large / small < 400.0, "ratio {}", large / small);
}
