//! Randomised invariants of the propagator, the pulse library and the
//! optimiser.

use photon_memory::grape::{evaluate_with_losses, optimize_storage, refine, GrapeOptions, StorageProblem};
use photon_memory::io_oracle::retrieval_ode;
use photon_memory::model::{mhz, Geometry, PhotonEnvelope};
use photon_memory::numeric::linspace;
use photon_memory::propagator::{propagate_photon, PropagateOptions};
use photon_memory::pulses::{
    cooperativity, eta_max, omega_d, omega_f, omega_g, omega_x, omega_x_retr, phase_to_detuning, ControlPulse,
};
use photon_memory::{SystemParams, C64};
use proptest::prelude::*;

fn lossy(tc: f64, kappa_loss: f64, gamma: f64, n_modes: usize) -> (SystemParams, PhotonEnvelope) {
    let base = SystemParams {
        kappa_loss,
        gamma,
        ..SystemParams::paper()
    };
    let geo = Geometry::for_photon(tc, base.kappa, 6.0).unwrap().with_modes(n_modes);
    let p = base.with_geometry(geo);
    let env = PhotonEnvelope::sech_on_window(tc, p.t_start, p.t_end).unwrap();
    (p, env)
}

fn lossless_problem(n_modes: usize) -> (SystemParams, PhotonEnvelope) {
    let (p, env) = lossy(0.05, 0.0, 0.0, n_modes);
    (p.lossless(), env)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn probability_is_conserved(
        kl_mhz in 0.0..2.0f64,
        gamma_mhz in 0.5..6.0f64,
        tc in 0.2..2.0f64,
        which in 0usize..3,
    ) {
        let (p, env) = lossy(tc, mhz(kl_mhz), mhz(gamma_mhz), 61);
        let pulse = match which {
            0 => omega_x(&p, &env, 0.0),
            1 => omega_g(&p, &env, 0.0),
            _ => omega_f(&p, &env, None),
        }
        .unwrap();
        let rec = propagate_photon(&env, &p, &pulse, 300, &PropagateOptions::with_tol(1e-9)).unwrap().0;
        prop_assert!(rec.max_closure_error() <= 1e-6, "{}", rec.max_closure_error());
    }

    #[test]
    fn time_reversal_is_an_involution(pivot in -3.0..3.0f64, delta_mhz in -3.0..3.0f64) {
        let (p, env) = lossy(0.5, mhz(0.33), SystemParams::paper().gamma, 61);
        let pulse = omega_g(&p, &env, mhz(delta_mhz)).unwrap();
        let back = pulse.time_reversed(pivot).time_reversed(pivot);
        let envb = env.time_reversed_conjugate(pivot).time_reversed_conjugate(pivot);
        for t in linspace(p.t_start, p.t_end, 301) {
            prop_assert!((back.value(t) - pulse.value(t)).norm() <= 1e-12);
            prop_assert!((envb.amplitude(t) - env.amplitude(t)).norm() <= 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(
        re in prop::collection::vec(0.0..150.0f64, 8),
        im in prop::collection::vec(-50.0..50.0f64, 8),
    ) {
        let (p, env) = lossless_problem(11);
        let prob = StorageProblem::new(&p, &env, 1e-15).unwrap();
        let slices: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        let (_, grad) = prob.eta_and_gradient(&slices, true);
        let h = 1e-4;
        for k in 0..slices.len() {
            for (dir, an) in [(C64::new(h, 0.0), grad[k].re), (C64::new(0.0, h), grad[k].im)] {
                let mut up = slices.clone();
                let mut dn = slices.clone();
                up[k] += dir;
                dn[k] -= dir;
                let fd = (prob.eta(&up) - prob.eta(&dn)) / (2.0 * h);
                prop_assert!((fd - an).abs() <= 1e-6 + 1e-4 * fd.abs(), "slice {k}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn refinement_preserves_efficiency(re in prop::collection::vec(0.0..150.0f64, 8)) {
        let (p, env) = lossless_problem(11);
        let prob = StorageProblem::new(&p, &env, 1e-15).unwrap();
        let slices: Vec<C64> = re.iter().map(|&a| C64::new(a, 0.0)).collect();
        let a = prob.eta(&slices);
        let b = prob.eta(&refine(&slices));
        prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn decay_identity_holds_along_retrieval(delta_mhz in -5.0..5.0f64, tc in 0.3..3.0f64) {
        let (p, env) = lossy(tc, mhz(0.33), SystemParams::paper().gamma, 61);
        let p = SystemParams { delta_1: mhz(delta_mhz), ..p };
        let target = env.shifted(-p.t_start).scaled(C64::new(0.8, 0.0));
        let pulse = omega_x_retr(&p, &target, p.delta_1).unwrap();
        let tol = 1e-9;
        let ret = retrieval_ode(&p, &pulse, &linspace(0.0, target.t_end(), 801), tol).unwrap();
        prop_assert!(ret.decay_identity_residual < tol, "{:e}", ret.decay_identity_residual);
    }

    #[test]
    fn f_and_d_pulses_coincide_without_spontaneous_emission(
        g_mhz in 1.0..10.0f64,
        kappa_mhz in 1.0..5.0f64,
        margin in 0.05..5.0f64,
    ) {
        let p = SystemParams {
            g: mhz(g_mhz),
            kappa: mhz(kappa_mhz),
            gamma: 0.0,
            ..SystemParams::paper()
        };
        let expo = PhotonEnvelope::exponential(p.kappa, -0.2, 0.0).unwrap();
        // Smallest admissible ρ0 keeps the radicand positive at t1.
        let rho0 = expo.amplitude(-0.2).norm_sqr() / (2.0 * p.kappa) * (1.0 + margin);
        let d = omega_d(&p, &expo, rho0).unwrap();
        let f = omega_f(&p, &expo, Some(2.0 * p.kappa * rho0)).unwrap();
        for t in linspace(-0.2, 0.0, 201) {
            let rel = (d.value(t) - f.value(t)).norm() / f.value(t).norm();
            prop_assert!(rel < 1e-8, "t = {t}: {rel:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn phase_and_detuning_gauges_agree(delta_mhz in -4.0..4.0f64) {
        prop_assume!(delta_mhz.abs() > 0.1);
        let (p, env) = lossy(0.5, mhz(0.33), SystemParams::paper().gamma, 61);
        let p = SystemParams { delta_1: mhz(delta_mhz), ..p };
        let cplx = omega_g(&p, &env, p.delta_1).unwrap();
        let gauge = phase_to_detuning(&cplx).unwrap();
        let opts = PropagateOptions::with_tol(1e-10);
        let a = propagate_photon(&env, &p, &cplx, 400, &opts).unwrap().0;
        let b = propagate_photon(&env, &p, &gauge.magnitude, 400, &opts).unwrap().0;
        for i in 0..a.len() {
            prop_assert!((a.rho_rr[i] - b.rho_rr[i]).abs() < 1e-4);
            prop_assert!((a.rho_ee[i] - b.rho_ee[i]).abs() < 1e-4);
        }
    }
}

#[test]
fn warm_started_refinement_never_loses_efficiency() {
    let (p, env) = lossless_problem(21);
    let coarse = GrapeOptions {
        slices: 16,
        max_iters: 30,
        ..GrapeOptions::default()
    };
    let first = optimize_storage(&p, &env, &coarse, None).unwrap();
    let slices = refine(first.pulse.slices().unwrap());
    let fine = GrapeOptions {
        slices: 32,
        max_iters: 30,
        ..GrapeOptions::default()
    };
    let second = optimize_storage(&p, &env, &fine, Some(&slices)).unwrap();
    assert!(
        second.final_eta() >= first.final_eta() - 1e-9,
        "{} < {}",
        second.final_eta(),
        first.final_eta()
    );
    for w in second.eta_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "non-monotone history");
    }
}

#[test]
fn optimized_pulse_respects_bound_once_losses_return() {
    let (lossy_p, env) = lossy(0.05, 0.0, SystemParams::paper().gamma, 21);
    let opts = GrapeOptions {
        slices: 32,
        max_iters: 60,
        ..GrapeOptions::default()
    };
    let report = optimize_storage(&lossy_p.lossless(), &env, &opts, None).unwrap();
    let (eta, _) =
        evaluate_with_losses(&report.pulse, &lossy_p, &env, 200, &PropagateOptions::with_tol(1e-9)).unwrap();
    let bound = eta_max(cooperativity(&lossy_p).unwrap());
    assert!(eta <= bound + 1e-3, "{eta} exceeds {bound}");
}

#[test]
fn zero_pulse_stores_nothing() {
    let (p, env) = lossy(0.5, mhz(0.33), SystemParams::paper().gamma, 61);
    let zero = ControlPulse::zero(p.t_start, p.t_end).unwrap();
    let rec = propagate_photon(&env, &p, &zero, 100, &PropagateOptions::default()).unwrap().0;
    assert!(rec.final_eta() < 1e-12);
}
