use photon_memory_wasm::{bounds_impl, pulse_shape_impl, simulate_impl, Rates};

#[test]
fn reference_bounds() {
    let b = bounds_impl(&Rates::reference()).unwrap();
    assert!((b.cooperativity - 3.2744).abs() < 1e-3);
    assert!((b.eta_max - 0.76605).abs() < 1e-4);
    let lossy = Rates::new(4.9, 2.42, 3.03, 0.33);
    assert!((bounds_impl(&lossy).unwrap().eta_prime_max - 0.65328).abs() < 1e-4);
}

#[test]
fn pulse_curves_are_finite() {
    for kind in ["X", "G", "F", "D"] {
        let c = pulse_shape_impl(kind, &Rates::reference(), 0.5, 400).unwrap();
        let om = c.series("omega_abs_mhz").unwrap();
        assert_eq!(om.len(), 400);
        assert!(om.iter().all(|v| v.is_finite()), "{kind}");
        assert_eq!(c.names(), "omega_abs_mhz,envelope_abs");
    }
    assert!(pulse_shape_impl("Q", &Rates::reference(), 0.5, 10).is_err());
}

#[test]
fn storage_run_reaches_the_bound() {
    let c = simulate_impl("G", &Rates::reference(), 0.5, 211, 300).unwrap();
    assert!((c.final_eta() - 0.77).abs() < 0.01, "{}", c.final_eta());
    assert_eq!(c.times().len(), 300);
    assert!(simulate_impl("X", &Rates::reference(), 0.5, 200, 10).is_err());
}
