#![allow(dead_code)]

use std::io::Write;

use photon_memory::model::{Geometry, PhotonEnvelope};
use photon_memory::propagator::{propagate_photon, PropagateOptions};
use photon_memory::pulses::ControlPulse;
use photon_memory::{SimulationRecord, SystemParams};

pub const POINTS: usize = 2000;

/// Paper rates with the given loss, window ±6 Tc, L = max(12 Tc, 15/κ), 211 modes.
pub fn scenario(tc: f64, kappa_loss: f64) -> (SystemParams, PhotonEnvelope) {
    let base = SystemParams::paper();
    let geo = Geometry::for_photon(tc, base.kappa, 6.0).unwrap();
    let p = SystemParams { kappa_loss, ..base }.with_geometry(geo);
    let env = PhotonEnvelope::sech_on_window(tc, p.t_start, p.t_end).unwrap();
    (p, env)
}

pub fn store(p: &SystemParams, env: &PhotonEnvelope, pulse: &ControlPulse) -> SimulationRecord {
    propagate_photon(env, p, pulse, POINTS, &PropagateOptions::with_tol(1e-9)).unwrap().0
}

/// Writes straight to the process stdout so the line shows up even when the
/// test harness captures `println!`.
pub fn report(line: &str) {
    let out = std::io::stdout();
    let mut lock = out.lock();
    let _ = writeln!(lock, "{line}");
    let _ = lock.flush();
}

pub fn verdict(criterion: u32, pass: bool, detail: &str) {
    report(&format!(
        "criterion {criterion}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    ));
}
