//! Browser bindings: storage bounds, analytic control pulses and a full
//! storage simulation for one set of rates.
//!
//! Rates are passed in units of 2π MHz and times in μs, like the command-line
//! configuration. The plain functions (`*_impl`) carry the logic and are what
//! the native tests call; the exported wrappers only turn errors into
//! JavaScript exceptions.

use photon_memory::model::{mhz, Geometry, PhotonEnvelope};
use photon_memory::propagator::{propagate_photon, PropagateOptions};
use photon_memory::pulses::{
    default_c1, omega_d, omega_f, omega_g, omega_x, ControlPulse, EfficiencyBounds, DEFAULT_RHO0,
};
use photon_memory::SystemParams;
use wasm_bindgen::prelude::*;

/// Atom–cavity rates in 2π MHz.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub kappa_loss: f64,
}

#[wasm_bindgen]
impl Rates {
    #[wasm_bindgen(constructor)]
    pub fn new(g: f64, kappa: f64, gamma: f64, kappa_loss: f64) -> Rates {
        Rates {
            g,
            kappa,
            gamma,
            kappa_loss,
        }
    }

    /// (g, κ, γ) = (4.9, 2.42, 3.03) × 2π MHz without parasitic losses.
    pub fn reference() -> Rates {
        Rates::new(4.9, 2.42, 3.03, 0.0)
    }
}

impl Rates {
    fn params(&self, tc: f64, n_modes: usize) -> Result<(SystemParams, PhotonEnvelope), String> {
        let kappa = mhz(self.kappa);
        let geo = Geometry::for_photon(tc, kappa, 6.0)
            .map_err(|e| e.to_string())?
            .with_modes(n_modes);
        let p = SystemParams {
            g: mhz(self.g),
            kappa,
            gamma: mhz(self.gamma),
            kappa_loss: mhz(self.kappa_loss),
            ..SystemParams::paper()
        }
        .with_geometry(geo);
        p.validate().map_err(|e| e.to_string())?;
        let env = PhotonEnvelope::sech_on_window(tc, p.t_start, p.t_end).map_err(|e| e.to_string())?;
        Ok((p, env))
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub cooperativity: f64,
    pub cooperativity_loss: f64,
    pub eta_max: f64,
    pub eta_prime_max: f64,
}

pub fn bounds_impl(r: &Rates) -> Result<Bounds, String> {
    let (p, _) = r.params(0.5, 3)?;
    let b = EfficiencyBounds::new(&p).map_err(|e| e.to_string())?;
    Ok(Bounds {
        cooperativity: b.c,
        cooperativity_loss: b.c_prime,
        eta_max: b.eta_max,
        eta_prime_max: b.eta_prime_max,
    })
}

/// Closed-form storage bounds C/(1+C) and η′_max.
#[wasm_bindgen]
pub fn bounds(r: &Rates) -> Result<Bounds, JsError> {
    bounds_impl(r).map_err(|e| JsError::new(&e))
}

fn pulse_for(kind: &str, p: &SystemParams, env: &PhotonEnvelope) -> Result<ControlPulse, String> {
    let pulse = match kind {
        "X" => omega_x(p, env, 0.0),
        "G" => omega_g(p, env, 0.0),
        "F" => default_c1(p, env, DEFAULT_RHO0).and_then(|c1| omega_f(p, env, Some(c1))),
        "D" => omega_d(p, env, DEFAULT_RHO0),
        other => return Err(format!("unknown pulse `{other}` (use X, G, F or D)")),
    };
    pulse.map_err(|e| e.to_string())
}

/// Sampled curve: times and one or more series on the same grid.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct Curve {
    times: Vec<f64>,
    series: Vec<(String, Vec<f64>)>,
    final_eta: f64,
}

#[wasm_bindgen]
impl Curve {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// Names of the series, comma separated.
    pub fn names(&self) -> String {
        self.series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(",")
    }

    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.clone())
    }

    /// η(t2) of a storage run (NaN for pulse curves).
    #[wasm_bindgen(getter)]
    pub fn final_eta(&self) -> f64 {
        self.final_eta
    }
}

pub fn pulse_shape_impl(kind: &str, r: &Rates, tc: f64, points: usize) -> Result<Curve, String> {
    let (p, env) = r.params(tc, 3)?;
    let pulse = pulse_for(kind, &p, &env)?;
    // Cell midpoints: the adiabatic pulses diverge like 1/sqrt(t − t1) at t1.
    let n = points.max(2);
    let h = (p.t_end - p.t_start) / n as f64;
    let times: Vec<f64> = (0..n).map(|i| p.t_start + (i as f64 + 0.5) * h).collect();
    let vals = pulse.sample(&times);
    Ok(Curve {
        series: vec![
            ("omega_abs_mhz".into(), vals.iter().map(|v| v.norm() / mhz(1.0)).collect()),
            ("envelope_abs".into(), times.iter().map(|&t| env.amplitude(t).norm()).collect()),
        ],
        times,
        final_eta: f64::NAN,
    })
}

/// |Ω(t)| of an analytic pulse (2π MHz) and |E_in(t)| for a sech photon of
/// coherence time `tc` on a ±6 Tc window.
#[wasm_bindgen]
pub fn pulse_shape(kind: &str, r: &Rates, tc: f64, points: usize) -> Result<Curve, JsError> {
    pulse_shape_impl(kind, r, tc, points).map_err(|e| JsError::new(&e))
}

pub fn simulate_impl(kind: &str, r: &Rates, tc: f64, n_modes: usize, points: usize) -> Result<Curve, String> {
    let (p, env) = r.params(tc, n_modes)?;
    let pulse = pulse_for(kind, &p, &env)?;
    let (rec, _) =
        propagate_photon(&env, &p, &pulse, points.max(2), &PropagateOptions::with_tol(1e-8)).map_err(|e| e.to_string())?;
    let eta = rec.final_eta();
    Ok(Curve {
        times: rec.times,
        series: vec![
            ("eta".into(), rec.eta),
            ("line".into(), rec.p_r),
            ("target".into(), rec.rho_rr),
            ("excited".into(), rec.rho_ee),
            ("cavity".into(), rec.rho_aa),
            ("spontaneous".into(), rec.p_s),
            ("cavity_loss".into(), rec.p_loss),
        ],
        final_eta: eta,
    })
}

/// Full transmission-line storage run: populations against time.
#[wasm_bindgen]
pub fn simulate(kind: &str, r: &Rates, tc: f64, n_modes: usize, points: usize) -> Result<Curve, JsError> {
    simulate_impl(kind, r, tc, n_modes, points).map_err(|e| JsError::new(&e))
}
