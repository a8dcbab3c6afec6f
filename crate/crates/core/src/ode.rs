//! Adaptive Dormand–Prince 5(4) integration of complex linear-algebra ODEs.

use crate::{Error, Result, C64};

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[C64], &mut [C64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        (self.1)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step; `None` lets the controller decide.
    pub h_max: Option<f64>,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            h_max: None,
            h_init: None,
            max_steps: 5_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-2,
            ..Self::default()
        }
    }
}

/// Counters of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Differences between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Work {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
}

/// Integrates from `times[0]` through every entry of `times` (which must be
/// non-decreasing), calling `observe(i, t_i, y)` at each one. Steps never
/// cross an entry of `breakpoints`, so discontinuities of the right-hand side
/// placed there are resolved exactly.
pub fn integrate<S, O>(
    system: &S,
    y0: &[C64],
    times: &[f64],
    breakpoints: &[f64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<OdeStats>
where
    S: OdeSystem + ?Sized,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = system.dim();
    if y0.len() != n {
        return Err(Error::param("y0", format!("length {} != dimension {n}", y0.len())));
    }
    if times.is_empty() {
        return Ok(OdeStats::default());
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::param("times", "output grid must be non-decreasing"));
    }
    let mut stops: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > times[0] && b < times[times.len() - 1])
        .collect();
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let mut next_stop = 0;

    let zero = C64::new(0.0, 0.0);
    let mut w = Work {
        k: std::array::from_fn(|_| vec![zero; n]),
        tmp: vec![zero; n],
        y_new: vec![zero; n],
    };
    let mut y = y0.to_vec();
    let mut t = times[0];
    let mut stats = OdeStats::default();
    observe(0, t, &y)?;

    let span = times[times.len() - 1] - times[0];
    let mut h = opts.h_init.unwrap_or(0.0);
    system.rhs(t, &y, &mut w.k[0]);
    let mut fsal_valid = true;
    if !(h > 0.0) {
        h = initial_step(system, t, &y, &w.k[0], opts, span);
    }
    let mut err_prev: f64 = 1e-4;

    for (i, &t_out) in times.iter().enumerate().skip(1) {
        while t < t_out {
            while next_stop < stops.len() && stops[next_stop] <= t {
                next_stop += 1;
            }
            let at_stop = next_stop < stops.len() && stops[next_stop] <= t_out;
            let target = if at_stop { stops[next_stop] } else { t_out };
            if let Some(hm) = opts.h_max {
                h = h.min(hm);
            }
            let remaining = target - t;
            let mut hit = false;
            let mut h_try = h;
            if h_try >= remaining * (1.0 - 1e-12) {
                h_try = remaining;
                hit = true;
            } else if h_try > 0.5 * remaining {
                // Split the remainder evenly rather than leave a sliver.
                h_try = 0.5 * remaining;
            }
            if h_try < 1e-14 * t.abs().max(span).max(1e-300) {
                if hit && remaining <= 1e-13 * t.abs().max(1.0) {
                    t = target;
                    continue;
                }
                return Err(Error::StepSizeUnderflow { t, h: h_try });
            }
            if !fsal_valid {
                system.rhs(t, &y, &mut w.k[0]);
                fsal_valid = true;
            }
            // Final stages of a step that ends on a breakpoint see the
            // left-hand limit of the right-hand side.
            let t_last = if hit && at_stop {
                target - 4.0 * f64::EPSILON * target.abs().max(h_try)
            } else {
                t + h_try
            };
            let err = step(system, t, h_try, t_last, &y, &mut w, opts);
            if !err.is_finite() {
                h = 0.2 * h_try;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if hit { target } else { t + h_try };
                std::mem::swap(&mut y, &mut w.y_new);
                w.k.swap(0, 6);
                if hit && at_stop {
                    fsal_valid = false;
                }
                // PI controller (Hairer's constants for DOPRI5).
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                let fac = fac.clamp(0.2, 10.0);
                err_prev = err.max(1e-4);
                let h_new = h_try * fac;
                h = if hit { h.max(h_new) } else { h_new };
            } else {
                stats.rejected += 1;
                let fac = (0.9 * err.powf(-0.2)).max(0.2);
                h = h_try * fac;
            }
            if stats.accepted + stats.rejected > opts.max_steps {
                return Err(Error::TooManySteps {
                    t,
                    steps: opts.max_steps,
                });
            }
        }
        observe(i, t, &y)?;
    }
    Ok(stats)
}

fn initial_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[C64],
    f0: &[C64],
    opts: &OdeOptions,
    span: f64,
) -> f64 {
    let scale = |v: &C64| opts.atol + opts.rtol * v.norm();
    let rms = |a: &[C64]| {
        (a.iter()
            .zip(y)
            .map(|(x, yi)| (x.norm() / scale(yi)).powi(2))
            .sum::<f64>()
            / a.len().max(1) as f64)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span.max(1e-12)
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
    system.rhs(t + h0, &y1, &mut f1);
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.max(1e-12))
}

// One DOPRI5 step from (t, y) with step h; k[0] must hold f(t, y). Returns the
// scaled error norm; the candidate is left in `w.y_new` and f(t+h, y_new) in
// `w.k[6]`.
fn step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    h: f64,
    t_last: f64,
    y: &[C64],
    w: &mut Work,
    opts: &OdeOptions,
) -> f64 {
    let n = y.len();
    let Work { k, tmp, y_new } = w;
    for i in 0..n {
        tmp[i] = y[i] + k[0][i] * (h * A21);
    }
    system.rhs(t + C2 * h, tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A31 + k[1][i] * A32) * h;
    }
    system.rhs(t + C3 * h, tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A41 + k[1][i] * A42 + k[2][i] * A43) * h;
    }
    system.rhs(t + C4 * h, tmp, &mut k[3]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A51 + k[1][i] * A52 + k[2][i] * A53 + k[3][i] * A54) * h;
    }
    system.rhs(t + C5 * h, tmp, &mut k[4]);
    for i in 0..n {
        tmp[i] = y[i]
            + (k[0][i] * A61 + k[1][i] * A62 + k[2][i] * A63 + k[3][i] * A64 + k[4][i] * A65) * h;
    }
    system.rhs(t_last, tmp, &mut k[5]);
    for i in 0..n {
        y_new[i] = y[i]
            + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
    }
    system.rhs(t_last, y_new, &mut k[6]);
    let mut acc = 0.0;
    for i in 0..n {
        let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6
            + k[6][i] * E7)
            * h;
        let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
        acc += (e.norm() / sc).powi(2);
    }
    (acc / n as f64).sqrt()
}
