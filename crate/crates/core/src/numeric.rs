//! Small quadrature, differentiation and interpolation helpers shared by the
//! envelope, pulse and oracle code.

use crate::C64;

/// Composite Simpson rule over uniformly spaced samples. `values.len()` must be
/// odd and at least 3; an even count falls back to Simpson plus a trapezoid on
/// the last interval.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dt * (values[0] + values[1]),
        _ if n % 2 == 0 => {
            simpson(&values[..n - 1], dt) + 0.5 * dt * (values[n - 2] + values[n - 1])
        }
        _ => {
            let mut acc = values[0] + values[n - 1];
            for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * dt / 3.0
        }
    }
}

/// Simpson weights for `n` (odd) uniformly spaced samples.
pub fn simpson_weights(n: usize, dt: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "simpson_weights needs an odd count >= 3");
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * dt / 3.0
        })
        .collect()
}

/// Fourth-order finite-difference derivative of uniformly sampled data,
/// one-sided stencils at the boundaries.
pub fn derivative4(values: &[C64], dt: f64) -> Vec<C64> {
    let n = values.len();
    if n < 5 {
        // Too few points for the 5-point stencils: plain differences.
        return (0..n)
            .map(|i| {
                if n < 2 {
                    C64::new(0.0, 0.0)
                } else if i == 0 {
                    (values[1] - values[0]) / dt
                } else if i == n - 1 {
                    (values[n - 1] - values[n - 2]) / dt
                } else {
                    (values[i + 1] - values[i - 1]) / (2.0 * dt)
                }
            })
            .collect();
    }
    let f = values;
    let h12 = 12.0 * dt;
    let mut d = vec![C64::new(0.0, 0.0); n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / h12;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / h12;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / h12;
    }
    d[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / h12;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        / h12;
    d
}

/// Cubic Hermite interpolation on a uniform grid given node values and node
/// derivatives. Returns `(value, derivative)`; outside the grid returns zero.
pub fn hermite(t0: f64, dt: f64, values: &[C64], slopes: &[C64], t: f64) -> (C64, C64) {
    let n = values.len();
    let zero = C64::new(0.0, 0.0);
    if n == 0 {
        return (zero, zero);
    }
    let x = (t - t0) / dt;
    let last = (n - 1) as f64;
    if !(-1e-9..=last + 1e-9).contains(&x) {
        return (zero, zero);
    }
    if n == 1 {
        return (values[0], zero);
    }
    let i = (x.floor() as usize).min(n - 2);
    let s = (x - i as f64).clamp(0.0, 1.0);
    let (p0, p1) = (values[i], values[i + 1]);
    let (m0, m1) = (slopes[i] * dt, slopes[i + 1] * dt);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    let deriv = (p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11) / dt;
    (value, deriv)
}

/// Linear interpolation on a uniform grid, clamped at the ends.
pub fn linear(t0: f64, dt: f64, values: &[f64], t: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let x = (t - t0) / dt;
    if x <= 0.0 {
        return values[0];
    }
    if x >= (n - 1) as f64 {
        return values[n - 1];
    }
    let i = x.floor() as usize;
    let s = x - i as f64;
    values[i] * (1.0 - s) + values[i + 1] * s
}

/// Three-point Gauss–Legendre nodes and weights on [0, 1].
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Uniform grid with `n` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let dt = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + dt * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let dt = 0.1;
        let v: Vec<f64> = (0..11).map(|i| (i as f64 * dt).powi(3)).collect();
        assert!((simpson(&v, dt) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn derivative4_on_polynomial() {
        let dt = 0.05;
        let v: Vec<C64> = (0..40)
            .map(|i| {
                let t = i as f64 * dt;
                C64::new(t.powi(4), -t * t)
            })
            .collect();
        let d = derivative4(&v, dt);
        for (i, di) in d.iter().enumerate() {
            let t = i as f64 * dt;
            assert!((di.re - 4.0 * t.powi(3)).abs() < 1e-10, "{i}");
            assert!((di.im + 2.0 * t).abs() < 1e-10);
        }
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let dt = 0.3;
        let f = |t: f64| C64::new(t * t * t - t, 2.0 * t);
        let df = |t: f64| C64::new(3.0 * t * t - 1.0, 2.0);
        let vals: Vec<C64> = (0..6).map(|i| f(i as f64 * dt)).collect();
        let slopes: Vec<C64> = (0..6).map(|i| df(i as f64 * dt)).collect();
        let (v, d) = hermite(0.0, dt, &vals, &slopes, 0.77);
        assert!((v - f(0.77)).norm() < 1e-12);
        assert!((d - df(0.77)).norm() < 1e-12);
        assert_eq!(hermite(0.0, dt, &vals, &slopes, 5.0).0, C64::new(0.0, 0.0));
    }
}
