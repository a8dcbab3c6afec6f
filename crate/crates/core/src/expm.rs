//! Action of a matrix exponential on a vector by scaled truncated Taylor
//! series, with Fréchet derivatives from the block-triangular augmentation
//! `exp([[A, E], [0, A]]) = [[e^A, L(A, E)], [0, e^A]]`.
//!
//! Only matrix–vector products are needed, so the arrowhead Hamiltonians of
//! the propagator are exponentiated in O(N) per product.

use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
// Largest norm of one Taylor sub-step.
const THETA: f64 = 1.0;
const MAX_TERMS: usize = 60;

fn norm1(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Number of Taylor sub-steps for an operator of norm at most `norm`.
pub fn substeps(norm: f64) -> usize {
    ((norm / THETA).ceil() as usize).max(1)
}

/// `exp(A) v`, where `apply(x, out)` writes `A x` and `norm ≥ ‖A‖₂`.
/// Each of the `⌈‖A‖⌉` sub-steps sums Taylor terms until two consecutive terms
/// fall below `tol` relative to the partial sum.
pub fn expmv<F>(mut apply: F, norm: f64, v: &[C64], tol: f64) -> Vec<C64>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let s = substeps(norm);
    let inv_s = 1.0 / s as f64;
    let n = v.len();
    let mut acc = v.to_vec();
    let mut term = vec![ZERO; n];
    let mut next = vec![ZERO; n];
    for _ in 0..s {
        term.copy_from_slice(&acc);
        let mut prev_small = false;
        for k in 1..=MAX_TERMS {
            apply(&term, &mut next);
            let f = inv_s / k as f64;
            for (t, x) in term.iter_mut().zip(&next) {
                *t = x * f;
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            let small = norm1(&term) <= tol * norm1(&acc);
            if small && prev_small {
                break;
            }
            prev_small = small;
        }
    }
    acc
}

/// `exp(A) v` together with the Fréchet derivatives `L(A, E_j) v` for every
/// direction in `dirs` (each writes `E_j x`). `norm` must bound
/// `‖A‖₂ + max_j ‖E_j‖₂`.
pub fn expmv_with_derivatives<F>(
    mut apply: F,
    dirs: &[&dyn Fn(&[C64], &mut [C64])],
    norm: f64,
    v: &[C64],
    tol: f64,
) -> (Vec<C64>, Vec<Vec<C64>>)
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = v.len();
    let m = dirs.len();
    // Layout: [derivative blocks…, base block].
    let mut x = vec![ZERO; n * (m + 1)];
    x[m * n..].copy_from_slice(v);
    let mut scratch = vec![ZERO; n];
    let out = expmv(
        |y, out| {
            let base = &y[m * n..];
            apply(base, &mut out[m * n..]);
            for (j, dir) in dirs.iter().enumerate() {
                let blk = &mut out[j * n..(j + 1) * n];
                apply(&y[j * n..(j + 1) * n], blk);
                dir(base, &mut scratch);
                for (o, s) in blk.iter_mut().zip(&scratch) {
                    *o += s;
                }
            }
        },
        norm,
        &x,
        tol,
    );
    let derivs = (0..m).map(|j| out[j * n..(j + 1) * n].to_vec()).collect();
    (out[m * n..].to_vec(), derivs)
}
