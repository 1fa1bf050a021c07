//! Dense solves for the small normal-equation systems of the fitters.

use crate::real::Real;

/// Solves `a · x = b` in place by Gaussian elimination with partial
/// pivoting; `a` is row-major `n × n`, the solution lands in `b`.
/// Returns `false` when the matrix is numerically singular.
pub fn solve_in_place<F: Real>(a: &mut [F], b: &mut [F], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = a[col * n + col].abs();
        for row in col + 1..n {
            let mag = a[row * n + col].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag == F::zero() || !pivot_mag.is_finite() {
            return false;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor == F::zero() {
                continue;
            }
            for k in col..n {
                let upper = a[col * n + k];
                a[row * n + k] = a[row * n + k] - factor * upper;
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc = acc - a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
        if !b[col].is_finite() {
            return false;
        }
    }
    true
}
