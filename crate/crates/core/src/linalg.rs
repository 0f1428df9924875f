//! Small dense linear solves (the state spaces here have a handful of
//! states, so Gaussian elimination with partial pivoting is plenty).

use crate::scalar::Real;

/// Solves `mat * x = rhs` in place; `mat` is row-major `n x n` and is
/// destroyed. Returns `None` on (numerical) singularity.
pub(crate) fn solve_dense<T: Real>(mat: &mut [T], mut rhs: Vec<T>) -> Option<Vec<T>> {
    let n = rhs.len();
    debug_assert_eq!(mat.len(), n * n);
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if mat[row * n + col].abs() > mat[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if mat[pivot * n + col].abs() < T::of(1e-300) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                mat.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let diag = mat[col * n + col];
        for row in (col + 1)..n {
            let factor = mat[row * n + col] / diag;
            if factor != T::zero() {
                for k in col..n {
                    let v = mat[col * n + k];
                    mat[row * n + k] = mat[row * n + k] - factor * v;
                }
                rhs[row] = rhs[row] - factor * rhs[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in (col + 1)..n {
            acc = acc - mat[col * n + k] * rhs[k];
        }
        rhs[col] = acc / mat[col * n + col];
    }
    Some(rhs)
}
