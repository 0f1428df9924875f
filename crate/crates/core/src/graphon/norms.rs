//! Cut norm and infinity-to-one norm of step kernels.
//!
//! Both norms are suprema of a bilinear form over products of convex sets,
//! attained on extreme points: indicator vectors for the cut norm, sign
//! vectors for the infinity-to-one norm. Exact computation enumerates one
//! side (the other side is then optimal coordinatewise) and is gated at
//! `n <= 14`; beyond that an alternating-maximization heuristic reports a
//! certified lower bound together with its witness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::{KernelMatrix, NormEstimate, Witness};
use crate::rng::stream;
use crate::scalar::Real;

/// Largest matrix size the exact enumerations accept.
pub const EXACT_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Exact,
    Heuristic,
}

/// Fresh (non-incremental) evaluation of `|sum_{i in S, j in T} D_ij| / n^2`.
fn rectangle_value<T: Real>(m: &KernelMatrix<T>, rows: &[usize], cols: &[usize]) -> T {
    let mut acc = T::zero();
    for &i in rows {
        let row = m.row(i);
        for &j in cols {
            acc = acc + row[j];
        }
    }
    let n = T::from_usize(m.n()).unwrap();
    acc.abs() / (n * n)
}

/// Fresh evaluation of `|sum_ij D_ij s_i t_j| / n^2` for sign vectors.
fn signs_value<T: Real>(m: &KernelMatrix<T>, rows: &[i8], cols: &[i8]) -> T {
    let mut acc = T::zero();
    for i in 0..m.n() {
        let si = T::of(rows[i] as f64);
        let row = m.row(i);
        for j in 0..m.n() {
            acc = acc + si * T::of(cols[j] as f64) * row[j];
        }
    }
    let n = T::from_usize(m.n()).unwrap();
    acc.abs() / (n * n)
}

/// Exact cut norm `max_{S, T} |sum_{S x T} D| / n^2`.
///
/// Row subsets are enumerated in Gray-code order with incremental column
/// sums; for a fixed row set the optimal column set keeps one sign. The
/// reported value is recomputed from the winning witness with a clean
/// summation so round-off from the incremental scan cannot leak into it.
pub fn cut_norm_exact<T: Real>(m: &KernelMatrix<T>) -> Result<NormEstimate<T>> {
    let n = m.n();
    if n > EXACT_LIMIT {
        return Err(Error::MatrixTooLarge { n, max: EXACT_LIMIT });
    }
    let mut col_sums = vec![T::zero(); n];
    let mut in_set = vec![false; n];
    let mut best_mask: u64 = 0;
    let mut best_positive = true;
    let mut best = T::zero();

    for k in 1u64..(1u64 << n) {
        let flip = k.trailing_zeros() as usize;
        let row = m.row(flip);
        if in_set[flip] {
            for j in 0..n {
                col_sums[j] = col_sums[j] - row[j];
            }
        } else {
            for j in 0..n {
                col_sums[j] = col_sums[j] + row[j];
            }
        }
        in_set[flip] = !in_set[flip];

        let mut pos = T::zero();
        let mut neg = T::zero();
        for &c in &col_sums {
            if c > T::zero() {
                pos = pos + c;
            } else {
                neg = neg - c;
            }
        }
        let (cand, positive) = if pos >= neg { (pos, true) } else { (neg, false) };
        if cand > best {
            best = cand;
            best_positive = positive;
            best_mask = in_set
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| if b { acc | (1 << i) } else { acc });
        }
    }

    let rows: Vec<usize> = (0..n).filter(|&i| best_mask & (1 << i) != 0).collect();
    // Rebuild the optimal column set for the winning rows from scratch.
    let mut cols = Vec::new();
    for j in 0..n {
        let mut c = T::zero();
        for &i in &rows {
            c = c + m.get(i, j);
        }
        if (best_positive && c > T::zero()) || (!best_positive && c < T::zero()) {
            cols.push(j);
        }
    }
    let value = rectangle_value(m, &rows, &cols);
    Ok(NormEstimate {
        value,
        method: NormMethod::Exact,
        witness: Witness::Rectangle { rows, cols },
    })
}

/// Alternating maximization of `|sum_{S x T} D|` from an initial column
/// set: the optimal row set for the columns (keep one sign of the row
/// sums), then the optimal column set for those rows, until a fixed point.
fn alternate_rectangle<T: Real>(m: &KernelMatrix<T>, mut cols: Vec<bool>) -> (Vec<usize>, Vec<usize>) {
    let n = m.n();
    let mut rows = vec![false; n];
    let mut last: Option<(Vec<bool>, Vec<bool>)> = None;
    for _ in 0..200 {
        let mut row_sums = vec![T::zero(); n];
        for (i, rs) in row_sums.iter_mut().enumerate() {
            let row = m.row(i);
            for j in 0..n {
                if cols[j] {
                    *rs = *rs + row[j];
                }
            }
        }
        let pos: T = row_sums.iter().filter(|&&v| v > T::zero()).copied().sum();
        let neg: T = row_sums.iter().filter(|&&v| v < T::zero()).copied().sum();
        let keep_positive = pos >= -neg;
        for i in 0..n {
            rows[i] = if keep_positive {
                row_sums[i] > T::zero()
            } else {
                row_sums[i] < T::zero()
            };
        }

        let mut col_sums = vec![T::zero(); n];
        for i in 0..n {
            if rows[i] {
                let row = m.row(i);
                for (j, cs) in col_sums.iter_mut().enumerate() {
                    *cs = *cs + row[j];
                }
            }
        }
        let pos: T = col_sums.iter().filter(|&&v| v > T::zero()).copied().sum();
        let neg: T = col_sums.iter().filter(|&&v| v < T::zero()).copied().sum();
        let keep_positive = pos >= -neg;
        for j in 0..n {
            cols[j] = if keep_positive {
                col_sums[j] > T::zero()
            } else {
                col_sums[j] < T::zero()
            };
        }

        let state = (rows.clone(), cols.clone());
        if last.as_ref() == Some(&state) {
            break;
        }
        last = Some(state);
    }
    (
        (0..n).filter(|&i| rows[i]).collect(),
        (0..n).filter(|&j| cols[j]).collect(),
    )
}

/// One restart: alternating maximization from a random column set, plus
/// from the two column sets carved out of a sign-pattern run (a sign
/// vector is a difference of two indicators, so its positive and negative
/// parts seed good rectangle basins). Best candidate wins.
fn cut_norm_restart<T: Real>(m: &KernelMatrix<T>, seed: u64, restart: u64) -> (Vec<usize>, Vec<usize>) {
    let n = m.n();
    let mut rng = stream(seed, &[0x6375_746e, restart]);
    let random_cols: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
    let (_, sign_cols) = signs_restart(m, seed, restart);
    let plus: Vec<bool> = sign_cols.iter().map(|&s| s > 0).collect();
    let minus: Vec<bool> = sign_cols.iter().map(|&s| s < 0).collect();

    let mut best_value = T::neg_infinity();
    let mut best = (Vec::new(), Vec::new());
    for start in [random_cols, plus, minus] {
        let (rows, cols) = alternate_rectangle(m, start);
        let v = rectangle_value(m, &rows, &cols);
        if v > best_value {
            best_value = v;
            best = (rows, cols);
        }
    }
    best
}

/// Cut-norm lower bound by alternating maximization over rectangles, best
/// of `restarts` random initializations (restarts run in parallel on
/// independent derived streams, nested so a larger budget extends a
/// smaller one).
pub fn cut_norm_heuristic<T: Real>(
    m: &KernelMatrix<T>,
    restarts: usize,
    seed: u64,
) -> Result<NormEstimate<T>> {
    if restarts == 0 {
        return Err(Error::InvalidInput("restarts must be >= 1".into()));
    }
    let candidates: Vec<(Vec<usize>, Vec<usize>)> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| cut_norm_restart(m, seed, r))
        .collect();
    let mut best_value = T::zero();
    let mut best_witness = (Vec::new(), Vec::new());
    for (rows, cols) in candidates {
        let v = rectangle_value(m, &rows, &cols);
        if v > best_value {
            best_value = v;
            best_witness = (rows, cols);
        }
    }
    Ok(NormEstimate {
        value: best_value,
        method: NormMethod::Heuristic,
        witness: Witness::Rectangle {
            rows: best_witness.0,
            cols: best_witness.1,
        },
    })
}

fn signs_restart<T: Real>(m: &KernelMatrix<T>, seed: u64, restart: u64) -> (Vec<i8>, Vec<i8>) {
    let n = m.n();
    let mut rng = stream(seed, &[0x6931_6e6f, restart]);
    let mut cols: Vec<i8> = (0..n)
        .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { -1 })
        .collect();
    let mut rows = vec![1i8; n];
    let mut last: Option<(Vec<i8>, Vec<i8>)> = None;
    for _ in 0..200 {
        for i in 0..n {
            let row = m.row(i);
            let mut s = T::zero();
            for j in 0..n {
                s = s + T::of(cols[j] as f64) * row[j];
            }
            rows[i] = if s >= T::zero() { 1 } else { -1 };
        }
        for j in 0..n {
            let mut s = T::zero();
            for i in 0..n {
                s = s + T::of(rows[i] as f64) * m.get(i, j);
            }
            cols[j] = if s >= T::zero() { 1 } else { -1 };
        }
        let state = (rows.clone(), cols.clone());
        if last.as_ref() == Some(&state) {
            break;
        }
        last = Some(state);
    }
    (rows, cols)
}

/// Infinity-to-one norm `max_{s, t in {-1, 1}^n} sum_ij D_ij s_i t_j / n^2`.
///
/// Exact mode enumerates row signs in Gray-code order (column signs are
/// then coordinatewise optimal); heuristic mode alternates sign updates
/// from random starts, exactly like the cut-norm heuristic.
pub fn infty_to_one_norm<T: Real>(
    m: &KernelMatrix<T>,
    method: NormMethod,
    restarts: usize,
    seed: u64,
) -> Result<NormEstimate<T>> {
    let n = m.n();
    match method {
        NormMethod::Heuristic => {
            if restarts == 0 {
                return Err(Error::InvalidInput("restarts must be >= 1".into()));
            }
            let candidates: Vec<(Vec<i8>, Vec<i8>)> = (0..restarts as u64)
                .into_par_iter()
                .map(|r| signs_restart(m, seed, r))
                .collect();
            let mut best_value = T::zero();
            let mut best = (vec![1i8; n], vec![1i8; n]);
            for (rows, cols) in candidates {
                let v = signs_value(m, &rows, &cols);
                if v > best_value {
                    best_value = v;
                    best = (rows, cols);
                }
            }
            Ok(NormEstimate {
                value: best_value,
                method: NormMethod::Heuristic,
                witness: Witness::Signs {
                    rows: best.0,
                    cols: best.1,
                },
            })
        }
        NormMethod::Exact => {
            if n > EXACT_LIMIT {
                return Err(Error::MatrixTooLarge { n, max: EXACT_LIMIT });
            }
            // Column sums under the current row signs; start from all +1.
            let mut col_sums = vec![T::zero(); n];
            for i in 0..n {
                let row = m.row(i);
                for j in 0..n {
                    col_sums[j] = col_sums[j] + row[j];
                }
            }
            let mut signs = vec![1i8; n];
            let value_of = |col_sums: &[T]| -> T {
                col_sums.iter().fold(T::zero(), |acc, &c| acc + c.abs())
            };
            let mut best = value_of(&col_sums);
            let mut best_signs = signs.clone();
            for k in 1u64..(1u64 << n) {
                let flip = k.trailing_zeros() as usize;
                let row = m.row(flip);
                let two = T::of(2.0);
                let old = T::of(signs[flip] as f64);
                for j in 0..n {
                    col_sums[j] = col_sums[j] - two * old * row[j];
                }
                signs[flip] = -signs[flip];
                let v = value_of(&col_sums);
                if v > best {
                    best = v;
                    best_signs = signs.clone();
                }
            }
            // Optimal column signs for the winning rows, then a clean
            // evaluation of the witness.
            let mut cols = vec![1i8; n];
            for j in 0..n {
                let mut s = T::zero();
                for i in 0..n {
                    s = s + T::of(best_signs[i] as f64) * m.get(i, j);
                }
                cols[j] = if s >= T::zero() { 1 } else { -1 };
            }
            let value = signs_value(m, &best_signs, &cols);
            Ok(NormEstimate {
                value,
                method: NormMethod::Exact,
                witness: Witness::Signs {
                    rows: best_signs,
                    cols,
                },
            })
        }
    }
}
