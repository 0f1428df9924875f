//! Step kernels on the unit square, Bernoulli kernel sampling, and
//! cut-norm / infinity-to-one norm estimation.

mod norms;
mod sample;

pub use norms::{cut_norm_exact, cut_norm_heuristic, infty_to_one_norm, NormMethod, EXACT_LIMIT};
pub use sample::{discretization_error, discretize_kernel, sample_bernoulli_graph};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// An `n x n` matrix interpreted as the step kernel constant on the cells
/// `((i-1)/n, i/n] x ((j-1)/n, j/n]` of `[0, 1]^2` (1-based `i`, `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn new(n: usize, entries: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("kernel matrix must be nonempty".into()));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "{} entries do not fill an {n} x {n} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("kernel matrix entry not finite".into()));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let entries: Vec<T> = rows.into_iter().flatten().collect();
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Step-function evaluation at a point of `[0, 1]^2`: the cell
    /// `((i-1)/n, i/n]` owns `u`, with `u = 0` assigned to the first cell.
    pub fn eval_step(&self, u: T, v: T) -> T {
        self.get(self.cell_index(u), self.cell_index(v))
    }

    fn cell_index(&self, u: T) -> usize {
        let n = T::from_usize(self.n).unwrap();
        let idx = (u * n).ceil().to_usize().unwrap_or(0);
        idx.clamp(1, self.n) - 1
    }

    /// Entrywise difference; sizes must match.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::GridMismatch(format!(
                "kernel matrices of size {} and {}",
                self.n, other.n
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self { n: self.n, entries })
    }
}

/// Result of a norm computation, with the witness that attains (or best
/// approximates) the supremum so callers can re-verify the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate<T> {
    pub value: T,
    pub method: NormMethod,
    pub witness: Witness,
}

/// Witness of the extremal rectangle or sign pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Row and column subsets (0-based indices) of the extremal rectangle.
    Rectangle { rows: Vec<usize>, cols: Vec<usize> },
    /// Row and column sign vectors with entries in `{-1, +1}`.
    Signs { rows: Vec<i8>, cols: Vec<i8> },
}
