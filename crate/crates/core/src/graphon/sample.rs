//! Kernel discretization and Bernoulli sampling of random adjacency
//! matrices from a kernel.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graphon::norms::{cut_norm_exact, cut_norm_heuristic, EXACT_LIMIT};
use crate::graphon::{KernelMatrix, NormEstimate};
use crate::rng::stream;
use crate::scalar::Real;

/// Evaluates the kernel on the grid `(i/n, j/n)`, `i, j = 1..=n`.
pub fn discretize_kernel<T, K>(kernel: K, n: usize) -> Result<KernelMatrix<T>>
where
    T: Real,
    K: Fn(T, T) -> T,
{
    let nf = T::from_usize(n).unwrap();
    let mut entries = Vec::with_capacity(n * n);
    for i in 1..=n {
        let u = T::from_usize(i).unwrap() / nf;
        for j in 1..=n {
            let v = T::from_usize(j).unwrap() / nf;
            entries.push(kernel(u, v));
        }
    }
    KernelMatrix::new(n, entries)
}

/// Draws the random adjacency matrix with independent entries
/// `Bernoulli(K(i/n, j/n))`; deterministic given the seed.
pub fn sample_bernoulli_graph<T, K>(kernel: K, n: usize, seed: u64) -> Result<KernelMatrix<T>>
where
    T: Real,
    K: Fn(T, T) -> T,
{
    let nf = T::from_usize(n).unwrap();
    let mut rng = stream(seed, &[0x67_72_61_70_68_6f_6e]);
    let mut entries = Vec::with_capacity(n * n);
    for i in 1..=n {
        let u = T::from_usize(i).unwrap() / nf;
        for j in 1..=n {
            let v = T::from_usize(j).unwrap() / nf;
            let p = kernel(u, v);
            if !(p >= T::zero() && p <= T::one()) {
                return Err(Error::KernelOutOfRange {
                    i,
                    j,
                    value: p.as_f64(),
                });
            }
            let draw: f64 = rng.random();
            entries.push(if T::of(draw) < p { T::one() } else { T::zero() });
        }
    }
    KernelMatrix::new(n, entries)
}

/// Approximates the cut distance between the step extension at resolution
/// `n` and the kernel itself by re-discretizing both at resolution
/// `factor * n` and comparing the step matrices.
pub fn discretization_error<T, K>(
    kernel: K,
    n: usize,
    factor: usize,
    restarts: usize,
    seed: u64,
) -> Result<NormEstimate<T>>
where
    T: Real,
    K: Fn(T, T) -> T,
{
    if factor == 0 {
        return Err(Error::InvalidInput("refinement factor must be >= 1".into()));
    }
    let coarse = discretize_kernel(&kernel, n)?;
    let fine_n = factor * n;
    let fine = discretize_kernel(&kernel, fine_n)?;
    // Blow the coarse step kernel up to the fine grid: fine cell i sits in
    // coarse cell ceil(i / factor).
    let mut blown = Vec::with_capacity(fine_n * fine_n);
    for i in 1..=fine_n {
        let ci = i.div_ceil(factor) - 1;
        for j in 1..=fine_n {
            let cj = j.div_ceil(factor) - 1;
            blown.push(coarse.get(ci, cj));
        }
    }
    let diff = KernelMatrix::new(fine_n, blown)?.sub(&fine)?;
    if fine_n <= EXACT_LIMIT {
        cut_norm_exact(&diff)
    } else {
        cut_norm_heuristic(&diff, restarts, seed)
    }
}
