//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, solvers and estimators.
///
/// Numeric payloads are reported as `f64` regardless of the scalar type
/// the computation ran in.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error(
        "state distribution left the probability simplex at t-index {t_index}, cell {cell} \
         (deviation {deviation:.3e}); reduce the time step"
    )]
    SimplexViolation {
        t_index: usize,
        cell: usize,
        deviation: f64,
    },

    #[error("non-finite value during integration at t-index {t_index}, cell {cell}")]
    NonFinite { t_index: usize, cell: usize },

    #[error(
        "rate minimizer did not converge after {iterations} iterations \
         (projected-gradient residual {residual:.3e}, last iterate {last:?})"
    )]
    ArgminNoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("empirical measure of a single player is undefined (N = 1)")]
    SinglePlayer,

    #[error("player index {index} out of range for {n} players")]
    PlayerIndexOutOfRange { index: usize, n: usize },

    #[error("position atlas is empty")]
    EmptyAtlas,

    #[error("kernel value {value} at grid point ({i}, {j}) is outside [0, 1]")]
    KernelOutOfRange { i: usize, j: usize, value: f64 },

    #[error("matrix size {n} exceeds the exact-enumeration limit {max}; use the heuristic")]
    MatrixTooLarge { n: usize, max: usize },

    #[error(
        "smoothing denominator {value:.3e} at position {position} is below 1e-14; \
         the smoothing kernel must be strictly positive"
    )]
    SmoothingDenominator { position: f64, value: f64 },

    #[error(
        "the exact deviation value is only defined for two-body or zero interactions; \
         use the plug-in mode"
    )]
    NonlinearExactMode,

    #[error("local interactions need a cell-density view; got raw atoms without an atlas")]
    LocalNeedsAtlas,
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
