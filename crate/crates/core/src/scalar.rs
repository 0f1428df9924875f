//! Generic scalar abstraction for the numerical core.
//!
//! Everything in this crate that does arithmetic is generic over [`Real`],
//! so the same solver runs in `f32` or `f64`. Concrete `f64` aliases for
//! the main types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the toolkit.
///
/// Tolerances that guard probability-simplex invariants are associated
/// constants because they must scale with the precision of the type:
/// the `f64` values are the ones all documented guarantees refer to.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Allowed deviation of a per-cell state distribution from unit mass.
    const MASS_TOL: f64;
    /// Most negative value a probability entry may take (round-off slack).
    const NEG_TOL: f64;
    /// Tolerance for exactly-specified unit masses (atom weights, atlas weights).
    const UNIT_TOL: f64;

    /// Conversion from `f64`, for constants, tolerances and config values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable in scalar type")
    }

    /// Lossy conversion to `f64`, for reporting and error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const MASS_TOL: f64 = 1e-8;
    const NEG_TOL: f64 = 1e-9;
    const UNIT_TOL: f64 = 1e-12;
}

impl Real for f32 {
    const MASS_TOL: f64 = 3e-4;
    const NEG_TOL: f64 = 3e-5;
    const UNIT_TOL: f64 = 1e-5;
}
