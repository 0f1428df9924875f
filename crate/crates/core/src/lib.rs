//! Long-range mean field games on finite state spaces.
//!
//! Players control the jump rates of a continuous-time Markov chain on a
//! finite state space; each player carries a fixed position in `[0, 1]`
//! and pays running and terminal costs coupling her state to the joint
//! (position, state) distribution of the others. The crate provides:
//!
//! - the domain model: costs, Hamiltonian minimizer, interaction
//!   functionals, measure flows ([`model`]);
//! - an equilibrium solver for the coupled backward HJB / forward
//!   Kolmogorov system via damped fixed-point iteration, plus a sampling
//!   check of the monotonicity condition behind uniqueness ([`solver`]);
//! - kernel discretization, Bernoulli graph sampling and cut-norm
//!   estimation ([`graphon`]);
//! - finite-player simulation and Nash-gap estimation that quantifies how
//!   close the equilibrium feedback is to a Nash equilibrium of the
//!   N-player game ([`nplayer`]).
//!
//! All numerics are generic over the scalar type through [`Real`];
//! `f64` aliases for the central types are exported at the crate root.

// Negated comparisons on scalars are NaN guards: `!(x > 0)` must trip on
// NaN where `x <= 0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod graphon;
mod linalg;
pub mod model;
pub mod nplayer;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the central types.
pub type MeasureFlow64 = model::MeasureFlow<f64>;
pub type ValueField64 = model::ValueField<f64>;
pub type Policy64 = model::Policy<f64>;
pub type CostModel64 = model::CostModel<f64>;
pub type InteractionSpec64 = model::InteractionSpec<f64>;
pub type PositionAtlas64 = model::PositionAtlas<f64>;
pub type TimeGrid64 = model::TimeGrid<f64>;
pub type PlayerLayout64 = model::PlayerLayout<f64>;
pub type KernelMatrix64 = graphon::KernelMatrix<f64>;
pub type EquilibriumResult64 = solver::EquilibriumResult<f64>;
pub type NashGapReport64 = nplayer::NashGapReport<f64>;
