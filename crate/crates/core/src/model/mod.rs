//! Domain model: spaces, measures, value fields, costs and interactions.

mod cost;
mod field;
mod interaction;
mod measure;
mod space;

pub use cost::{argmin_rates, hamiltonian, CostModel, GenericCost, Potential, QuadraticCost, ThetaFn};
pub use field::{Policy, ValueField};
pub use interaction::{bin_to_cells, eval_interaction, InteractionSpec, KernelFn, LowResField};
pub use measure::{
    empirical_measure, flow_distance, Atom, CellDensities, DiscreteMeasure, MeasureFlow,
    MeasureView,
};
pub use space::{PlayerLayout, PositionAtlas, StateSpace, TimeGrid};
