//! Finite-player simulation and Nash-gap estimation.
//!
//! Players run the equilibrium feedback read off at their own position;
//! the simulator produces exact jump-process paths, the cost estimator
//! integrates realized costs along them, and the gap report compares each
//! player's equilibrium cost against the value of her best unilateral
//! deviation.

mod costs;
mod feedback;
mod gap;
mod sim;

pub use costs::{estimate_costs, CostReport, PlayerCost};
pub use feedback::{build_player_feedback, PlayerFeedback};
pub use gap::{
    best_response_value, nash_gap_report, DeviationEstimator, DeviationValue, NashGapReport,
    PlayerGap,
};
pub use sim::{simulate, PlayerPath, TrajectoryBatch};

use crate::error::{Error, Result};
use crate::model::{CellDensities, PlayerLayout};
use crate::scalar::Real;

/// How players draw their initial states.
#[derive(Debug, Clone)]
pub enum InitialStates<T> {
    /// Sample from the given per-cell densities at each player's nearest
    /// atlas cell (the default).
    FromDensities(CellDensities<T>),
    /// Sample from an explicit distribution per player.
    PerPlayer(Vec<Vec<T>>),
    /// Fixed initial state per player.
    Fixed(Vec<usize>),
}

/// Monte-Carlo simulation setup.
#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    pub layout: PlayerLayout<T>,
    pub n_runs: usize,
    pub seed: u64,
    pub initial: InitialStates<T>,
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidInput("n_runs must be >= 1".into()));
        }
        match &self.initial {
            InitialStates::Fixed(states) => {
                if states.len() != self.layout.n_players() {
                    return Err(Error::InvalidInput(format!(
                        "{} fixed initial states for {} players",
                        states.len(),
                        self.layout.n_players()
                    )));
                }
                if states.iter().any(|&x| x >= d) {
                    return Err(Error::InvalidInput(
                        "fixed initial state outside the state space".into(),
                    ));
                }
            }
            InitialStates::FromDensities(densities) => {
                if densities.d() != d {
                    return Err(Error::InvalidInput(format!(
                        "initial densities have {} states, model has {d}",
                        densities.d()
                    )));
                }
                densities.validate()?;
            }
            InitialStates::PerPlayer(rows) => {
                if rows.len() != self.layout.n_players() {
                    return Err(Error::InvalidInput(format!(
                        "{} initial distributions for {} players",
                        rows.len(),
                        self.layout.n_players()
                    )));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != d {
                        return Err(Error::InvalidInput(format!(
                            "player {i} initial distribution has wrong length"
                        )));
                    }
                    let total: T = row.iter().copied().sum();
                    if (total - T::one()).abs() > T::of(T::MASS_TOL)
                        || row.iter().any(|&p| !(p >= T::zero()))
                    {
                        return Err(Error::InvalidInput(format!(
                            "player {i} initial distribution is not on the simplex"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
