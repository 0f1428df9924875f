//! Exact simulation of the controlled jump processes.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TimeGrid;
use crate::nplayer::{InitialStates, PlayerFeedback, SimConfig};
use crate::rng::stream;
use crate::scalar::Real;

/// Stream-tag namespace for simulation draws.
const SIM_TAG: u64 = 0x73_69_6d;

/// One player's path: the initial state and the ordered jump record.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPath<T> {
    pub initial: usize,
    /// `(jump time, new state)`, strictly increasing times within `(0, T]`.
    pub jumps: Vec<(T, usize)>,
}

impl<T: Real> PlayerPath<T> {
    /// State right before time `t` (paths are right-continuous; grid
    /// queries at `t_k` return the state carried into the instant).
    pub fn state_at(&self, t: T) -> usize {
        let mut state = self.initial;
        for &(s, y) in &self.jumps {
            if s <= t {
                state = y;
            } else {
                break;
            }
        }
        state
    }

    /// States at every grid point, one walk over the jump record.
    pub fn states_on_grid(&self, time: &TimeGrid<T>) -> Vec<usize> {
        let mut out = Vec::with_capacity(time.n_points());
        let mut state = self.initial;
        let mut next = 0;
        for k in 0..time.n_points() {
            let t = time.time(k);
            while next < self.jumps.len() && self.jumps[next].0 <= t {
                state = self.jumps[next].1;
                next += 1;
            }
            out.push(state);
        }
        out
    }
}

/// Simulated batch: `paths[run][player]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch<T> {
    pub horizon: T,
    pub n_steps: usize,
    pub paths: Vec<Vec<PlayerPath<T>>>,
}

impl<T: Real> TrajectoryBatch<T> {
    pub fn n_runs(&self) -> usize {
        self.paths.len()
    }

    pub fn n_players(&self) -> usize {
        self.paths.first().map_or(0, |run| run.len())
    }
}

/// Runs the jump processes of all players over `n_runs` independent
/// replications.
///
/// Within each time slab the feedback rates are constant, so exponential
/// clocks redrawn at slab boundaries and at jumps produce statistically
/// exact paths. Each `(run, player)` pair owns a pre-split random stream:
/// the batch is bit-identical for a given seed no matter how runs are
/// scheduled, and players evolve independently because the feedback reads
/// only their own state.
pub fn simulate<T: Real>(
    config: &SimConfig<T>,
    feedback: &PlayerFeedback<T>,
    time: &TimeGrid<T>,
) -> Result<TrajectoryBatch<T>> {
    let d = feedback.policy().d();
    config.validate(d)?;
    let n_players = config.layout.n_players();
    if feedback.n_players() != n_players {
        return Err(Error::GridMismatch(format!(
            "feedback built for {} players, layout has {n_players}",
            feedback.n_players()
        )));
    }
    if feedback.policy().n_points() != time.n_points() {
        return Err(Error::GridMismatch(format!(
            "policy has {} time points, grid has {}",
            feedback.policy().n_points(),
            time.n_points()
        )));
    }
    // Rates within the cap are a precondition; the policy can only have
    // been built clamped, so this is a cheap re-validation.
    feedback.policy().validate()?;

    let paths: Vec<Vec<PlayerPath<T>>> = (0..config.n_runs as u64)
        .into_par_iter()
        .map(|run| {
            (0..n_players)
                .map(|player| {
                    let mut rng = stream(config.seed, &[SIM_TAG, run, player as u64]);
                    let initial = match &config.initial {
                        InitialStates::Fixed(states) => states[player],
                        InitialStates::FromDensities(densities) => {
                            let cell = feedback.cell_of(player);
                            sample_state(&mut rng, densities.cell(cell))
                        }
                        InitialStates::PerPlayer(rows) => sample_state(&mut rng, &rows[player]),
                    };
                    simulate_path(&mut rng, feedback, player, initial, time)
                })
                .collect()
        })
        .collect();

    Ok(TrajectoryBatch {
        horizon: time.horizon(),
        n_steps: time.n_steps(),
        paths,
    })
}

/// Inverse-CDF draw from a probability vector.
fn sample_state<T: Real>(rng: &mut impl Rng, probs: &[T]) -> usize {
    let u: f64 = rng.random();
    let target = T::of(u);
    let mut acc = T::zero();
    for (x, &p) in probs.iter().enumerate() {
        acc = acc + p;
        if target < acc {
            return x;
        }
    }
    probs.len() - 1
}

fn simulate_path<T: Real>(
    rng: &mut impl Rng,
    feedback: &PlayerFeedback<T>,
    player: usize,
    initial: usize,
    time: &TimeGrid<T>,
) -> PlayerPath<T> {
    let mut state = initial;
    let mut t = T::zero();
    let mut jumps = Vec::new();
    for k in 0..time.n_steps() {
        let slab_end = time.time(k + 1);
        loop {
            let rates = feedback.rates(player, k, state);
            let total: T = rates.iter().copied().sum();
            if !(total > T::zero()) {
                t = slab_end;
                break;
            }
            // Exponential clock: -ln(U)/total with U in (0, 1).
            let u: f64 = rng.random();
            let wait = -T::of(u.max(f64::MIN_POSITIVE)).ln() / total;
            if t + wait >= slab_end {
                t = slab_end;
                break;
            }
            t = t + wait;
            // Jump target proportional to the rate row.
            let v: f64 = rng.random();
            let mut target = T::of(v) * total;
            let mut next = state;
            for (y, &r) in rates.iter().enumerate() {
                if y == state || r <= T::zero() {
                    continue;
                }
                if target < r {
                    next = y;
                    break;
                }
                target = target - r;
                next = y;
            }
            jumps.push((t, next));
            state = next;
        }
    }
    PlayerPath { initial, jumps }
}
