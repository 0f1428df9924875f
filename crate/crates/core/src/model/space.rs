//! State space, time grid, position atlas and player layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finite state space with states labeled `0..d` internally.
///
/// User-facing formats (configs, CSV) use 1-based labels `1..=d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    d: usize,
}

impl StateSpace {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!(
                "state space needs at least 2 states, got {d}"
            )));
        }
        Ok(Self { d })
    }

    /// Number of states.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn states(&self) -> impl Iterator<Item = usize> {
        0..self.d
    }
}

/// Uniform time grid on `[0, T]` with points `t_k = k * dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    horizon: T,
    n_steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, n_steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be positive".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize(self.n_steps).unwrap()
    }

    pub fn time(&self, k: usize) -> T {
        if k == self.n_steps {
            self.horizon
        } else {
            self.dt() * T::from_usize(k).unwrap()
        }
    }
}

/// Finite quantization of the position space `[0, 1]` (or any pre-discretized
/// compact space): `M` distinct cells `u_k` with probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionAtlas<T> {
    cells: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> PositionAtlas<T> {
    pub fn new(cells: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyAtlas);
        }
        if cells.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} cells but {} weights",
                cells.len(),
                weights.len()
            )));
        }
        let mut total = T::zero();
        for &w in &weights {
            if !(w >= T::zero()) {
                return Err(Error::InvalidInput(format!(
                    "atlas weight {w} is negative or NaN"
                )));
            }
            total = total + w;
        }
        if (total - T::one()).abs() > T::of(T::UNIT_TOL) {
            return Err(Error::InvalidInput(format!(
                "atlas weights sum to {total}, expected 1"
            )));
        }
        for i in 0..cells.len() {
            for j in (i + 1)..cells.len() {
                if cells[i] == cells[j] {
                    return Err(Error::InvalidInput(format!(
                        "atlas cells must be distinct; cells {i} and {j} are both {}",
                        cells[i]
                    )));
                }
            }
        }
        Ok(Self { cells, weights })
    }

    /// Midpoint quantization of the uniform measure on `[0, 1]`:
    /// cells `(k + 1/2) / m` with equal weights.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyAtlas);
        }
        let mf = T::from_usize(m).unwrap();
        let half = T::of(0.5);
        let cells = (0..m)
            .map(|k| (T::from_usize(k).unwrap() + half) / mf)
            .collect();
        let weights = vec![T::one() / mf; m];
        Self::new(cells, weights)
    }

    /// Single cell at `u = 1/2` carrying all mass.
    pub fn single() -> Self {
        Self {
            cells: vec![T::of(0.5)],
            weights: vec![T::one()],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, k: usize) -> T {
        self.cells[k]
    }

    pub fn weight(&self, k: usize) -> T {
        self.weights[k]
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Index of the cell closest to `u`; ties resolve to the lower index.
    pub fn nearest_cell(&self, u: T) -> usize {
        let mut best = 0;
        let mut best_dist = (self.cells[0] - u).abs();
        for (k, &c) in self.cells.iter().enumerate().skip(1) {
            let dist = (c - u).abs();
            if dist < best_dist {
                best = k;
                best_dist = dist;
            }
        }
        best
    }
}

/// Fixed positions of the `N` players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerLayout<T> {
    positions: Vec<T>,
}

impl<T: Real> PlayerLayout<T> {
    pub fn new(positions: Vec<T>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("player layout is empty".into()));
        }
        for i in 0..positions.len() {
            if !positions[i].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "player {i} has non-finite position"
                )));
            }
            for j in (i + 1)..positions.len() {
                if positions[i] == positions[j] {
                    return Err(Error::InvalidInput(format!(
                        "players {i} and {j} share position {}",
                        positions[i]
                    )));
                }
            }
        }
        Ok(Self { positions })
    }

    /// Deterministic layout `u_i = i / N`, `i = 1..=N`.
    pub fn grid(n: usize) -> Result<Self> {
        let nf = T::from_usize(n).unwrap();
        Self::new(
            (1..=n)
                .map(|i| T::from_usize(i).unwrap() / nf)
                .collect(),
        )
    }

    /// Independent uniform draws on `[0, 1)`, redrawn (deterministically)
    /// on the measure-zero chance of a collision.
    pub fn sample_uniform(n: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        if n == 0 {
            return Err(Error::InvalidInput("player layout is empty".into()));
        }
        let mut rng = crate::rng::stream(seed, &[0x706f_7369, n as u64]);
        for _ in 0..64 {
            let positions: Vec<T> = (0..n)
                .map(|_| T::of(rng.random_range(0.0..1.0)))
                .collect();
            if let Ok(layout) = Self::new(positions) {
                return Ok(layout);
            }
        }
        Err(Error::InvalidInput(
            "could not draw pairwise distinct positions".into(),
        ))
    }

    pub fn n_players(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, i: usize) -> T {
        self.positions[i]
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }
}
