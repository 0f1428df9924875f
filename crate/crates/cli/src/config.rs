//! Experiment configuration schema.
//!
//! Configurations are JSON documents with up to six blocks; unknown keys
//! are rejected everywhere. All numbers are read as `f64`; states and
//! players are 1-based in configs and output files.
//!
//! ```json
//! {
//!   "model": {
//!     "states": 2,
//!     "time": { "horizon": 1.0, "steps": 100 },
//!     "atlas": { "uniform": 8 },
//!     "cost": { "theta": { "constant": 1.0 }, "potential": { "per_state": [0.0, 1.0] } },
//!     "interaction_f": { "type": "two_body",
//!                        "kernel": "mean_position",
//!                        "coupling": [[1.0, 0.0], [0.0, 1.0]] },
//!     "interaction_g": { "type": "zero" },
//!     "initial_density": { "broadcast": [0.8, 0.2] }
//!   },
//!   "solver": { "damping": 0.5, "tolerance": 1e-6, "max_iterations": 200,
//!               "integrator": "rk4", "fictitious_play": false, "rate_cap": 1000.0 },
//!   "simulation": { "players": { "grid": 20 }, "n_runs": 2000, "seed": 42,
//!                   "eps_grid": [0.01, 0.05], "n_sweep": [],
//!                   "write_trajectories": false },
//!   "graphon": { "kernel": "mean_position", "sizes": [32, 256],
//!                "n_seeds": 20, "seed": 0, "restarts": 16 },
//!   "monotone": { "n_samples": 200, "seed": 0 },
//!   "output": { "dir": "out" }
//! }
//! ```
//!
//! Block-by-block:
//!
//! - `model.atlas`: either `{ "uniform": M }` (M cells at midpoints of a
//!   uniform grid on `[0, 1]`, equal weights) or explicit
//!   `{ "cells": [...], "weights": [...] }` with weights summing to one.
//! - `model.cost.theta`: `{ "constant": c }` or
//!   `{ "affine": { "base": b, "slope": s } }`, positive on `[0, 1]`.
//! - `model.cost.potential`: `"zero"`, `{ "per_state": [...] }` or
//!   `{ "affine_in_position": { "base": [...], "slope": [...] } }`.
//! - interaction kernels: `{ "constant": c }`, `"mean_position"`
//!   ((u+v)/2), `"product"` (u v), `{ "gaussian": { "width": w } }`, or
//!   `{ "step": { "n": n, "entries": [...] } }` (row-major step kernel).
//! - interactions: `{ "type": "zero" }`;
//!   `{ "type": "two_body", "kernel": ..., "coupling": [[f(x,y)]] }`;
//!   `{ "type": "low_res", "kernel": ..., "field": ..., "smoothing": ... }`
//!   with `field` one of `"own_share"`, `"own_share_squared"`,
//!   `{ "linear": { "weights": [[...]] } }`;
//!   `{ "type": "local", "coeff": c }` for `F(x, m, u) = c m_x(u)`.
//!   Two-body/zero interactions admit the exact deviation value in
//!   `nash-gap`; others fall back to the plug-in estimate.
//! - `model.initial_density`: `{ "uniform": true }`,
//!   `{ "broadcast": [p_1..p_d] }` (same distribution in every cell) or
//!   `{ "per_cell": [[..], ..] }` (one distribution per atlas cell).
//! - `simulation.players`: `{ "grid": N }` (positions i/N),
//!   `{ "iid": { "count": N, "seed": s } }` (uniform draws) or
//!   `{ "positions": [...] }` (explicit, pairwise distinct).
//! - `simulation.initial_states`: optional fixed 1-based states per
//!   player; by default initial states are sampled from the model's
//!   initial density at each player's nearest cell.
//! - `simulation.equilibrium_from`: directory with `value.csv`,
//!   `flow.csv`, `policy.csv` and `summary.json` from a previous `solve`;
//!   when absent, `nash-gap` and `simulate` solve in-run.
//! - `graphon`: `sizes` is the list of matrix resolutions; `n_seeds`
//!   replications per size starting at `seed`; `restarts` is the
//!   heuristic budget. Sizes within the exact gate also emit exact rows.
//! - `--seed S` on the command line overrides `simulation.seed`,
//!   `graphon.seed` and `monotone.seed`; `--out DIR` overrides
//!   `output.dir`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lrmfg::model::{
    CellDensities, CostModel, InteractionSpec, KernelFn, PlayerLayout, PositionAtlas, Potential,
    QuadraticCost, StateSpace, ThetaFn, TimeGrid,
};
use lrmfg::nplayer::{InitialStates, SimConfig};
use lrmfg::solver::{Grids, Integrator, SolverConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graphon: Option<GraphonBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone: Option<MonotoneBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub states: usize,
    pub time: TimeBlock,
    pub atlas: AtlasBlock,
    pub cost: CostBlock,
    #[serde(default = "zero_interaction")]
    pub interaction_f: InteractionSpec<f64>,
    #[serde(default = "zero_interaction")]
    pub interaction_g: InteractionSpec<f64>,
    pub initial_density: DensityBlock,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    pub theta: ThetaFn<f64>,
    #[serde(default = "zero_potential")]
    pub potential: Potential<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub broadcast: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_cell: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub integrator: Integrator,
    pub fictitious_play: bool,
    pub rate_cap: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::<f64>::default();
        Self {
            damping: d.damping,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            integrator: d.integrator,
            fictitious_play: d.fictitious_play,
            rate_cap: d.rate_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub players: PlayersBlock,
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub n_sweep: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_states: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_from: Option<PathBuf>,
    #[serde(default)]
    pub write_trajectories: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayersBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iid: Option<IidBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidBlock {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphonBlock {
    pub kernel: KernelFn<f64>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Also persist each sampled matrix (`sample_n<n>_s<seed>.csv`, plain
    /// comma-separated rows) and the norm estimates with their witnesses
    /// (`norms_n<n>_s<seed>.json`).
    #[serde(default)]
    pub write_artifacts: bool,
}

fn default_n_seeds() -> u64 {
    20
}

fn default_restarts() -> usize {
    16
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonotoneBlock {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for MonotoneBlock {
    fn default() -> Self {
        Self {
            n_samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

fn zero_interaction() -> InteractionSpec<f64> {
    InteractionSpec::Zero
}

fn zero_potential() -> Potential<f64> {
    Potential::Zero
}

/// Fully validated model ready for the solver.
pub struct BuiltModel {
    pub grids: Grids<f64>,
    pub cost: CostModel<f64>,
    pub interaction_f: InteractionSpec<f64>,
    pub interaction_g: InteractionSpec<f64>,
    pub initial_density: CellDensities<f64>,
}

pub fn parse_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigSyntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn invalid(path: &Path, message: impl Into<String>) -> CliError {
    CliError::ConfigInvalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn require_model(&self, path: &Path) -> CliResult<&ModelBlock> {
        self.model
            .as_ref()
            .ok_or_else(|| invalid(path, "this command needs a `model` block"))
    }

    pub fn require_simulation(&self, path: &Path) -> CliResult<&SimulationBlock> {
        self.simulation
            .as_ref()
            .ok_or_else(|| invalid(path, "this command needs a `simulation` block"))
    }

    pub fn require_graphon(&self, path: &Path) -> CliResult<&GraphonBlock> {
        self.graphon
            .as_ref()
            .ok_or_else(|| invalid(path, "this command needs a `graphon` block"))
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            damping: self.solver.damping,
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            integrator: self.solver.integrator,
            fictitious_play: self.solver.fictitious_play,
            rate_cap: self.solver.rate_cap,
            initial_flow: None,
        }
    }
}

impl ModelBlock {
    pub fn build(&self, path: &Path) -> CliResult<BuiltModel> {
        let states = StateSpace::new(self.states).map_err(CliError::Model)?;
        let time =
            TimeGrid::new(self.time.horizon, self.time.steps).map_err(CliError::Model)?;
        let atlas = self.atlas.build(path)?;
        let d = states.d();

        self.cost.theta.validate().map_err(CliError::Model)?;
        self.cost.potential.validate(d).map_err(CliError::Model)?;
        let cost = CostModel::Quadratic(QuadraticCost {
            theta: self.cost.theta.clone(),
            potential: self.cost.potential.clone(),
        });

        self.interaction_f.validate(d).map_err(CliError::Model)?;
        self.interaction_g.validate(d).map_err(CliError::Model)?;

        let initial_density = self.initial_density.build(path, d, atlas.n_cells())?;
        initial_density.validate().map_err(CliError::Model)?;

        Ok(BuiltModel {
            grids: Grids::new(states, time, atlas),
            cost,
            interaction_f: self.interaction_f.clone(),
            interaction_g: self.interaction_g.clone(),
            initial_density,
        })
    }
}

impl AtlasBlock {
    pub fn build(&self, path: &Path) -> CliResult<PositionAtlas<f64>> {
        match (&self.uniform, &self.cells, &self.weights) {
            (Some(m), None, None) => PositionAtlas::uniform(*m).map_err(CliError::Model),
            (None, Some(cells), Some(weights)) => {
                PositionAtlas::new(cells.clone(), weights.clone()).map_err(CliError::Model)
            }
            _ => Err(invalid(
                path,
                "atlas must be either { \"uniform\": M } or { \"cells\": [...], \"weights\": [...] }",
            )),
        }
    }
}

impl DensityBlock {
    pub fn build(&self, path: &Path, d: usize, n_cells: usize) -> CliResult<CellDensities<f64>> {
        match (&self.uniform, &self.broadcast, &self.per_cell) {
            (Some(true), None, None) => Ok(CellDensities::uniform(d, n_cells)),
            (None, Some(per_state), None) => {
                if per_state.len() != d {
                    return Err(invalid(
                        path,
                        format!("broadcast density has {} states, model has {d}", per_state.len()),
                    ));
                }
                Ok(CellDensities::broadcast(per_state, n_cells))
            }
            (None, None, Some(rows)) => {
                if rows.len() != n_cells {
                    return Err(invalid(
                        path,
                        format!("per_cell density has {} rows, atlas has {n_cells} cells", rows.len()),
                    ));
                }
                let mut values = Vec::with_capacity(d * n_cells);
                for row in rows {
                    if row.len() != d {
                        return Err(invalid(path, "per_cell density row of wrong length"));
                    }
                    values.extend_from_slice(row);
                }
                CellDensities::new(d, values).map_err(CliError::Model)
            }
            _ => Err(invalid(
                path,
                "initial_density must be exactly one of `uniform`, `broadcast`, `per_cell`",
            )),
        }
    }
}

impl SimulationBlock {
    /// Builds the layout and simulation config for a given player count
    /// override (used by the N-sweep); `None` keeps the configured count.
    pub fn build_sim(
        &self,
        path: &Path,
        n_override: Option<usize>,
        seed_override: Option<u64>,
        initial_density: &CellDensities<f64>,
    ) -> CliResult<SimConfig<f64>> {
        let layout = self.players.build(path, n_override)?;
        let initial = match &self.initial_states {
            Some(states) => {
                if n_override.is_some() {
                    return Err(invalid(
                        path,
                        "fixed initial_states cannot be combined with n_sweep",
                    ));
                }
                if states.len() != layout.n_players() {
                    return Err(invalid(
                        path,
                        format!(
                            "{} initial_states for {} players",
                            states.len(),
                            layout.n_players()
                        ),
                    ));
                }
                let zero_based: Vec<usize> = states
                    .iter()
                    .map(|&s| {
                        if s == 0 {
                            Err(invalid(path, "initial_states are 1-based"))
                        } else {
                            Ok(s - 1)
                        }
                    })
                    .collect::<CliResult<_>>()?;
                InitialStates::Fixed(zero_based)
            }
            None => InitialStates::FromDensities(initial_density.clone()),
        };
        if self.n_runs == 0 {
            return Err(invalid(path, "n_runs must be >= 1"));
        }
        Ok(SimConfig {
            layout,
            n_runs: self.n_runs,
            seed: seed_override.unwrap_or(self.seed),
            initial,
        })
    }
}

impl PlayersBlock {
    pub fn build(&self, path: &Path, n_override: Option<usize>) -> CliResult<PlayerLayout<f64>> {
        match (&self.grid, &self.iid, &self.positions) {
            (Some(n), None, None) => {
                PlayerLayout::grid(n_override.unwrap_or(*n)).map_err(CliError::Model)
            }
            (None, Some(iid), None) => {
                let n = n_override.unwrap_or(iid.count);
                PlayerLayout::sample_uniform(n, iid.seed).map_err(CliError::Model)
            }
            (None, None, Some(positions)) => {
                if n_override.is_some() {
                    return Err(invalid(
                        path,
                        "explicit positions cannot be combined with n_sweep",
                    ));
                }
                PlayerLayout::new(positions.clone()).map_err(CliError::Model)
            }
            _ => Err(invalid(
                path,
                "players must be exactly one of `grid`, `iid`, `positions`",
            )),
        }
    }
}
