//! Deviation values and the Nash-gap report.
//!
//! A player's best unilateral deviation faces opponents who keep the
//! equilibrium feedback; their states stay independent, so the deviation
//! problem is a single-player control problem against the expected
//! interaction forcing. For interactions linear in the measure that
//! forcing is exact (expectation commutes with the functional); otherwise
//! it is estimated by Monte Carlo from simulated opponent configurations
//! and the value is flagged as heuristic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    bin_to_cells, empirical_measure, eval_interaction, Atom, CostModel, DiscreteMeasure,
    InteractionSpec, MeasureView, PlayerLayout,
};
use crate::nplayer::{
    build_player_feedback, estimate_costs, simulate, InitialStates, PlayerFeedback, SimConfig,
    TrajectoryBatch,
};
use crate::scalar::Real;
use crate::solver::{EquilibriumResult, Grids, Integrator};

/// How the deviation value is computed.
#[derive(Debug, Clone, Copy)]
pub enum DeviationEstimator<'a, T> {
    /// Exact expected forcing; needs `F`, `G` linear in the measure
    /// (two-body or zero).
    ExactLinear,
    /// Plug-in forcing averaged over the simulated opponent
    /// configurations of the given batch.
    PluginMc(&'a TrajectoryBatch<T>),
}

/// A deviation (best-response) value; `heuristic` marks plug-in estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationValue<T> {
    pub value: T,
    pub heuristic: bool,
}

/// Best-response value of one player against the equilibrium crowd.
///
/// Opponent `j` keeps the equilibrium feedback of her nearest cell, so her
/// law is the equilibrium flow at that cell; the mixed opponent measure
/// puts mass `q_j(t) / (N - 1)` on `(u_j, .)`. The single-player backward
/// solve against the resulting forcing gives the value of the best Markov
/// feedback deviation; its expectation over the initial state is returned.
#[allow(clippy::too_many_arguments)]
pub fn best_response_value<T: Real>(
    player: usize,
    equilibrium: &EquilibriumResult<T>,
    feedback: &PlayerFeedback<T>,
    layout: &PlayerLayout<T>,
    cost: &CostModel<T>,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    grids: &Grids<T>,
    initial: &InitialStates<T>,
    integrator: Integrator,
    estimator: DeviationEstimator<'_, T>,
) -> Result<DeviationValue<T>> {
    let n = layout.n_players();
    if n < 2 {
        return Err(Error::SinglePlayer);
    }
    if player >= n {
        return Err(Error::PlayerIndexOutOfRange { index: player, n });
    }
    let d = grids.states.d();
    let n_points = grids.time.n_points();
    let u_i = layout.position(player);

    let (forcing, terminal, heuristic) = match estimator {
        DeviationEstimator::ExactLinear => {
            for spec in [f_spec, g_spec] {
                if !matches!(spec, InteractionSpec::Zero | InteractionSpec::TwoBody { .. }) {
                    return Err(Error::NonlinearExactMode);
                }
            }
            let mut forcing = vec![T::zero(); n_points * d];
            for k in 0..n_points {
                let mixed = mixed_opponent_measure(equilibrium, feedback, layout, player, k)?;
                for x in 0..d {
                    forcing[k * d + x] =
                        eval_interaction(f_spec, x, MeasureView::Atoms(&mixed), u_i)?;
                }
            }
            let mixed_t =
                mixed_opponent_measure(equilibrium, feedback, layout, player, n_points - 1)?;
            let mut terminal = vec![T::zero(); d];
            for (x, slot) in terminal.iter_mut().enumerate() {
                *slot = eval_interaction(g_spec, x, MeasureView::Atoms(&mixed_t), u_i)?;
            }
            (forcing, terminal, false)
        }
        DeviationEstimator::PluginMc(batch) => {
            let (forcing, terminal) =
                plugin_forcing(batch, layout, grids, player, f_spec, g_spec, d)?;
            (forcing, terminal, true)
        }
    };

    let values = crate::solver::hjb::integrate_backward_cell(
        cost,
        u_i,
        &|k| &forcing[k * d..(k + 1) * d],
        &terminal,
        grids.time.dt(),
        n_points,
        d,
        integrator,
    )?;

    let value = match initial {
        InitialStates::Fixed(states) => values[states[player]],
        InitialStates::FromDensities(densities) => {
            let cell = feedback.cell_of(player);
            dot(densities.cell(cell), &values[..d])
        }
        InitialStates::PerPlayer(rows) => dot(&rows[player], &values[..d]),
    };
    Ok(DeviationValue { value, heuristic })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Expected opponent measure at grid index `k`: atoms `(u_j, y)` with mass
/// `m(t_k, cell_j)_y / (N - 1)`.
fn mixed_opponent_measure<T: Real>(
    equilibrium: &EquilibriumResult<T>,
    feedback: &PlayerFeedback<T>,
    layout: &PlayerLayout<T>,
    player: usize,
    k: usize,
) -> Result<DiscreteMeasure<T>> {
    let n = layout.n_players();
    let d = equilibrium.flow.d();
    let share = T::one() / T::from_usize(n - 1).unwrap();
    let mut atoms = Vec::with_capacity((n - 1) * d);
    for j in 0..n {
        if j == player {
            continue;
        }
        let cell = feedback.cell_of(j);
        for y in 0..d {
            atoms.push(Atom {
                position: layout.position(j),
                state: y,
                mass: equilibrium.flow.get(k, cell, y) * share,
            });
        }
    }
    DiscreteMeasure::new(atoms)
}

/// Monte-Carlo estimate of the expected interaction forcing
/// `t, x -> E[F(x, m^{N,i}(t), u_i)]` from simulated opponent states.
fn plugin_forcing<T: Real>(
    batch: &TrajectoryBatch<T>,
    layout: &PlayerLayout<T>,
    grids: &Grids<T>,
    player: usize,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    d: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let n_points = grids.time.n_points();
    let n_runs = batch.n_runs();
    let u_i = layout.position(player);
    let runs_f = T::from_usize(n_runs).unwrap();

    let grid_states: Vec<Vec<Vec<usize>>> = batch
        .paths
        .iter()
        .map(|run| {
            run.iter()
                .map(|path| path.states_on_grid(&grids.time))
                .collect()
        })
        .collect();

    let eval_spec = |spec: &InteractionSpec<T>, x: usize, states: &[usize]| -> Result<T> {
        let measure = empirical_measure(layout, states, player)?;
        match spec {
            InteractionSpec::Local { .. } => {
                let densities = bin_to_cells(&measure, &grids.atlas, d)?;
                eval_interaction(
                    spec,
                    x,
                    MeasureView::Cells {
                        atlas: &grids.atlas,
                        densities: &densities,
                    },
                    u_i,
                )
            }
            _ => eval_interaction(spec, x, MeasureView::Atoms(&measure), u_i),
        }
    };

    let mut forcing = vec![T::zero(); n_points * d];
    let mut states_buf = vec![0usize; layout.n_players()];
    for run_states in &grid_states {
        for k in 0..n_points {
            for (j, per_player) in run_states.iter().enumerate() {
                states_buf[j] = per_player[k];
            }
            for x in 0..d {
                forcing[k * d + x] = forcing[k * d + x] + eval_spec(f_spec, x, &states_buf)?;
            }
        }
    }
    for v in &mut forcing {
        *v = *v / runs_f;
    }

    let mut terminal = vec![T::zero(); d];
    for run_states in &grid_states {
        for (j, per_player) in run_states.iter().enumerate() {
            states_buf[j] = per_player[n_points - 1];
        }
        for (x, slot) in terminal.iter_mut().enumerate() {
            *slot = *slot + eval_spec(g_spec, x, &states_buf)?;
        }
    }
    for v in &mut terminal {
        *v = *v / runs_f;
    }
    Ok((forcing, terminal))
}

/// Per-player entry of the gap report.
#[derive(Debug, Clone, Serialize)]
pub struct PlayerGap<T> {
    pub player: usize,
    pub position: T,
    pub equilibrium_cost: T,
    pub cost_se: T,
    pub deviation_value: T,
    /// `max(0, equilibrium_cost - deviation_value)`; finite-sample noise
    /// can push the raw difference negative, the clipped value is the
    /// meaningful gap estimate.
    pub gap: T,
}

/// Empirical quasi-Nash certificate for the equilibrium feedback.
///
/// `eps_max` is the largest clipped gap (the epsilon for which no player
/// gains more); `eps_q90` the 90th-percentile gap (nearest-rank), the
/// natural summary when only most players are near-optimal; `delta_at`
/// reports, for each requested epsilon, the fraction of players whose gap
/// exceeds it. The deviation search ranges over feedbacks in (time, own
/// state); predictable strategies beyond that class are not searched.
#[derive(Debug, Clone, Serialize)]
pub struct NashGapReport<T> {
    pub players: Vec<PlayerGap<T>>,
    pub eps_max: T,
    pub eps_q90: T,
    pub delta_at: Vec<(T, T)>,
    pub deviation_heuristic: bool,
    pub n_runs: usize,
    pub seed: u64,
}

/// Simulates the equilibrium feedback, estimates realized costs and
/// deviation values, and assembles the gap report.
#[allow(clippy::too_many_arguments)]
pub fn nash_gap_report<T: Real>(
    equilibrium: &EquilibriumResult<T>,
    sim: &SimConfig<T>,
    cost: &CostModel<T>,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    grids: &Grids<T>,
    integrator: Integrator,
    eps_grid: &[T],
) -> Result<NashGapReport<T>> {
    let feedback = build_player_feedback(&equilibrium.policy, &grids.atlas, &sim.layout)?;
    let batch = simulate(sim, &feedback, &grids.time)?;
    let costs = estimate_costs(
        &batch,
        cost,
        f_spec,
        g_spec,
        &feedback,
        &sim.layout,
        &grids.atlas,
        &grids.time,
    )?;

    let exact_ok = f_spec.is_linear_in_measure()
        && g_spec.is_linear_in_measure()
        && !matches!(f_spec, InteractionSpec::Local { .. })
        && !matches!(g_spec, InteractionSpec::Local { .. });

    let n = sim.layout.n_players();
    let deviations: Vec<Result<DeviationValue<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let estimator = if exact_ok {
                DeviationEstimator::ExactLinear
            } else {
                DeviationEstimator::PluginMc(&batch)
            };
            best_response_value(
                i,
                equilibrium,
                &feedback,
                &sim.layout,
                cost,
                f_spec,
                g_spec,
                grids,
                &sim.initial,
                integrator,
                estimator,
            )
        })
        .collect();

    let mut players = Vec::with_capacity(n);
    let mut heuristic = false;
    for (i, dev) in deviations.into_iter().enumerate() {
        let dev = dev?;
        heuristic |= dev.heuristic;
        let pc = &costs.per_player[i];
        let raw = pc.total - dev.value;
        players.push(PlayerGap {
            player: i,
            position: sim.layout.position(i),
            equilibrium_cost: pc.total,
            cost_se: pc.se,
            deviation_value: dev.value,
            gap: raw.max(T::zero()),
        });
    }

    let mut gaps: Vec<T> = players.iter().map(|p| p.gap).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps_max = *gaps.last().unwrap();
    let q90_idx = ((T::of(0.9) * T::from_usize(n).unwrap()).ceil())
        .to_usize()
        .unwrap()
        .clamp(1, n)
        - 1;
    let eps_q90 = gaps[q90_idx];
    let nf = T::from_usize(n).unwrap();
    let delta_at = eps_grid
        .iter()
        .map(|&eps| {
            let exceed = players.iter().filter(|p| p.gap > eps).count();
            (eps, T::from_usize(exceed).unwrap() / nf)
        })
        .collect();

    Ok(NashGapReport {
        players,
        eps_max,
        eps_q90,
        delta_at,
        deviation_heuristic: heuristic,
        n_runs: sim.n_runs,
        seed: sim.seed,
    })
}
