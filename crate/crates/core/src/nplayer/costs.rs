//! Realized-cost estimation along simulated paths.
//!
//! Between two consecutive events (a time-slab boundary or any player's
//! jump) every integrand is constant, so the running costs are integrated
//! exactly segment by segment; Monte-Carlo error enters only through the
//! paths themselves.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::{
    bin_to_cells, empirical_measure, eval_interaction, CostModel, InteractionSpec, MeasureView,
    PlayerLayout, PositionAtlas, TimeGrid,
};
use crate::nplayer::{PlayerFeedback, PlayerPath, TrajectoryBatch};
use crate::scalar::Real;

/// Per-player Monte-Carlo cost estimate with its standard error and the
/// mean decomposition into running-control, interaction and terminal parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCost<T> {
    pub total: T,
    pub se: T,
    pub running_control: T,
    pub interaction: T,
    pub terminal: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport<T> {
    pub per_player: Vec<PlayerCost<T>>,
    pub n_runs: usize,
}

/// One run's jumps merged across players, sorted by `(time, player)` so
/// ties resolve deterministically; plus the initial state vector.
fn merged_events<T: Real>(
    paths: &[PlayerPath<T>],
) -> (Vec<(T, usize, usize)>, Vec<usize>) {
    let mut events: Vec<(T, usize, usize)> = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        for &(t, y) in &path.jumps {
            events.push((t, i, y));
        }
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let states = paths.iter().map(|p| p.initial).collect();
    (events, states)
}

/// Interaction evaluations per player against the empirical measure of
/// the others; a two-body fast path keeps per-player aggregates that are
/// updated in O(N) per jump instead of re-scanned.
enum InteractionEval<'a, T: Real> {
    None,
    TwoBody {
        coupling: &'a [Vec<T>],
        /// `pair_kernel[i * n + j] = K(u_i, u_j)`.
        pair_kernel: &'a [T],
        /// `agg[i * d + y] = sum_{j != i} K(u_i, u_j) 1{x_j = y}`.
        agg: Vec<T>,
        inv_n_minus_1: T,
    },
    Generic(&'a InteractionSpec<T>),
}

impl<'a, T: Real> InteractionEval<'a, T> {
    fn new(
        spec: &'a InteractionSpec<T>,
        pair_kernel: Option<&'a [T]>,
        states: &[usize],
        d: usize,
    ) -> Self {
        match spec {
            InteractionSpec::Zero => InteractionEval::None,
            InteractionSpec::TwoBody { coupling, .. } => {
                let n = states.len();
                let pair_kernel = pair_kernel.expect("pair kernel precomputed for two-body");
                let mut agg = vec![T::zero(); n * d];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            agg[i * d + states[j]] =
                                agg[i * d + states[j]] + pair_kernel[i * n + j];
                        }
                    }
                }
                InteractionEval::TwoBody {
                    coupling,
                    pair_kernel,
                    agg,
                    inv_n_minus_1: T::one() / T::from_usize(n - 1).unwrap(),
                }
            }
            other => InteractionEval::Generic(other),
        }
    }

    fn apply_jump(&mut self, jumper: usize, old_state: usize, new_state: usize, n: usize, d: usize) {
        if let InteractionEval::TwoBody {
            pair_kernel, agg, ..
        } = self
        {
            for i in 0..n {
                if i != jumper {
                    let k = pair_kernel[i * n + jumper];
                    agg[i * d + old_state] = agg[i * d + old_state] - k;
                    agg[i * d + new_state] = agg[i * d + new_state] + k;
                }
            }
        }
    }

    fn eval(
        &self,
        player: usize,
        states: &[usize],
        layout: &PlayerLayout<T>,
        atlas: &PositionAtlas<T>,
        d: usize,
    ) -> Result<T> {
        match self {
            InteractionEval::None => Ok(T::zero()),
            InteractionEval::TwoBody {
                coupling,
                agg,
                inv_n_minus_1,
                ..
            } => {
                let x = states[player];
                let mut acc = T::zero();
                for y in 0..d {
                    acc = acc + coupling[x][y] * agg[player * d + y];
                }
                Ok(acc * *inv_n_minus_1)
            }
            InteractionEval::Generic(spec) => {
                let measure = empirical_measure(layout, states, player)?;
                let u = layout.position(player);
                match spec {
                    InteractionSpec::Local { .. } => {
                        let densities = bin_to_cells(&measure, atlas, d)?;
                        eval_interaction(
                            spec,
                            states[player],
                            MeasureView::Cells {
                                atlas,
                                densities: &densities,
                            },
                            u,
                        )
                    }
                    _ => eval_interaction(spec, states[player], MeasureView::Atoms(&measure), u),
                }
            }
        }
    }
}

/// Integrates realized costs over a batch: per run the running control
/// cost `L` and interaction cost `F` exactly over the piecewise-constant
/// segments, plus `G` at the horizon; then averages over runs in run
/// order, so the report is bit-reproducible for a given batch.
#[allow(clippy::too_many_arguments)]
pub fn estimate_costs<T: Real>(
    batch: &TrajectoryBatch<T>,
    cost: &CostModel<T>,
    f_spec: &InteractionSpec<T>,
    g_spec: &InteractionSpec<T>,
    feedback: &PlayerFeedback<T>,
    layout: &PlayerLayout<T>,
    atlas: &PositionAtlas<T>,
    time: &TimeGrid<T>,
) -> Result<CostReport<T>> {
    let n = layout.n_players();
    let d = feedback.policy().d();
    let n_runs = batch.n_runs();

    // Pairwise kernel table, shared across runs, for two-body couplings.
    let build_pair_kernel = |spec: &InteractionSpec<T>| -> Option<Vec<T>> {
        if let InteractionSpec::TwoBody { kernel, .. } = spec {
            let mut table = vec![T::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    table[i * n + j] = kernel.eval(layout.position(i), layout.position(j));
                }
            }
            Some(table)
        } else {
            None
        }
    };
    let f_kernel = build_pair_kernel(f_spec);
    let g_kernel = build_pair_kernel(g_spec);

    let per_run: Vec<Result<Vec<(T, T, T)>>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let (events, mut states) = merged_events(&batch.paths[run]);
            let mut f_eval = InteractionEval::new(f_spec, f_kernel.as_deref(), &states, d);
            let mut l_acc = vec![T::zero(); n];
            let mut f_acc = vec![T::zero(); n];

            let mut event_idx = 0;
            for k in 0..time.n_steps() {
                let slab_start = time.time(k);
                let slab_end = time.time(k + 1);
                let mut t = slab_start;
                loop {
                    let next_event = events.get(event_idx).filter(|e| e.0 <= slab_end);
                    let seg_end = next_event.map_or(slab_end, |e| e.0);
                    let dt_seg = seg_end - t;
                    if dt_seg > T::zero() {
                        for i in 0..n {
                            let rates = feedback.rates(i, k, states[i]);
                            let l = cost.running_cost(states[i], rates, layout.position(i));
                            l_acc[i] = l_acc[i] + l * dt_seg;
                            let f = f_eval.eval(i, &states, layout, atlas, d)?;
                            f_acc[i] = f_acc[i] + f * dt_seg;
                        }
                    }
                    t = seg_end;
                    match next_event {
                        Some(&(_, jumper, new_state)) => {
                            let old_state = states[jumper];
                            states[jumper] = new_state;
                            f_eval.apply_jump(jumper, old_state, new_state, n, d);
                            event_idx += 1;
                        }
                        None => break,
                    }
                }
            }

            // Terminal costs on the final configuration.
            let g_eval = InteractionEval::new(g_spec, g_kernel.as_deref(), &states, d);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let g = g_eval.eval(i, &states, layout, atlas, d)?;
                out.push((l_acc[i], f_acc[i], g));
            }
            Ok(out)
        })
        .collect();

    let mut components: Vec<Vec<(T, T, T)>> = Vec::with_capacity(n_runs);
    for res in per_run {
        components.push(res?);
    }

    let nf = T::from_usize(n_runs).unwrap();
    let per_player = (0..n)
        .map(|i| {
            let mut sum_l = T::zero();
            let mut sum_f = T::zero();
            let mut sum_g = T::zero();
            let mut sum_total = T::zero();
            for run in &components {
                let (l, f, g) = run[i];
                sum_l = sum_l + l;
                sum_f = sum_f + f;
                sum_g = sum_g + g;
                sum_total = sum_total + (l + f + g);
            }
            let mean = sum_total / nf;
            let mut var = T::zero();
            for run in &components {
                let (l, f, g) = run[i];
                let dev = (l + f + g) - mean;
                var = var + dev * dev;
            }
            let se = if n_runs > 1 {
                (var / (nf - T::one())).sqrt() / nf.sqrt()
            } else {
                T::zero()
            };
            PlayerCost {
                total: mean,
                se,
                running_control: sum_l / nf,
                interaction: sum_f / nf,
                terminal: sum_g / nf,
            }
        })
        .collect();

    Ok(CostReport {
        per_player,
        n_runs,
    })
}
