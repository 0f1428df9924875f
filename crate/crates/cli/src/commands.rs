//! The five workflows behind the subcommands.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use lrmfg::graphon::{
    cut_norm_exact, cut_norm_heuristic, discretize_kernel, sample_bernoulli_graph,
};
use lrmfg::model::InteractionSpec;
use lrmfg::nplayer::{
    build_player_feedback, estimate_costs, nash_gap_report, simulate, NashGapReport,
};
use lrmfg::solver::{check_monotonicity, solve_mfg, EquilibriumResult};

use crate::config::{BuiltModel, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{
    ensure_dir, load_equilibrium, unix_timestamp, write_equilibrium, write_json,
    write_trajectories, CsvWriter, ModelEcho, SolveSummary,
};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<std::path::PathBuf>,
    pub seed: Option<u64>,
}

fn out_dir<'a>(config: &'a ExperimentConfig, overrides: &'a Overrides) -> &'a Path {
    overrides
        .out
        .as_deref()
        .unwrap_or(config.output.dir.as_path())
}

pub fn cmd_solve(
    config: &ExperimentConfig,
    path: &Path,
    overrides: &Overrides,
) -> CliResult<i32> {
    let model = config.require_model(path)?.build(path)?;
    let solver_config = config.solver_config();
    solver_config.validate()?;
    let started = Instant::now();
    let eq = solve_mfg(
        &model.cost,
        &model.interaction_f,
        &model.interaction_g,
        &model.initial_density,
        &model.grids,
        &solver_config,
    )?;
    let summary = SolveSummary {
        converged: eq.converged,
        iterations: eq.iterations,
        residual_history: eq.residual_history.clone(),
        rate_cap_hits: eq.rate_cap_hits,
        model: ModelEcho::from_grids(&model.grids, solver_config.rate_cap, solver_config.integrator),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        timestamp_unix: unix_timestamp(),
    };
    let dir = out_dir(config, overrides);
    write_equilibrium(dir, &eq, &model.grids, &summary)?;
    if !eq.converged {
        let residual = eq.residual_history.last().copied().unwrap_or(f64::NAN);
        return Err(CliError::NotConverged {
            iterations: eq.iterations,
            residual,
        });
    }
    Ok(0)
}

/// Solves in-run or loads a previous `solve` output, depending on the
/// simulation block; checks that a loaded equilibrium matches the model.
fn obtain_equilibrium(
    config: &ExperimentConfig,
    path: &Path,
    model: &BuiltModel,
) -> CliResult<EquilibriumResult<f64>> {
    let sim_block = config.require_simulation(path)?;
    match &sim_block.equilibrium_from {
        Some(dir) => {
            let (eq, grids) = load_equilibrium(dir)?;
            let matches = grids.states.d() == model.grids.states.d()
                && grids.time.n_steps() == model.grids.time.n_steps()
                && grids.time.horizon() == model.grids.time.horizon()
                && grids.atlas.cells() == model.grids.atlas.cells();
            if !matches {
                return Err(CliError::ConfigInvalid {
                    path: path.to_path_buf(),
                    message: format!(
                        "equilibrium loaded from {} was solved on different grids",
                        dir.display()
                    ),
                });
            }
            Ok(eq)
        }
        None => {
            let solver_config = config.solver_config();
            solver_config.validate()?;
            let eq = solve_mfg(
                &model.cost,
                &model.interaction_f,
                &model.interaction_g,
                &model.initial_density,
                &model.grids,
                &solver_config,
            )?;
            if !eq.converged {
                let residual = eq.residual_history.last().copied().unwrap_or(f64::NAN);
                return Err(CliError::NotConverged {
                    iterations: eq.iterations,
                    residual,
                });
            }
            Ok(eq)
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    n_runs: usize,
    n_players: usize,
    seed: u64,
    wall_time_seconds: f64,
    timestamp_unix: u64,
}

pub fn cmd_simulate(
    config: &ExperimentConfig,
    path: &Path,
    overrides: &Overrides,
) -> CliResult<i32> {
    let model = config.require_model(path)?.build(path)?;
    let sim_block = config.require_simulation(path)?;
    let started = Instant::now();
    let eq = obtain_equilibrium(config, path, &model)?;
    let sim = sim_block.build_sim(path, None, overrides.seed, &model.initial_density)?;
    let feedback = build_player_feedback(&eq.policy, &model.grids.atlas, &sim.layout)?;
    let batch = simulate(&sim, &feedback, &model.grids.time)?;
    let costs = estimate_costs(
        &batch,
        &model.cost,
        &model.interaction_f,
        &model.interaction_g,
        &feedback,
        &sim.layout,
        &model.grids.atlas,
        &model.grids.time,
    )?;

    let dir = out_dir(config, overrides);
    ensure_dir(dir)?;
    if sim_block.write_trajectories {
        write_trajectories(dir, &batch)?;
    }
    let mut csv = CsvWriter::create(
        dir.join("costs.csv"),
        "player,position,total,se,running_control,interaction,terminal",
    )?;
    for (i, pc) in costs.per_player.iter().enumerate() {
        csv.row(format_args!(
            "{},{},{},{},{},{},{}",
            i + 1,
            sim.layout.position(i),
            pc.total,
            pc.se,
            pc.running_control,
            pc.interaction,
            pc.terminal
        ))?;
    }
    csv.finish()?;
    write_json(
        &dir.join("summary.json"),
        &SimulateSummary {
            n_runs: sim.n_runs,
            n_players: sim.layout.n_players(),
            seed: sim.seed,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            timestamp_unix: unix_timestamp(),
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct NashGapDocument {
    sweeps: Vec<SweepEntry>,
    wall_time_seconds: f64,
    timestamp_unix: u64,
}

#[derive(Serialize)]
struct SweepEntry {
    n_players: usize,
    report: NashGapReport<f64>,
}

pub fn cmd_nash_gap(
    config: &ExperimentConfig,
    path: &Path,
    overrides: &Overrides,
) -> CliResult<i32> {
    let model = config.require_model(path)?.build(path)?;
    let sim_block = config.require_simulation(path)?;
    let started = Instant::now();
    let eq = obtain_equilibrium(config, path, &model)?;

    let counts: Vec<Option<usize>> = if sim_block.n_sweep.is_empty() {
        vec![None]
    } else {
        sim_block.n_sweep.iter().map(|&n| Some(n)).collect()
    };

    let mut sweeps = Vec::new();
    for n_override in counts {
        let sim = sim_block.build_sim(path, n_override, overrides.seed, &model.initial_density)?;
        let report = nash_gap_report(
            &eq,
            &sim,
            &model.cost,
            &model.interaction_f,
            &model.interaction_g,
            &model.grids,
            config.solver.integrator,
            &sim_block.eps_grid,
        )?;
        sweeps.push(SweepEntry {
            n_players: sim.layout.n_players(),
            report,
        });
    }

    let dir = out_dir(config, overrides);
    ensure_dir(dir)?;
    let mut gaps = CsvWriter::create(
        dir.join("gaps.csv"),
        "n_players,player,position,equilibrium_cost,cost_se,deviation_value,gap",
    )?;
    for entry in &sweeps {
        for p in &entry.report.players {
            gaps.row(format_args!(
                "{},{},{},{},{},{},{}",
                entry.n_players,
                p.player + 1,
                p.position,
                p.equilibrium_cost,
                p.cost_se,
                p.deviation_value,
                p.gap
            ))?;
        }
    }
    gaps.finish()?;

    let mut sweep_csv = CsvWriter::create(
        dir.join("nash_sweep.csv"),
        "n_players,eps_max,eps_q90,max_se,deviation_heuristic",
    )?;
    for entry in &sweeps {
        let max_se = entry
            .report
            .players
            .iter()
            .map(|p| p.cost_se)
            .fold(0.0, f64::max);
        sweep_csv.row(format_args!(
            "{},{},{},{},{}",
            entry.n_players,
            entry.report.eps_max,
            entry.report.eps_q90,
            max_se,
            entry.report.deviation_heuristic
        ))?;
    }
    sweep_csv.finish()?;

    write_json(
        &dir.join("nash_gap.json"),
        &NashGapDocument {
            sweeps,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            timestamp_unix: unix_timestamp(),
        },
    )?;
    Ok(0)
}

pub fn cmd_graphon(
    config: &ExperimentConfig,
    path: &Path,
    overrides: &Overrides,
) -> CliResult<i32> {
    let block = config.require_graphon(path)?;
    block.kernel.validate()?;
    if block.sizes.is_empty() {
        return Err(CliError::ConfigInvalid {
            path: path.to_path_buf(),
            message: "graphon.sizes must be nonempty".into(),
        });
    }
    let base_seed = overrides.seed.unwrap_or(block.seed);
    let kernel = |u: f64, v: f64| block.kernel.eval(u, v);

    let dir = out_dir(config, overrides);
    ensure_dir(dir)?;
    let mut csv = CsvWriter::create(dir.join("cutnorm.csv"), "n,seed,method,value,seconds")?;
    for &n in &block.sizes {
        let reference = discretize_kernel(kernel, n)?;
        for offset in 0..block.n_seeds {
            let seed = base_seed + offset;
            let sampled = sample_bernoulli_graph(kernel, n, seed)?;
            let diff = sampled.sub(&reference)?;

            let started = Instant::now();
            let heuristic = cut_norm_heuristic(&diff, block.restarts, seed)?;
            csv.row(format_args!(
                "{n},{seed},heuristic,{},{}",
                heuristic.value,
                started.elapsed().as_secs_f64()
            ))?;

            let exact = if n <= lrmfg::graphon::EXACT_LIMIT {
                let started = Instant::now();
                let exact = cut_norm_exact(&diff)?;
                csv.row(format_args!(
                    "{n},{seed},exact,{},{}",
                    exact.value,
                    started.elapsed().as_secs_f64()
                ))?;
                Some(exact)
            } else {
                None
            };

            if block.write_artifacts {
                write_kernel_matrix_csv(&dir.join(format!("sample_n{n}_s{seed}.csv")), &sampled)?;
                #[derive(Serialize)]
                struct NormsDocument {
                    heuristic: lrmfg::graphon::NormEstimate<f64>,
                    #[serde(skip_serializing_if = "Option::is_none")]
                    exact: Option<lrmfg::graphon::NormEstimate<f64>>,
                }
                write_json(
                    &dir.join(format!("norms_n{n}_s{seed}.json")),
                    &NormsDocument { heuristic, exact },
                )?;
            }
        }
    }
    csv.finish()?;
    Ok(0)
}

/// Plain comma-separated matrix rows, no header.
fn write_kernel_matrix_csv(
    path: &Path,
    matrix: &lrmfg::graphon::KernelMatrix<f64>,
) -> CliResult<()> {
    let mut text = String::new();
    for i in 0..matrix.n() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct MonotoneDocument {
    min_value: f64,
    n_samples: usize,
    monotone_on_samples: bool,
    report_f: lrmfg::solver::MonotonicityReport<f64>,
    report_g: Option<lrmfg::solver::MonotonicityReport<f64>>,
}

/// Checks the monotonicity condition by sampling. The condition behind
/// the uniqueness theorem constrains the running and terminal couplings
/// jointly; the check is applied to each separately and the minimum over
/// both is reported.
pub fn cmd_check_monotone(
    config: &ExperimentConfig,
    path: &Path,
    overrides: &Overrides,
) -> CliResult<i32> {
    let model = config.require_model(path)?.build(path)?;
    let block = config.monotone.unwrap_or_default();
    let seed = overrides.seed.unwrap_or(block.seed);
    let d = model.grids.states.d();

    let report_f = check_monotonicity(
        &model.interaction_f,
        &model.grids.atlas,
        d,
        block.n_samples,
        seed,
    )?;
    let report_g = if matches!(model.interaction_g, InteractionSpec::Zero) {
        None
    } else {
        Some(check_monotonicity(
            &model.interaction_g,
            &model.grids.atlas,
            d,
            block.n_samples,
            seed + 1,
        )?)
    };

    let mut min_value = report_f.min_value;
    let mut monotone = report_f.is_monotone_on_samples();
    if let Some(g) = &report_g {
        min_value = min_value.min(g.min_value);
        monotone &= g.is_monotone_on_samples();
    }

    let dir = out_dir(config, overrides);
    ensure_dir(dir)?;
    write_json(
        &dir.join("monotone.json"),
        &MonotoneDocument {
            min_value,
            n_samples: block.n_samples,
            monotone_on_samples: monotone,
            report_f,
            report_g,
        },
    )?;
    if monotone {
        Ok(0)
    } else {
        Err(CliError::NotMonotone { min_value })
    }
}
