//! Result emission and equilibrium artifact loading.
//!
//! Matrices go to CSV with a fixed header and column order; metadata goes
//! to JSON. CSV floats use the shortest round-trip formatting, so a rerun
//! with the same seed reproduces every file byte for byte; wall time and
//! the timestamp live only in `summary.json`. States, cells, players and
//! runs are 1-based in all files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lrmfg::model::{MeasureFlow, Policy, PositionAtlas, StateSpace, TimeGrid, ValueField};
use lrmfg::nplayer::TrajectoryBatch;
use lrmfg::solver::{EquilibriumResult, Grids, Integrator};

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

pub struct CsvWriter {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: PathBuf, header: &str) -> CliResult<Self> {
        let file = File::create(&path).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{header}").map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(Self { path, writer })
    }

    pub fn row(&mut self, fields: std::fmt::Arguments<'_>) -> CliResult<()> {
        writeln!(self.writer, "{fields}").map_err(|source| CliError::Write {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush().map_err(|source| CliError::Write {
            path: self.path.clone(),
            source,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serialization");
    std::fs::write(path, text + "\n").map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Model echo stored in `summary.json` so later commands can reload the
/// equilibrium without the original config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEcho {
    pub states: usize,
    pub horizon: f64,
    pub steps: usize,
    pub cells: Vec<f64>,
    pub weights: Vec<f64>,
    pub rate_cap: f64,
    pub integrator: Integrator,
}

impl ModelEcho {
    pub fn from_grids(grids: &Grids<f64>, rate_cap: f64, integrator: Integrator) -> Self {
        Self {
            states: grids.states.d(),
            horizon: grids.time.horizon(),
            steps: grids.time.n_steps(),
            cells: grids.atlas.cells().to_vec(),
            weights: grids.atlas.weights().to_vec(),
            rate_cap,
            integrator,
        }
    }

    pub fn grids(&self, path: &Path) -> CliResult<Grids<f64>> {
        let states = StateSpace::new(self.states).map_err(|e| malformed(path, e))?;
        let time = TimeGrid::new(self.horizon, self.steps).map_err(|e| malformed(path, e))?;
        let atlas = PositionAtlas::new(self.cells.clone(), self.weights.clone())
            .map_err(|e| malformed(path, e))?;
        Ok(Grids::new(states, time, atlas))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub rate_cap_hits: usize,
    pub model: ModelEcho,
    pub wall_time_seconds: f64,
    pub timestamp_unix: u64,
}

pub fn write_equilibrium(
    dir: &Path,
    eq: &EquilibriumResult<f64>,
    grids: &Grids<f64>,
    summary: &SolveSummary,
) -> CliResult<()> {
    ensure_dir(dir)?;
    let time = &grids.time;

    let mut value = CsvWriter::create(dir.join("value.csv"), "t,cell,state,value")?;
    for k in 0..time.n_points() {
        let t = time.time(k);
        for cell in 0..eq.value.n_cells() {
            for x in 0..eq.value.d() {
                value.row(format_args!("{t},{},{},{}", cell + 1, x + 1, eq.value.get(k, cell, x)))?;
            }
        }
    }
    value.finish()?;

    let mut flow = CsvWriter::create(dir.join("flow.csv"), "t,cell,state,mass")?;
    for k in 0..time.n_points() {
        let t = time.time(k);
        for cell in 0..eq.flow.n_cells() {
            for x in 0..eq.flow.d() {
                flow.row(format_args!("{t},{},{},{}", cell + 1, x + 1, eq.flow.get(k, cell, x)))?;
            }
        }
    }
    flow.finish()?;

    let mut policy = CsvWriter::create(dir.join("policy.csv"), "t,cell,from,to,rate")?;
    for k in 0..time.n_points() {
        let t = time.time(k);
        for cell in 0..eq.policy.n_cells() {
            for from in 0..eq.policy.d() {
                for to in 0..eq.policy.d() {
                    if to != from {
                        policy.row(format_args!(
                            "{t},{},{},{},{}",
                            cell + 1,
                            from + 1,
                            to + 1,
                            eq.policy.get(k, cell, from, to)
                        ))?;
                    }
                }
            }
        }
    }
    policy.finish()?;

    write_json(&dir.join("summary.json"), summary)
}

fn malformed(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::MalformedArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read_artifact(path: &Path) -> CliResult<String> {
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
        });
    }
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses one of the grid-shaped CSVs back into `(t, cell, x[, y]) -> value`.
fn parse_grid_csv(
    path: &Path,
    header: &str,
    index_columns: usize,
) -> CliResult<Vec<(usize, Vec<usize>, f64)>> {
    let text = read_artifact(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line == header => {}
        other => {
            return Err(malformed(
                path,
                format!("expected header `{header}`, found {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != index_columns + 2 {
            return Err(malformed(path, format!("line {}: wrong arity", lineno + 2)));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 2)))?;
        let t_idx = match times.iter().position(|&v| v == t) {
            Some(i) => i,
            None => {
                times.push(t);
                times.len() - 1
            }
        };
        let mut indices = Vec::with_capacity(index_columns);
        for f in &fields[1..=index_columns] {
            let v: usize = f
                .parse()
                .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 2)))?;
            if v == 0 {
                return Err(malformed(path, format!("line {}: 1-based index is 0", lineno + 2)));
            }
            indices.push(v - 1);
        }
        let value: f64 = fields[index_columns + 1]
            .parse()
            .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 2)))?;
        rows.push((t_idx, indices, value));
    }
    Ok(rows)
}

/// Reloads a solved equilibrium from a `solve` output directory.
pub fn load_equilibrium(dir: &Path) -> CliResult<(EquilibriumResult<f64>, Grids<f64>)> {
    let summary_path = dir.join("summary.json");
    let summary: SolveSummary = serde_json::from_str(&read_artifact(&summary_path)?)
        .map_err(|e| malformed(&summary_path, e))?;
    let grids = summary.model.grids(&summary_path)?;
    let n_points = grids.time.n_points();
    let n_cells = grids.atlas.n_cells();
    let d = grids.states.d();

    let expect_rows = |path: &Path, got: usize, want: usize| -> CliResult<()> {
        if got != want {
            return Err(malformed(path, format!("{got} rows, expected {want}")));
        }
        Ok(())
    };

    let value_path = dir.join("value.csv");
    let mut value = ValueField::zeros(n_points, n_cells, d);
    let rows_read = parse_grid_csv(&value_path, "t,cell,state,value", 2)?;
    expect_rows(&value_path, rows_read.len(), n_points * n_cells * d)?;
    for (t, idx, v) in rows_read {
        value.set(t, idx[0], idx[1], v);
    }
    value.validate().map_err(|e| malformed(&value_path, e))?;

    let flow_path = dir.join("flow.csv");
    let mut flow_values = vec![0.0f64; n_points * n_cells * d];
    let rows_read = parse_grid_csv(&flow_path, "t,cell,state,mass", 2)?;
    expect_rows(&flow_path, rows_read.len(), n_points * n_cells * d)?;
    for (t, idx, v) in rows_read {
        flow_values[(t * n_cells + idx[0]) * d + idx[1]] = v;
    }
    let flow = MeasureFlow::from_values(n_points, n_cells, d, flow_values)
        .map_err(|e| malformed(&flow_path, e))?;
    flow.validate().map_err(|e| malformed(&flow_path, e))?;

    let policy_path = dir.join("policy.csv");
    let mut policy = Policy::zeros(n_points, n_cells, d, summary.model.rate_cap);
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; d]; n_points * n_cells * d];
    let rows_read = parse_grid_csv(&policy_path, "t,cell,from,to,rate", 3)?;
    expect_rows(&policy_path, rows_read.len(), n_points * n_cells * d * (d - 1))?;
    for (t, idx, v) in rows_read {
        rows[(t * n_cells + idx[0]) * d + idx[1]][idx[2]] = v;
    }
    for t in 0..n_points {
        for cell in 0..n_cells {
            for from in 0..d {
                policy.set_row_clamped(t, cell, from, &rows[(t * n_cells + cell) * d + from]);
            }
        }
    }
    policy.set_cap_hits(summary.rate_cap_hits);

    let eq = EquilibriumResult {
        value,
        flow,
        policy,
        residual_history: summary.residual_history.clone(),
        converged: summary.converged,
        iterations: summary.iterations,
        rate_cap_hits: summary.rate_cap_hits,
    };
    Ok((eq, grids))
}

pub fn write_trajectories(
    dir: &Path,
    batch: &TrajectoryBatch<f64>,
) -> CliResult<()> {
    let mut csv = CsvWriter::create(dir.join("trajectories.csv"), "run,player,time,state")?;
    for (run, players) in batch.paths.iter().enumerate() {
        for (player, path) in players.iter().enumerate() {
            csv.row(format_args!("{},{},0,{}", run + 1, player + 1, path.initial + 1))?;
            for &(t, state) in &path.jumps {
                csv.row(format_args!("{},{},{t},{}", run + 1, player + 1, state + 1))?;
            }
        }
    }
    csv.finish()
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
