//! End-to-end tests driving the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrmfg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, subcommand: &str, config: &Path, extra: &[&str]) -> Output {
    let out_dir = dir.to_string_lossy().to_string();
    let config = config.to_string_lossy().to_string();
    let mut args = vec![subcommand, config.as_str(), "--out", out_dir.as_str()];
    args.extend_from_slice(extra);
    run(&args)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn solve_decoupled_converges_in_one_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "solve", &fixture("decoupled.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("summary.json"))).unwrap();
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));
    assert_eq!(summary["iterations"], serde_json::json!(1));
    assert_eq!(summary["residual_history"], serde_json::json!([0.0]));

    for (file, header) in [
        ("value.csv", "t,cell,state,value"),
        ("flow.csv", "t,cell,state,mass"),
        ("policy.csv", "t,cell,from,to,rate"),
    ] {
        let text = read(&tmp.path().join(file));
        assert!(text.starts_with(header), "{file} header");
        assert!(text.lines().count() > 100, "{file} has data rows");
    }
}

#[test]
fn malformed_json_exits_one_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ \"model\": { \"states\": 2,, }").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run_in(&out_dir, "solve", &bad, &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.json:1:"), "line-numbered message, got: {stderr}");
    assert!(!out_dir.exists(), "no output files on invalid input");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("typo.json");
    std::fs::write(&bad, r#"{ "graphon": { "kernel": "product", "sizes": [8], "restart": 2 } }"#)
        .unwrap();
    let out = run_in(&tmp.path().join("out"), "graphon", &bad, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn solve_monotone_instance_records_final_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "solve", &fixture("monotone_local.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("summary.json"))).unwrap();
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));
    let residuals = summary["residual_history"].as_array().unwrap();
    let last = residuals.last().unwrap().as_f64().unwrap();
    assert!(last <= 1e-6, "final residual {last}");
}

#[test]
fn nash_gap_zero_interaction_stays_within_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "nash-gap", &fixture("decoupled.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = csv_rows(&read(&tmp.path().join("gaps.csv")));
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let se: f64 = row[4].parse().unwrap();
        let gap: f64 = row[6].parse().unwrap();
        assert!(gap <= 3.0 * se, "gap {gap} above 3 x SE {se}");
    }
    // Reported delta at an epsilon above the noise floor is zero.
    let doc: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("nash_gap.json"))).unwrap();
    let delta = doc["sweeps"][0]["report"]["delta_at"][0][1].as_f64().unwrap();
    assert_eq!(delta, 0.0);
}

#[test]
fn nash_gap_sweep_decays_in_n() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "nash-gap", &fixture("nash_sweep.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = csv_rows(&read(&tmp.path().join("nash_sweep.csv")));
    assert_eq!(rows.len(), 3);
    let ns: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(ns, vec![10, 50, 200]);
    let eps: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(
        eps[0] > eps[1] && eps[1] > eps[2],
        "eps-hat not strictly decreasing: {eps:?}"
    );
}

#[test]
fn nash_gap_load_mode_matches_in_run_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let solve_dir = tmp.path().join("eq");
    let out = run_in(&solve_dir, "solve", &fixture("decoupled.json"), &[]);
    assert!(out.status.success());

    // Same config, but loading the equilibrium artifacts.
    let config_text = read(&fixture("decoupled.json"));
    let mut config: serde_json::Value = serde_json::from_str(&config_text).unwrap();
    config["simulation"]["equilibrium_from"] =
        serde_json::Value::String(solve_dir.to_string_lossy().into_owned());
    let load_config = tmp.path().join("load.json");
    std::fs::write(&load_config, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    let out = run_in(&dir_a, "nash-gap", &fixture("decoupled.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_in(&dir_b, "nash-gap", &load_config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // The CSV artifacts round-trip floats exactly, so the loaded
    // equilibrium reproduces the in-run gap table byte for byte.
    assert_eq!(
        read(&dir_a.join("gaps.csv")),
        read(&dir_b.join("gaps.csv"))
    );
}

#[test]
fn nash_gap_load_mode_names_missing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config_text = read(&fixture("decoupled.json"));
    let mut config: serde_json::Value = serde_json::from_str(&config_text).unwrap();
    let missing = tmp.path().join("nowhere");
    config["simulation"]["equilibrium_from"] =
        serde_json::Value::String(missing.to_string_lossy().into_owned());
    let load_config = tmp.path().join("load.json");
    std::fs::write(&load_config, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let out = run_in(&tmp.path().join("out"), "nash-gap", &load_config, &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("summary.json"),
        "missing artifact not named: {stderr}"
    );
}

#[test]
fn graphon_constant_kernel_gives_zero_norms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "graphon", &fixture("graphon_ones.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&read(&tmp.path().join("cutnorm.csv")));
    // Three seeds, heuristic and exact rows each at n = 8.
    assert_eq!(rows.len(), 6);
    let count = |m: &str| rows.iter().filter(|r| r[2] == m).count();
    assert_eq!(count("heuristic"), 3);
    assert_eq!(count("exact"), 3);
    for row in &rows {
        let value: f64 = row[3].parse().unwrap();
        assert_eq!(value, 0.0);
    }
}

#[test]
fn graphon_artifacts_carry_witnesses() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("g.json");
    std::fs::write(
        &config,
        r#"{ "graphon": { "kernel": "product", "sizes": [6], "n_seeds": 1,
                          "seed": 4, "restarts": 4, "write_artifacts": true } }"#,
    )
    .unwrap();
    let out = run_in(tmp.path(), "graphon", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let matrix = read(&tmp.path().join("sample_n6_s4.csv"));
    assert_eq!(matrix.lines().count(), 6);
    assert_eq!(matrix.lines().next().unwrap().split(',').count(), 6);

    let norms: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("norms_n6_s4.json"))).unwrap();
    assert!(norms["heuristic"]["witness"]["rows"].is_array());
    let h = norms["heuristic"]["value"].as_f64().unwrap();
    let e = norms["exact"]["value"].as_f64().unwrap();
    assert!(h <= e + 1e-12, "heuristic {h} above exact {e}");
}

#[test]
fn graphon_dual_method_rows_keep_heuristic_below_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("g8.json");
    std::fs::write(
        &config,
        r#"{ "graphon": { "kernel": "product", "sizes": [8], "n_seeds": 5,
                          "seed": 40, "restarts": 16 } }"#,
    )
    .unwrap();
    let out = run_in(tmp.path(), "graphon", &config, &[]);
    assert!(out.status.success());
    let rows = csv_rows(&read(&tmp.path().join("cutnorm.csv")));
    assert_eq!(rows.len(), 10);
    for seed in 40..45 {
        let value = |method: &str| -> f64 {
            rows.iter()
                .find(|r| r[1] == seed.to_string() && r[2] == method)
                .unwrap()[3]
                .parse()
                .unwrap()
        };
        let (h, e) = (value("heuristic"), value("exact"));
        assert!(h <= e + 1e-12, "seed {seed}: heuristic {h} above exact {e}");
        assert!(e > 0.0, "seed {seed}: degenerate sample");
    }
}

#[test]
fn graphon_medians_decay_with_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "graphon", &fixture("graphon.json"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&read(&tmp.path().join("cutnorm.csv")));
    let median = |n: &str| -> f64 {
        let mut vals: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == n && r[2] == "heuristic")
            .map(|r| r[3].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 20);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        0.5 * (vals[9] + vals[10])
    };
    let m32 = median("32");
    let m256 = median("256");
    assert!(m256 < m32, "medians {m32} -> {m256}");
    assert!(m256 <= 0.25);
}

#[test]
fn check_monotone_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "check-monotone", &fixture("monotone_local.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("monotone.json"))).unwrap();
    assert!(doc["min_value"].as_f64().unwrap() >= -1e-10);

    let tmp2 = tempfile::tempdir().unwrap();
    let out = run_in(tmp2.path(), "check-monotone", &fixture("antimonotone.json"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let doc: serde_json::Value =
        serde_json::from_str(&read(&tmp2.path().join("monotone.json"))).unwrap();
    assert!(doc["min_value"].as_f64().unwrap() < -1e-10);
    assert!(doc["report_f"]["violation"].is_object(), "witness recorded");
}

#[test]
fn check_monotone_zero_interaction_is_exactly_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("zero.json");
    std::fs::write(
        &config,
        r#"{
        "model": {
            "states": 2,
            "time": { "horizon": 1.0, "steps": 10 },
            "atlas": { "uniform": 1 },
            "cost": { "theta": { "constant": 1.0 } },
            "initial_density": { "uniform": true }
        }
    }"#,
    )
    .unwrap();
    let out = run_in(&tmp.path().join("out"), "check-monotone", &config, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("out/monotone.json"))).unwrap();
    assert_eq!(doc["min_value"].as_f64().unwrap(), 0.0);
}

#[test]
fn dump_normalized_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture("decoupled.json").to_string_lossy().into_owned();
    let first = run(&["solve", &config, "--dump-normalized"]);
    assert!(first.status.success());
    let normalized = tmp.path().join("normalized.json");
    std::fs::write(&normalized, &first.stdout).unwrap();
    let second = run(&[
        "solve",
        normalized.to_string_lossy().as_ref(),
        "--dump-normalized",
    ]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn reruns_are_byte_identical_outside_the_summary_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    for dir in [&dir_a, &dir_b] {
        let out = run_in(dir, "solve", &fixture("monotone_local.json"), &["--threads", "1"]);
        assert!(out.status.success());
    }
    for file in ["value.csv", "flow.csv", "policy.csv"] {
        assert_eq!(read(&dir_a.join(file)), read(&dir_b.join(file)), "{file}");
    }
    let mut a: serde_json::Value =
        serde_json::from_str(&read(&dir_a.join("summary.json"))).unwrap();
    let mut b: serde_json::Value =
        serde_json::from_str(&read(&dir_b.join("summary.json"))).unwrap();
    for doc in [&mut a, &mut b] {
        doc["wall_time_seconds"] = serde_json::json!(0);
        doc["timestamp_unix"] = serde_json::json!(0);
    }
    assert_eq!(a, b);
}

#[test]
fn simulate_writes_costs_and_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let config_text = read(&fixture("decoupled.json"));
    let mut config: serde_json::Value = serde_json::from_str(&config_text).unwrap();
    config["simulation"]["write_trajectories"] = serde_json::Value::Bool(true);
    config["simulation"]["n_runs"] = serde_json::json!(50);
    let path = tmp.path().join("sim.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let dir = tmp.path().join("out");
    let out = run_in(&dir, "simulate", &path, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let costs = read(&dir.join("costs.csv"));
    assert!(costs.starts_with("player,position,total,se,running_control,interaction,terminal"));
    assert_eq!(csv_rows(&costs).len(), 6);

    let trajectories = read(&dir.join("trajectories.csv"));
    assert!(trajectories.starts_with("run,player,time,state"));
    // 50 runs x 6 players at least have their initial rows.
    assert!(csv_rows(&trajectories).len() >= 300);

    // Same seed, fresh directory: identical cost table.
    let dir2 = tmp.path().join("out2");
    let out = run_in(&dir2, "simulate", &path, &[]);
    assert!(out.status.success());
    assert_eq!(read(&dir.join("costs.csv")), read(&dir2.join("costs.csv")));
}

#[test]
fn seed_override_changes_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    let out = run_in(&dir_a, "nash-gap", &fixture("decoupled.json"), &[]);
    assert!(out.status.success());
    let out = run_in(&dir_b, "nash-gap", &fixture("decoupled.json"), &["--seed", "999"]);
    assert!(out.status.success());
    assert_ne!(read(&dir_a.join("gaps.csv")), read(&dir_b.join("gaps.csv")));
}
