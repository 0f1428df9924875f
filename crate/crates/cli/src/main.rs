use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lrmfg_cli::commands::{
    cmd_check_monotone, cmd_graphon, cmd_nash_gap, cmd_simulate, cmd_solve, Overrides,
};
use lrmfg_cli::config::parse_config;

/// Solver and simulation toolkit for long-range mean field games.
#[derive(Parser)]
#[command(name = "lrmfg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (overrides the config's output block).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap on worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed override for simulation, graphon and monotonicity sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the normalized configuration (defaults filled in) and exit.
    #[arg(long, global = true)]
    dump_normalized: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium system and write value/flow/policy tables.
    Solve { config: PathBuf },
    /// Simulate the finite-player game under the equilibrium feedback.
    Simulate { config: PathBuf },
    /// Estimate per-player Nash gaps (optionally sweeping player counts).
    NashGap { config: PathBuf },
    /// Sample random kernels and tabulate cut-norm convergence.
    Graphon { config: PathBuf },
    /// Sample the monotonicity pairing of the configured interactions.
    CheckMonotone { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error if a pool already exists (repeated calls in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let config_path = match &cli.command {
        Command::Solve { config }
        | Command::Simulate { config }
        | Command::NashGap { config }
        | Command::Graphon { config }
        | Command::CheckMonotone { config } => config.clone(),
    };

    let config = match parse_config(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    if cli.dump_normalized {
        println!(
            "{}",
            serde_json::to_string_pretty(&config).expect("config serialization")
        );
        return ExitCode::SUCCESS;
    }

    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Solve { .. } => cmd_solve(&config, &config_path, &overrides),
        Command::Simulate { .. } => cmd_simulate(&config, &config_path, &overrides),
        Command::NashGap { .. } => cmd_nash_gap(&config, &config_path, &overrides),
        Command::Graphon { .. } => cmd_graphon(&config, &config_path, &overrides),
        Command::CheckMonotone { .. } => cmd_check_monotone(&config, &config_path, &overrides),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
