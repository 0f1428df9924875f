//! CLI errors carrying the process exit code.
//!
//! Exit-code contract: 0 success, 1 invalid input or I/O failure,
//! 2 solver non-convergence, 3 monotonicity violation. CI pipelines can
//! gate on each outcome separately.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    ConfigSyntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    ConfigInvalid { path: PathBuf, message: String },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("missing equilibrium artifact {path} (run `lrmfg solve` first)")]
    MissingArtifact { path: PathBuf },

    #[error("malformed equilibrium artifact {path}: {message}")]
    MalformedArtifact { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] lrmfg::Error),

    #[error("solver did not converge within {iterations} iterations (final residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("interaction failed the monotonicity check (min sampled pairing {min_value:.3e})")]
    NotMonotone { min_value: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => 2,
            CliError::NotMonotone { .. } => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
