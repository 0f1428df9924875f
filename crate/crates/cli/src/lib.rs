//! Configuration ingestion, experiment orchestration and result emission
//! for the long-range mean field game toolkit. The configuration schema
//! is documented in [`config`]; the exit-code contract in [`error`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
