//! Command-line driver for the `hkfp` solvers: configuration handling,
//! run orchestration and CSV/JSON output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
