//! Experiment runner for `autodrop-core`: flat TOML configs in, CSV curves,
//! a manifest and a plotting script out.
//!
//! Exit status of the binary: 0 success, 1 I/O failure, 2 invalid
//! configuration, 3 non-finite numbers in an output curve.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;
pub mod run;
pub mod table;

pub use config::{ExperimentConfig, Kind, Params};
pub use error::{CliError, CliResult};
pub use run::{execute, RunSummary};
