//! Experiment runner for the `dppca` command: TOML configs in, CSV results
//! and a JSON manifest out.

pub mod config;
pub mod error;
pub mod results;
pub mod runner;
pub mod summary;

pub use config::{Algorithm, ExperimentConfig, CONFIG_SCHEMA};
pub use error::CliError;
pub use results::ResultRow;
pub use runner::{run_experiment, Manifest};
