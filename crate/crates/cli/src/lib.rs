//! Experiment runner: config parsing, subcommand pipelines, and SVG output.

pub mod config;
mod error;
pub mod figure;
pub mod pipeline;
pub mod plot;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use pipeline::{run, Command};
