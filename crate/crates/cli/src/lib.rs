//! Experiment runner for the split-merge samplers: configuration, datasets,
//! replicate chains, trace files and oracle checks.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod seeding;
pub mod trace;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
