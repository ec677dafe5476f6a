//! Experiment runner for hyperspherical vMF diffusion: configuration, synthetic
//! and CSV datasets, seeded parallel sampling, metrics and report emission.

pub mod chains;
pub mod commands;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
