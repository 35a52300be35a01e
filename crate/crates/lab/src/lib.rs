//! Experiment runner for `bsvi-core`: JSON configurations, a scenario
//! registry, reproducible runs with CSV/JSON artifacts, and convergence sweeps.

pub mod config;
pub mod error;
pub mod registry;
pub mod runner;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
