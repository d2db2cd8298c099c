//! Experiment harness for the `cubicqn` solvers: TOML configs, parallel runs,
//! CSV traces and SVG convergence plots.

pub mod check;
pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, write_outputs, BenchError, ExperimentOutput, RunSummary};
