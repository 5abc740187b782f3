//! Batch front end for wanelab: config parsing, experiment dispatch and
//! result artifacts.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{validate_config, Experiment, ExperimentConfig};
pub use experiments::{run_experiment, Outcome, Verdict};
