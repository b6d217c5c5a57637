//! Benchmark harness around `zsbench-core`: dataset files, LLM providers,
//! experiment configs, run directories and reports.

pub mod config;
pub mod dataset;
pub mod llm;
pub mod report;
pub mod runner;

pub use config::{validate_config, ExperimentConfig};
pub use runner::{run_experiment, ExperimentResult, RunOptions};
