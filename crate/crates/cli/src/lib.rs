//! Experiment runner: reads a JSON config, builds a catalog example or an
//! inline flow, runs one operation and writes a CSV or JSON report.

pub mod config;
pub mod run;

pub use config::{emit_config, parse_config, ConfigError, ExperimentConfig, Operation};
pub use run::{execute, run_to, write_report, Report, RunError};
