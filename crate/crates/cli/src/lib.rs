//! Front end for ictlab: config files, run orchestration and artifact
//! writers.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, ConfigError, ExperimentConfig};
