//! Configuration, orchestration and reporting for the `towb` binary.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Command, RunError};
pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use report::Report;
