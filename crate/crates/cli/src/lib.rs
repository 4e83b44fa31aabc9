//! Batch front end: configuration, study orchestration and result files.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::Report;
pub use config::{StudyConfig, CONFIG_ENV};
pub use error::CliError;
