//! Command-line surface of cavsim: configuration files, single-instance
//! solves, simulation runs and their exported artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;

pub use commands::{dispatch, Cli};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
