//! Batch commands and the HTTP service around the selection engine.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;

pub use commands::{run, run_from, selection_document, Cli};
pub use config::RunConfig;
pub use error::{CliError, ExitStatus};
