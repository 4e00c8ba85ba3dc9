//! Batch command harness for the visibility-domain RFI mitigation pipeline.

pub mod cli;
pub mod cmd;
pub mod config;
pub mod error;
pub mod fields;

pub use config::{Method, RunConfig, RunRecord};
pub use error::{CliError, Result};
