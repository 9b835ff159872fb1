//! Experiment drivers behind the `cornerflow` binary.
//!
//! Each command writes its files into the configured output directory and
//! returns its data together with the checks it embeds; the binary turns
//! failed checks into exit code 2 and errors into exit code 1.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{green_validate, kernel_decay, ratio_sweep, simulate_growth};
pub use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] cornerflow::Error),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// One embedded pass/fail check, labelled by the criterion it enforces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub criterion: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(criterion: &'static str, passed: bool, detail: String) -> Self {
        Check {
            criterion,
            passed,
            detail,
        }
    }
}

/// Checks that did not pass.
pub fn failures(checks: &[Check]) -> Vec<&Check> {
    checks.iter().filter(|c| !c.passed).collect()
}
