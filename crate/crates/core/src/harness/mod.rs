//! Experiment runner, invariant suites and trajectory tables.

mod config;
mod experiment;
pub mod sampling;
mod table;
mod verify;

pub use config::{ExperimentConfig, InitMagnitudes, Preset, TableFormat};
pub use experiment::{run_experiment, run_experiment_with_pair, DepthRun, OracleSummary, RunArtifact};
pub use table::{emit_table, parse_table, read_table_file, TABLE_FIXED_COLUMNS};
pub use verify::{verify_suite, CheckResult, Scope, VerificationReport};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed table: {message}")]
    Table { path: PathBuf, message: String },
    #[error(transparent)]
    Numerical(#[from] crate::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
