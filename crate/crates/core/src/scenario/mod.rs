//! Scenario configs, the end-to-end runner, run reports and trace files.

mod config;
mod invariants;
mod report;
mod trace;
mod world;

pub use config::{NodeCounts, ScenarioConfig, ScenarioEvent, SCHEMA_VERSION};
pub use invariants::{check_invariants, InvariantVerdict, INVARIANTS};
pub use report::{analyze, run, BillingSummary, RunOutcome, RunReport};
pub use trace::{read_trace, replay, write_trace, Trace, TraceError};
pub use world::{slave_label, SessionSummary, World};

use thiserror::Error;

use crate::directory::DirectoryError;
use crate::manager::ManagerError;
use crate::simnet::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{}parse error: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Directory(#[from] DirectoryError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error("job: {0}")]
    Job(String),
}
