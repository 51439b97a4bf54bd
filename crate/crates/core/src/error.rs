use thiserror::Error;

use crate::icrbi::IcrbiTrace;
use crate::model::{Assignment, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A frequency at or below the task's minimum `F / T_max` was passed to a
    /// transmit-power function.
    #[error("frequency {freq} is outside the domain (must exceed {f_min})")]
    Domain { freq: f64, f_min: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("assignment violates {} constraint(s): {}", .0.len(), summarize(.0))]
    InfeasibleAssignment(Vec<Violation>),

    #[error("task {task} cannot be served by device {device} under current residual budgets")]
    InfeasiblePair { task: usize, device: usize },

    #[error("dual iteration did not converge within {} iterations", .0.trace.len())]
    NonConvergence(Box<NonConvergence>),

    #[error("brute-force enumeration is limited to {max} tasks, got {got}")]
    InstanceTooLarge { got: usize, max: usize },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("{0}")]
    Harness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

/// Payload of [`Error::NonConvergence`]: the full trace plus the best
/// feasible assignment seen before the iteration budget ran out.
#[derive(Debug)]
pub struct NonConvergence {
    pub trace: IcrbiTrace,
    pub best: Assignment,
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
