use thiserror::Error;

use crate::solver::SolverStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario violates one of its physical or system invariants.
    #[error("invalid scenario: {rule}{}", detail_suffix(.detail))]
    InvalidScenario { rule: &'static str, detail: String },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid blocklength plan: {0}")]
    InvalidPlan(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("failed to parse scenario file {path}: {message}")]
    Parse { path: String, message: String },

    #[error("degenerate subproblem: {0}")]
    Degenerate(String),

    #[error("solver returned {status:?}: {message}")]
    Solver { status: SolverStatus, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A validation run found a property that should hold but does not.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn detail_suffix(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(" ({detail})")
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn scenario(rule: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidScenario {
            rule,
            detail: detail.into(),
        }
    }
}
