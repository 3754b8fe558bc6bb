use std::io;

use thiserror::Error;

/// Errors produced by the simulator, learners and oracles.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration failed validation; one entry per violated invariant.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    /// Internal state no longer satisfies its invariants.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// A gradient, loss or metric became NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
