//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (header, CSV, config).
    #[error("parse error: {0}")]
    Parse(String),

    /// A documented precondition was violated by the caller.
    #[error("{0}")]
    Contract(String),

    /// Input is numerically degenerate (zero variance, rank deficiency).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Array extents do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    /// Too many ranker cells failed during ensemble ranking.
    #[error("ensemble ranking aborted: {failed} of {total} ranker cells failed")]
    EnsembleFailure { failed: usize, total: usize },

    /// Pipeline stage wrapper so callers can see where a run died.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
