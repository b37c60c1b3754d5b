use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative entry {value} at ({}, {})", index.0, index.1)]
    NegativeEntry { index: (usize, usize), value: f64 },

    #[error("margin mismatch on axis {axis} at index {index}: residual {residual:e}")]
    MarginMismatch {
        axis: usize,
        index: usize,
        residual: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector sums to {sum}, outside the renormalization tolerance")]
    NotNormalized { sum: f64 },

    #[error("basic move needs x1 != x2 and y1 != y2")]
    DegenerateIndices,

    #[error("table is not a move: worst margin residual {residual:e}")]
    NotAMove { residual: f64 },

    #[error("not a simple move: {0}")]
    NotSimple(String),

    #[error("cost matrix is not a metric: {0}")]
    NotMetric(String),

    #[error("invalid interval: need 0 <= s <= t <= 1, got s={s}, t={t}")]
    InvalidInterval { s: f64, t: f64 },

    #[error("solver hit the iteration cap of {0} cycle cancellations")]
    NonConvergence(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
