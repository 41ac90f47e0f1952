use std::io;

use thiserror::Error;

/// Errors raised by estimation, data generation, verification and I/O.
#[derive(Debug, Error)]
pub enum SlsError {
    /// A Cholesky pivot fell below the relative threshold; the design is
    /// (numerically) rank deficient.
    #[error("Gram matrix is singular: pivot {pivot:e} at column {column} is below threshold {threshold:e}")]
    SingularGram {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    /// The scale equation has no sign change for `0 < |c| <= c_max`.
    #[error("no root of the scale equation in (0, {c_max}]")]
    NoRootInRange { c_max: f64 },

    /// The empirical scale function evaluated to NaN or infinity.
    #[error("scale function is not finite at c = {c}")]
    NonFiniteScale { c: f64 },

    /// A ground-truth or population direction has zero norm, or the mean
    /// link derivative vanishes.
    #[error("degenerate direction {index}: {reason}")]
    DegenerateDirection { index: usize, reason: String },

    #[error("need at least {needed} distinct sweep values, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("malformed dataset file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SlsError {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        SlsError::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SlsError>;
