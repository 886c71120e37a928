use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Error)]
pub enum SpbeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for size {size} (component {component})")]
    OutOfRange {
        component: usize,
        index: usize,
        size: usize,
    },

    #[error("time {t} outside valid range {lo}..={hi}")]
    TimeRange { t: usize, lo: usize, hi: usize },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("game specification failed validation with {} violation(s)", .0.violations.len())]
    Validation(crate::game::ValidationReport),

    #[error("cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded { what: String, needed: u128, cap: u128 },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SpbeError>;
