//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown axis {0}")]
    UnknownAxis(String),

    #[error("duplicate axis {0}")]
    DuplicateAxis(String),

    #[error("axis sets overlap on {0}")]
    OverlappingAxes(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidPmf(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("non-integer composition: {0}")]
    Composition(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
