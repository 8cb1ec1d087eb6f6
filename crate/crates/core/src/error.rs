use thiserror::Error;

use crate::operators::ChecklistFailure;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("index {index} out of range for grid of {size} nodes")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("modulus not certifiable: {reason}")]
    NotCertifiable { reason: String },
    #[error("{0}")]
    Checklist(ChecklistFailure),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("region mismatch: {0}")]
    RegionMismatch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
