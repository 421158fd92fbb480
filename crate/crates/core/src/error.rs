use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("multi-index {xi:?} has degree {degree} above the declared maximum {max_degree}")]
    DegreeOutOfRange {
        xi: Vec<usize>,
        degree: usize,
        max_degree: usize,
    },

    #[error("sequence of length {len} is too short for a difference of order {order}")]
    InsufficientLength { len: usize, order: usize },

    #[error("sample count {got} does not match the {expected} nodes of level {level}")]
    SampleCount {
        level: usize,
        expected: usize,
        got: usize,
    },

    #[error("level {level} needs {nodes} nodes, above the budget of {budget}")]
    Budget {
        level: usize,
        nodes: usize,
        budget: usize,
    },

    #[error("tridiagonal eigensolver did not converge for matrix of size {size}")]
    NonConvergence { size: usize },

    #[error("node index {index:?} is not valid for level {level}")]
    InvalidNode { level: usize, index: Vec<usize> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("derivative of order {order} is not available: {reason}")]
    DerivativeUnavailable { order: usize, reason: String },

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}, line {line}: {message}")]
    Csv {
        context: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
