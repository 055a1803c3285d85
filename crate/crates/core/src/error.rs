use thiserror::Error;

use crate::strings::BinaryString;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not a member of the tree")]
    NotAMember(BinaryString),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("inconsistent axioms #{first} and #{second}: {detail}")]
    Inconsistent {
        first: usize,
        second: usize,
        detail: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("insufficient depth: {0}")]
    Depth(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("thinness violated: {0}")]
    Thinness(String),

    #[error("internal invariant failure: {0}")]
    Internal(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("unknown command: {0}")]
    UnknownCommand(String),
}
