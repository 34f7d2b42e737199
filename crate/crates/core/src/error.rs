use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant onto an exit code.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// The tree description is not a valid (canonical) metric tree.
    #[error("invalid tree: {0}")]
    Structural(String),
    /// The inputs are well formed but violate an operation's precondition.
    #[error("{0}")]
    Domain(String),
    /// A fraction, identifier or document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// The brute-force oracle refuses inputs above its size cap.
    #[error("input too large for exhaustive enumeration: {0}")]
    Oversize(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
