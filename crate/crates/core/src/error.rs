use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgsmError {
    /// Malformed caller input: bad indices, dimension mismatches, invalid parameters.
    #[error("invalid input: {0}")]
    Input(String),

    /// Two values that must describe the same object disagree.
    #[error("inconsistent state: {0}")]
    Consistency(String),

    /// A numerical routine broke down (non-SPD matrix, all-zero weights, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An exhaustive enumeration was requested beyond its hard size bound.
    #[error("{what} of size {size} exceeds the enumeration bound {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    /// A caller broke a documented precondition of an internal contract.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T, E = PgsmError> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(PgsmError::Input(msg.into()))
}
