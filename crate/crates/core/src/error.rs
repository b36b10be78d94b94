use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions do not compose.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A NaN or infinity was produced or supplied.
    #[error("non-finite value: {0}")]
    Numeric(String),

    /// An input violates an operation's documented contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
