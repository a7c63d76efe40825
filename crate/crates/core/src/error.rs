use alloc::string::String;

/// Errors raised by the inference and control routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("all incremental weights are zero at step {step}")]
    Degenerate { step: usize },
    #[error("joint state space of size {size} exceeds the cap of {cap}")]
    Capacity { size: usize, cap: usize },
    #[error("transition matrix is not irreducible")]
    Reducible,
    #[error("evaluation point is a pole of the transfer function")]
    Pole,
    #[error("value out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidParameter(String::from(msg))
}
