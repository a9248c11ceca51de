//! Crate-wide error type. Every fallible operation returns [`Result`].

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("mode mismatch: operands carry different value modes")]
    ModeMismatch,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("resolution violation: {0}")]
    ResolutionViolation(String),
    #[error("misaligned input: {0}")]
    Misaligned(String),
    #[error("absolute continuity violation at cell {0}")]
    AbsoluteContinuityViolation(String),
    #[error("singular matrix")]
    SingularMatrix,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty truncation window")]
    EmptyWindow,
    #[error("inconsistent weak distribution: {0}")]
    InconsistentWeakDistribution(String),
    #[error("value-group rounding is ambiguous within the pi^2 enclosure")]
    EnclosureAmbiguous,
    #[error("work cap exceeded: {0}")]
    CapExceeded(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
