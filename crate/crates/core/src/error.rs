use thiserror::Error;

use crate::lft::Violation;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("precision exhausted")]
    PrecisionExhausted,

    #[error("division by zero at available precision")]
    DivisionByZero,

    #[error("operands use different primes ({0} and {1})")]
    PrimeMismatch(u64, u64),

    #[error("invalid ball: {0}")]
    InvalidBall(String),

    #[error("invalid digit: {0}")]
    InvalidDigit(String),

    #[error("transformation is not hyperbolic: {0}")]
    NotHyperbolic(Violation),

    #[error("invalid transformation parameters: {0}")]
    InvalidParams(String),

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {completed} of {requested} observations completed")]
    InsufficientData { completed: u64, requested: u64 },

    #[error("word too short: n = {n} is smaller than |B| = {len}")]
    WordTooShort { n: usize, len: usize },

    #[error("incompatible words: {0}")]
    IncompatibleWords(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
