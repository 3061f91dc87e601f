use std::fmt;

/// Errors raised by estimators and pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub enum HosdError {
    /// Input violates a documented precondition (shape, range, finiteness).
    InvalidInput(String),
    /// Two inputs that must share dimensions do not.
    DimensionMismatch { expected: usize, actual: usize },
    /// A statistic is undefined on this input (too few samples, zero variance).
    Degenerate(String),
}

impl fmt::Display for HosdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HosdError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            HosdError::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            HosdError::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
        }
    }
}

impl std::error::Error for HosdError {}

pub type HosdResult<T> = Result<T, HosdError>;
