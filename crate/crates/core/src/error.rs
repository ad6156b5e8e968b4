use thiserror::Error;

/// Errors raised by channel loading, validation and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("column for input tuple {tuple:?} sums to {sum} (worst column)")]
    ColumnSum { tuple: Vec<usize>, sum: f64 },

    #[error("output symbol {row} has zero probability for every input tuple")]
    ZeroRow { row: usize },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: String, found: String },

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("guard exceeded: {points} grid points > limit {limit}; {diagnostic}")]
    GuardExceeded {
        points: u128,
        limit: u128,
        diagnostic: String,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
