use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("coordinate magnitude {0} lies beyond the largest supported ring")]
    ScaleOverflow(f64),

    #[error("index {index} out of range {min}..={max}")]
    OutOfRange { index: usize, min: usize, max: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bicausal LP has {pairs} leaf pairs, above the cap of {cap}")]
    OracleCapExceeded { pairs: usize, cap: usize },

    #[error(
        "node-pair budget exceeded at level {level}: {left} x {right} = {pairs} > {budget}"
    )]
    BudgetExceeded {
        level: usize,
        left: usize,
        right: usize,
        pairs: u64,
        budget: u64,
    },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
