use thiserror::Error;

/// Errors raised anywhere in the evaluation pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },

    #[error("jet order exhausted: need order {needed}, have {available}")]
    OrderExhausted { needed: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("division by a jet with zero value")]
    ZeroDivision,

    #[error("{op} of a jet with value {value} is undefined")]
    OutOfDomain { op: &'static str, value: f64 },

    #[error("singular matrix (pivot {0:e})")]
    Singular(f64),

    #[error("point outside chart domain: {0}")]
    ChartDomain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("excluded parameter value: {0}")]
    Excluded(String),

    #[error("missing connection for slot kind {0}")]
    MissingConnection(&'static str),

    #[error("field is not parallel (residual {0:e})")]
    NotParallel(f64),

    #[error("asymptotic coefficient does not vanish (residual {0:e})")]
    Asymptotics(f64),

    #[error("unknown catalog entry or check: {0}")]
    Unknown(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
