use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncation insufficient: order {needed} required, operator/sequence carries {available}")]
    Truncation { needed: u32, available: u32 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("operator is not degree preserving: {0}")]
    NotInAlgebra(String),

    #[error("operator is not invertible: {0}")]
    NotInvertible(String),

    #[error("matrix is singular")]
    Singular,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
