use thiserror::Error;

/// Errors produced by the localization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("noise sample kept producing a non-positive range after {retries} retries")]
    NonPositiveRange { retries: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("row {0} has zero norm")]
    DegenerateRow(usize),

    #[error("matrix diagonal is not unit (max deviation {0:e})")]
    NotUnitDiagonal(f64),

    #[error("matrix is not on the boundary of the elliptope (det residual {0:e})")]
    NotBoundary(f64),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("SDP is infeasible")]
    Infeasible,

    #[error("SDP is unbounded")]
    Unbounded,

    #[error("SDP solver numerical failure: {0}")]
    NumericalFailure(String),

    #[error("malformed problem: {0}")]
    MalformedProblem(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
