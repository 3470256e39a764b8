use thiserror::Error;

/// Errors raised by the signal models, solvers and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch { context: &'static str, expected: String, actual: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e} below tolerance)")]
    NotPsd { eigenvalue: f64 },

    #[error("noise covariance is singular: receive amplitudes are all zero")]
    DegenerateCovariance,

    #[error("unknown grid index {index} (grid has {grid_len} directions)")]
    UnknownGrid { index: usize, grid_len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch { context, expected: expected.to_string(), actual: actual.to_string() }
    }

    /// Configuration problems map to exit code 2, numerical ones to 3.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParameter(_) | Error::UnknownGrid { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
