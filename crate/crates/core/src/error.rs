use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid horizon {0}: must be finite and strictly positive")]
    InvalidHorizon(f64),

    #[error("matrix exponential overflowed: horizon too long for these dynamics")]
    Overflow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not an allocation on the simplex: {0}")]
    NotOnSimplex(String),

    #[error("infeasible allocation: aggregate Gramian is singular (lambda_min = {lambda_min:e})")]
    Infeasible { lambda_min: f64 },

    #[error("task mode mismatch: {0}")]
    ModeMismatch(String),

    #[error(
        "inconsistent moments: displacement covariance has lambda_min = {lambda_min:e} (lambda_max = {lambda_max:e})"
    )]
    InconsistentMoments { lambda_min: f64, lambda_max: f64 },

    #[error("direction is not tangent to the simplex: sum = {0:e}")]
    NotTangent(f64),

    #[error("line search stagnated at iteration {iteration}: no admissible step")]
    Stagnation { iteration: usize },

    #[error("grid oracle supports n <= 4, got n = {0}")]
    GridTooLarge(usize),

    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    NonConvergence,
    Infeasible,
    Schema,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Io => 1,
            ErrorCategory::NonConvergence => 2,
            ErrorCategory::Infeasible => 3,
            ErrorCategory::Schema => 4,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } | Error::Parse { .. } => ErrorCategory::Io,
            Error::Stagnation { .. } => ErrorCategory::NonConvergence,
            Error::Infeasible { .. } | Error::Overflow => ErrorCategory::Infeasible,
            _ => ErrorCategory::Schema,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
