use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite quasi-likelihood contribution at t={t}")]
    NumericOverflow { t: usize },

    #[error("numeric failure at entry ({row},{col}): {what}")]
    Numeric {
        row: usize,
        col: usize,
        what: &'static str,
    },

    #[error("fit failed for {spec}: {reason}")]
    FitFailure { spec: String, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {msg}")]
    Input { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FitFailure { .. }
            | Error::Calibration(_)
            | Error::NumericOverflow { .. }
            | Error::Numeric { .. }
            | Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
