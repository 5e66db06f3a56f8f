use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular or near-singular matrix in {context} ({detail})")]
    Singular { context: &'static str, detail: String },

    #[error("equalizer eigenvalue {value:e} below the reachable floor {floor:e}")]
    BelowFloor { value: f64, floor: f64 },

    #[error(
        "mean SINR {mean_sinr_db:.3} dB is not below the implementation penalty {snr_imp_db:.3} dB"
    )]
    PenaltyDominates { mean_sinr_db: f64, snr_imp_db: f64 },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Coarse failure class, used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) => ErrorKind::Config,
            Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::File { .. }
            | Error::Io(_) => ErrorKind::Data,
            Error::NonFinite(_)
            | Error::Singular { .. }
            | Error::BelowFloor { .. }
            | Error::PenaltyDominates { .. }
            | Error::Divergence(_)
            | Error::FitFailed(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}
