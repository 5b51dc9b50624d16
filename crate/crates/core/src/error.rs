use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Format,
    Runtime,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Validation => 2,
            ErrorCategory::Format => 3,
            ErrorCategory::Runtime => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: String,
        actual: String,
    },

    #[error("power coefficient q[{index}] = {value} lies outside [0, 1]")]
    PowerOutOfRange { index: usize, value: f64 },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("feasibility undecided at SINR target {target:e} after {iterations} fixed-point iterations")]
    Undecided {
        target: f64,
        iterations: usize,
        /// Bisection trace up to the failing step, as `(target, feasible)` pairs.
        trace: Vec<(f64, bool)>,
    },

    #[error("{0} already exists (use --force to overwrite)")]
    AlreadyExists(PathBuf),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dimension(what: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            what,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::Dimension { .. }
            | Error::PowerOutOfRange { .. }
            | Error::AlreadyExists(_)
            | Error::MissingArtifact(_) => ErrorCategory::Validation,
            Error::Format { .. } => ErrorCategory::Format,
            Error::Undecided { .. } | Error::Io(_) => ErrorCategory::Runtime,
        }
    }
}
