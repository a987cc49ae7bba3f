use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline.
///
/// The variants group into three classes that the CLI maps onto exit
/// statuses: usage problems, data/validation problems and numerical
/// failures (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    Magic { path: PathBuf, expected: String, found: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("integration diverged at step {step}{}", trajectory.map(|t| format!(" of trajectory {t}")).unwrap_or_default())]
    Divergence { step: usize, trajectory: Option<usize> },

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("no sampled trajectory matched the first {k} tokens ({drawn} drawn); increase the sample budget or reduce k")]
    NoAcceptance { k: usize, drawn: usize },

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 usage, 2 data/validation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Unsupported(_)
            | Error::Domain(_)
            | Error::Length(_)
            | Error::Shape(_)
            | Error::Magic { .. }
            | Error::Format { .. }
            | Error::Io { .. } => 2,
            Error::Divergence { .. } | Error::NonFinite { .. } | Error::NoAcceptance { .. } | Error::Solver(_) => 3,
        }
    }
}
