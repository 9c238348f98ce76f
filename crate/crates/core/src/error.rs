use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument; `field` names what was wrong.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("timestep {t} out of range [1, {steps}]")]
    TimestepOutOfRange { t: usize, steps: usize },

    #[error("class {class} out of range (model has {num_classes} classes)")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("covariance of class {class} is not symmetric positive definite")]
    SingularCovariance { class: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite training loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("checkpoint: bad magic")]
    BadMagic,

    #[error("checkpoint: version mismatch (found {found}, expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint: truncated payload at byte offset {offset}")]
    TruncatedPayload { offset: usize },

    #[error("checkpoint: malformed header: {0}")]
    MalformedHeader(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::ClassOutOfRange { .. }
            | Error::TimestepOutOfRange { .. }
            | Error::ShapeMismatch { .. }
            | Error::Unsupported(_) => 2,
            Error::SingularCovariance { .. } | Error::Numeric(_) | Error::NonFiniteLoss { .. } => 3,
            _ => 1,
        }
    }
}
