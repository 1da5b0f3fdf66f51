//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while loading data, building models, training
/// or evaluating.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{entity} index {index} out of range (size {size})")]
    IndexOutOfRange {
        entity: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("diffusion step {t} outside 1..={t_max}")]
    StepOutOfRange { t: usize, t_max: usize },

    #[error("invalid value for {name}: {reason}")]
    InvalidValue { name: String, reason: String },

    #[error("{context} produced a non-finite value")]
    NonFinite { context: String },

    #[error("checkpoint {path} is malformed: {reason}")]
    MalformedCheckpoint { path: String, reason: String },
}

impl Error {
    /// Shorthand for an [`Error::InvalidValue`] with formatted arguments.
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
