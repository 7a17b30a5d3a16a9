use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HanError> = std::result::Result<T, E>;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum HanError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("token id {id} at position {position} is outside vocabulary of size {size}")]
    Index {
        position: usize,
        id: usize,
        size: usize,
    },

    #[error("state error: {0}")]
    State(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HanError {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        HanError::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HanError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, HanError::Io { .. } | HanError::NonFinite(_) | HanError::State(_))
    }
}
