use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("line count mismatch: {left_label} has {left} lines, {right_label} has {right}")]
    LengthMismatch {
        left_label: String,
        left: usize,
        right_label: String,
        right: usize,
    },

    #[error("invalid language code {0:?}: expected 2-8 lowercase ASCII letters")]
    LangCode(String),

    #[error("pair {index}: {message}")]
    Pair { index: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("external command `{command}` failed: {message}")]
    Command { command: String, message: String },

    #[error("{0}")]
    Manifest(String),

    #[error("invalid manifest:\n  {}", .0.join("\n  "))]
    InvalidManifest(Vec<String>),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn pair(index: usize, msg: impl Into<String>) -> Self {
        Error::Pair {
            index,
            message: msg.into(),
        }
    }
}
