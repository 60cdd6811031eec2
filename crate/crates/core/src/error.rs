use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed PLY header at byte {offset}: {reason}")]
    PlyHeader {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("{path}: missing required vertex property `{property}`")]
    PlyMissingProperty { path: PathBuf, property: String },

    #[error("{path}: truncated PLY body, expected {expected} bytes, found {found}")]
    PlyTruncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}:{column}: {message}")]
    SceneParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scene: {0}")]
    Scene(String),

    #[error("image: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
