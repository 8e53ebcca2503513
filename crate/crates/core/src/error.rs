use std::path::PathBuf;

use crate::model::Checkpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, ranges, arity).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("input of {height}x{width} px is smaller than the minimum {min}x{min} px")]
    InputTooSmall { height: usize, width: usize, min: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("data error: {0}")]
    Data(String),

    /// One entry per rejected manifest row or unreadable file.
    #[error("dataset has {} error(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Dataset(Vec<String>),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        last_good: Option<Box<Checkpoint>>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
