use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step size alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("empty return sequence: sigma is undefined for n = 0")]
    EmptySequence,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("cannot sample from an empty replay buffer")]
    EmptyReplay,

    #[error("replay holds {have} transitions, training needs {need}")]
    WarmupIncomplete { have: usize, need: usize },

    #[error("stepping an environment whose episode has already ended")]
    EpisodeOver,

    #[error("human and random reference scores are equal ({0})")]
    DegenerateReference(f64),

    #[error("report streams are on mismatched evaluation grids")]
    MismatchedGrids,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration and input problems map to exit code 1, everything else to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidAlpha(_)
            | Error::DegenerateReference(_)
            | Error::MismatchedGrids
            | Error::Format(_)
            | Error::EmptySequence => 1,
            _ => 2,
        }
    }
}
