use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the gazekit library.
#[derive(Debug, Error)]
pub enum GazeError {
    #[error("yaw {0} outside [-pi, pi]")]
    YawOutOfRange(f64),
    #[error("pitch {0} outside [-pi/2, pi/2]")]
    PitchOutOfRange(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid crop schedule: {0}")]
    InvalidSchedule(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("decoder {decoder} is not compatible with {mode} head")]
    ModeMismatch { decoder: &'static str, mode: &'static str },
    #[error("detection failed: {0}")]
    Detection(String),
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("sample {index} has no meta key {key:?}")]
    MissingMeta { index: usize, key: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GazeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GazeError::Io { path: path.into(), source }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        GazeError::ShapeMismatch { expected: expected.to_string(), got: got.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, GazeError>;
