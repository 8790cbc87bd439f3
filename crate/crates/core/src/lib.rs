//! Gaze regression from head crops with multi-scale feature aggregation.
//!
//! The crate covers the whole pipeline: sine-cosine yaw encoding and its
//! two-branch decoder ([`geometry`]), pinball loss with an uncertainty term
//! ([`loss`]), crop/resize preprocessing ([`preprocess`]), a small
//! hand-differentiated CNN with scale-wise max aggregation ([`model`]),
//! a synthetic data generator ([`synth`], [`manifest`]) and the evaluation
//! harness ([`eval`]).

pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod loss;
pub mod manifest;
pub mod model;
pub mod preprocess;
pub mod synth;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use error::{GazeError, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| GazeError::InvalidArgument(format!("{} has no file name", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| GazeError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| GazeError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| GazeError::io(path, e))
}
