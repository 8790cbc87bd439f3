//! JSON-Lines dataset manifests.
//!
//! One record per line:
//! `{"image": "images/000000.pgm", "yaw_rad": 0.1, "pitch_rad": -0.2, "meta": {"scale": 0.8}}`.
//! Image paths are resolved relative to the manifest's directory; `meta` is
//! optional.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};
use crate::geometry::GazeAngles;
use crate::image::Image;
use crate::synth::Sample;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image: String,
    pub yaw_rad: f64,
    pub pitch_rad: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, f64>,
}

/// `[a-z_][a-z0-9_]*`
pub fn is_meta_key(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Parses and validates one manifest line (without touching the image).
pub fn parse_manifest_line(line: &str) -> std::result::Result<(ManifestRecord, GazeAngles), String> {
    let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let label = GazeAngles::new(rec.yaw_rad, rec.pitch_rad).map_err(|e| e.to_string())?;
    if let Some(k) = rec.meta.keys().find(|k| !is_meta_key(k)) {
        return Err(format!("meta key {k:?} is not a lowercase identifier"));
    }
    if rec.image.is_empty() {
        return Err("empty image path".into());
    }
    Ok((rec, label))
}

pub fn load_manifest(path: &Path) -> Result<Vec<Sample>> {
    let text = fs::read_to_string(path).map_err(|e| GazeError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let (rec, label) = parse_manifest_line(line).map_err(|msg| GazeError::Manifest { line: line_no, msg })?;
        let image = Image::read_pgm(&base.join(&rec.image))
            .map_err(|e| GazeError::Manifest { line: line_no, msg: e.to_string() })?;
        out.push(Sample { image, label, meta: rec.meta });
    }
    Ok(out)
}

pub fn manifest_line(image: &str, sample: &Sample) -> String {
    let rec = ManifestRecord {
        image: image.to_string(),
        yaw_rad: sample.label.yaw(),
        pitch_rad: sample.label.pitch(),
        meta: sample.meta.clone(),
    };
    serde_json::to_string(&rec).expect("finite record serializes")
}

/// Writes `images/NNNNNN.pgm` files plus `manifest.jsonl` under `dir`, and
/// returns the manifest path. Values are stored at 8-bit precision.
pub fn write_manifest(dir: &Path, samples: &[Sample]) -> Result<PathBuf> {
    let img_dir = dir.join(IMAGE_DIR);
    fs::create_dir_all(&img_dir).map_err(|e| GazeError::io(&img_dir, e))?;
    let mut text = String::new();
    for (i, s) in samples.iter().enumerate() {
        if let Some((k, _)) = s.meta.iter().find(|(k, v)| !is_meta_key(k) || !v.is_finite()) {
            return Err(GazeError::InvalidArgument(format!("sample {i}: bad meta entry {k:?}")));
        }
        let rel = format!("{IMAGE_DIR}/{i:06}.pgm");
        s.image.write_pgm(&dir.join(&rel))?;
        text.push_str(&manifest_line(&rel, s));
        text.push('\n');
    }
    let path = dir.join(MANIFEST_FILE);
    crate::write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, DatasetSpec};

    #[test]
    fn empty_manifest_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        fs::write(&p, "").unwrap();
        assert!(load_manifest(&p).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_label_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate_dataset(1, 1, &DatasetSpec::default()).unwrap();
        write_manifest(dir.path(), &samples).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let mut text = fs::read_to_string(&p).unwrap();
        text.push_str(r#"{"image": "images/000000.pgm", "yaw_rad": 4.0, "pitch_rad": 0.0}"#);
        fs::write(&p, text).unwrap();
        match load_manifest(&p) {
            Err(GazeError::Manifest { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("yaw"), "{msg}");
            }
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn reports_bad_lines() {
        assert!(parse_manifest_line("not json").is_err());
        assert!(parse_manifest_line(r#"{"image": "a.pgm", "yaw_rad": 0.0}"#).is_err());
        assert!(parse_manifest_line(r#"{"image": "a.pgm", "yaw_rad": 0.0, "pitch_rad": 2.0}"#).is_err());
        assert!(parse_manifest_line(r#"{"image": "a.pgm", "yaw_rad": 0.0, "pitch_rad": 0.0, "meta": {"Bad": 1}}"#).is_err());
        assert!(parse_manifest_line(r#"{"image": "a.pgm", "yaw_rad": 0.0, "pitch_rad": 0.0, "meta": {"bbox_area": 0.2}}"#).is_ok());

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        fs::write(&p, "{\"image\": \"missing.pgm\", \"yaw_rad\": 0.0, \"pitch_rad\": 0.0}\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(GazeError::Manifest { line: 1, .. })));
        assert!(load_manifest(&dir.path().join("nope.jsonl")).is_err());
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate_dataset(25, 9, &DatasetSpec::default()).unwrap();
        let p = write_manifest(dir.path(), &samples).unwrap();
        assert_eq!(load_manifest(&p).unwrap(), samples);
    }

    #[test]
    fn meta_keys() {
        assert!(is_meta_key("bbox_area"));
        assert!(is_meta_key("_x1"));
        assert!(!is_meta_key("1x"));
        assert!(!is_meta_key("Scale"));
        assert!(!is_meta_key(""));
    }
}
