//! Square single-channel images and binary PGM (P5) I/O.

use std::fs;
use std::path::Path;

use crate::error::{GazeError, Result};

/// Square grayscale image with values in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    side: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image, clamping every value into `[0, 1]`. NaNs become 0.
    pub fn new(side: usize, mut data: Vec<f64>) -> Result<Self> {
        if side == 0 || data.len() != side * side {
            return Err(GazeError::shape(format!("{side}x{side} pixels"), data.len()));
        }
        for v in data.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Image { side, data })
    }

    pub fn filled(side: usize, value: f64) -> Self {
        Image { side, data: vec![value.clamp(0.0, 1.0); side * side] }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    /// Snaps every value to the nearest 8-bit level so the image survives a
    /// PGM round trip unchanged.
    pub fn quantized(&self) -> Image {
        Image {
            side: self.side,
            data: self.data.iter().map(|v| (v * 255.0).round() / 255.0).collect(),
        }
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.side, self.side).into_bytes();
        out.extend(self.data.iter().map(|v| (v * 255.0).round() as u8));
        out
    }

    /// Parses an 8-bit binary PGM. Only square images are accepted.
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = PgmCursor { bytes, pos: 0 };
        if bytes.get(..2) != Some(b"P5") {
            return Err(GazeError::Pgm("missing P5 magic".into()));
        }
        cur.pos = 2;
        let width = cur.header_number("width")?;
        let height = cur.header_number("height")?;
        let maxval = cur.header_number("maxval")?;
        if width == 0 || height == 0 {
            return Err(GazeError::Pgm("zero dimension".into()));
        }
        if width != height {
            return Err(GazeError::Pgm(format!("image is {width}x{height}, expected square")));
        }
        if maxval == 0 || maxval > 255 {
            return Err(GazeError::Pgm(format!("maxval {maxval} unsupported (8-bit only)")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(GazeError::Pgm("no separator after maxval".into())),
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| GazeError::Pgm("dimensions overflow".into()))?;
        let raster = &bytes[cur.pos..];
        if raster.len() < n {
            return Err(GazeError::Pgm(format!("raster has {} bytes, expected {n}", raster.len())));
        }
        let scale = maxval as f64;
        let data = raster[..n].iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
        Ok(Image { side: width, data })
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| GazeError::io(path, e))?;
        Image::from_pgm_bytes(&bytes)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm_bytes()).map_err(|e| GazeError::io(path, e))
    }
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_number(&mut self, what: &str) -> Result<usize> {
        let before = self.pos;
        self.skip_space_and_comments();
        if self.pos == before {
            return Err(GazeError::Pgm(format!("expected whitespace before {what}")));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(GazeError::Pgm(format!("expected {what}")));
        }
        // Digits only, so the slice is valid UTF-8.
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&v: &usize| v <= 1 << 20)
            .ok_or_else(|| GazeError::Pgm(format!("{what} out of range")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamps_on_construction() {
        let img = Image::new(2, vec![-1.0, 0.5, 2.0, f64::NAN]).unwrap();
        assert_eq!(img.data(), &[0.0, 0.5, 1.0, 0.0]);
        assert!(Image::new(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn parses_header_with_comments() {
        let mut bytes = b"P5\n# a comment\n2 2\n# another\n255\n".to_vec();
        bytes.extend([0, 255, 51, 102]);
        let img = Image::from_pgm_bytes(&bytes).unwrap();
        assert_eq!(img.side(), 2);
        assert_eq!(img.data(), &[0.0, 1.0, 0.2, 0.4]);
    }

    #[test]
    fn rescales_small_maxval() {
        let mut bytes = b"P5 1 1 15\n".to_vec();
        bytes.push(15);
        assert_eq!(Image::from_pgm_bytes(&bytes).unwrap().data(), &[1.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Image::from_pgm_bytes(b"P2\n1 1\n255\n\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P5\n2 3\n255\n\x00\x00\x00\x00\x00\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P5\n2 2\n255\n\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P5\n1 1\n0\n\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P51 1\n255\n\x00").is_err());
        assert!(Image::from_pgm_bytes(b"P5\n99999999999999999999 1\n255\n").is_err());
        assert!(Image::from_pgm_bytes(b"").is_err());
    }

    proptest! {
        #[test]
        fn quantized_images_round_trip(side in 1usize..9, seed in proptest::collection::vec(0u8..=255, 81)) {
            let data = seed[..side * side].iter().map(|&b| b as f64 / 255.0).collect();
            let img = Image::new(side, data).unwrap();
            prop_assert_eq!(img.quantized(), img.clone());
            prop_assert_eq!(Image::from_pgm_bytes(&img.to_pgm_bytes()).unwrap(), img);
        }

        #[test]
        fn parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let mut input = b"P5 ".to_vec();
            input.extend(bytes);
            let _ = Image::from_pgm_bytes(&input);
        }
    }
}
