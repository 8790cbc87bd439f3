//! Center crops, bilinear resizing and the crop schedules that drive the
//! multi-scale expansion.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GazeError, Result};
use crate::image::Image;

/// Smallest crop a schedule may contain.
pub const MIN_CROP: usize = 8;

/// Strictly decreasing list of center-crop sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CropSchedule {
    sizes: Vec<usize>,
}

impl CropSchedule {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(GazeError::InvalidSchedule("empty".into()));
        }
        if let Some(s) = sizes.iter().find(|&&s| s < MIN_CROP) {
            return Err(GazeError::InvalidSchedule(format!("crop {s} is below {MIN_CROP}")));
        }
        if let Some(w) = sizes.windows(2).find(|w| w[0] <= w[1]) {
            return Err(GazeError::InvalidSchedule(format!(
                "sizes must strictly decrease, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(CropSchedule { sizes })
    }

    /// The desk-scale schedule for 64 px inputs.
    pub fn desk_default() -> Self {
        CropSchedule { sizes: vec![64, 57, 50, 43] }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Schedule reduced to its first (largest) crop.
    pub fn first_only(&self) -> Self {
        CropSchedule { sizes: vec![self.sizes[0]] }
    }

    pub fn check_fits(&self, side: usize) -> Result<()> {
        if self.sizes[0] > side {
            return Err(GazeError::InvalidSchedule(format!(
                "crop {} exceeds image side {side}",
                self.sizes[0]
            )));
        }
        Ok(())
    }
}

/// How the crop sizes are laid out over a `2T + 1` frame sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceScheduleKind {
    /// Palindrome with the strongest zoom on the middle frame.
    ZoomInMiddle,
    /// Each size twice, strongest zoom on the last frame.
    ZoomInLast,
    /// `ZoomInLast` reversed; the last frame gets the weakest zoom.
    Reverse,
    /// Seeded shuffle of the `ZoomInLast` sizes.
    Random(u64),
}

impl SequenceScheduleKind {
    /// Index of the frame whose gaze the sequence predicts.
    pub fn target_frame(&self, n_frames: usize) -> usize {
        match self {
            SequenceScheduleKind::ZoomInMiddle => n_frames / 2,
            _ => n_frames - 1,
        }
    }
}

pub fn center_crop(img: &Image, size: usize) -> Result<Image> {
    let side = img.side();
    if size == 0 || size > side {
        return Err(GazeError::InvalidArgument(format!("crop size {size} for side {side}")));
    }
    let off = (side - size) / 2;
    let mut data = Vec::with_capacity(size * size);
    for r in off..off + size {
        let row = r * side;
        data.extend_from_slice(&img.data()[row + off..row + off + size]);
    }
    Image::new(size, data)
}

struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(in_side: usize, out_side: usize) -> Vec<Tap> {
    let scale = in_side as f64 / out_side as f64;
    let max = (in_side - 1) as f64;
    (0..out_side)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = src.floor() as usize;
            Tap { lo, hi: (lo + 1).min(in_side - 1), frac: src - lo as f64 }
        })
        .collect()
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &Image, out_side: usize) -> Result<Image> {
    if out_side == 0 {
        return Err(GazeError::InvalidArgument("output side must be positive".into()));
    }
    let side = img.side();
    let t = taps(side, out_side);
    let src = img.data();
    let mut data = Vec::with_capacity(out_side * out_side);
    for ty in &t {
        let r0 = &src[ty.lo * side..(ty.lo + 1) * side];
        let r1 = &src[ty.hi * side..(ty.hi + 1) * side];
        for tx in &t {
            let a = r0[tx.lo] + tx.frac * (r0[tx.hi] - r0[tx.lo]);
            let b = r1[tx.lo] + tx.frac * (r1[tx.hi] - r1[tx.lo]);
            data.push(a + ty.frac * (b - a));
        }
    }
    Image::new(out_side, data)
}

fn crop_and_restore(img: &Image, size: usize) -> Result<Image> {
    if size == img.side() {
        return Ok(img.clone());
    }
    resize_bilinear(&center_crop(img, size)?, img.side())
}

/// One image per schedule entry: crop, then scale back to the input side.
pub fn expand_static(img: &Image, schedule: &CropSchedule) -> Result<Vec<Image>> {
    schedule.check_fits(img.side())?;
    schedule.sizes().iter().map(|&s| crop_and_restore(img, s)).collect()
}

/// Crop size for every frame of a `2T + 1` sequence.
pub fn sequence_crop_sizes(schedule: &CropSchedule, kind: SequenceScheduleKind) -> Vec<usize> {
    let sizes = schedule.sizes();
    let t = sizes.len() - 1;
    let zoom_in_last = || {
        let mut v = Vec::with_capacity(2 * t + 1);
        for &s in &sizes[..t] {
            v.push(s);
            v.push(s);
        }
        v.push(sizes[t]);
        v
    };
    match kind {
        SequenceScheduleKind::ZoomInMiddle => {
            let mut v = sizes.to_vec();
            v.extend(sizes[..t].iter().rev());
            v
        }
        SequenceScheduleKind::ZoomInLast => zoom_in_last(),
        SequenceScheduleKind::Reverse => {
            let mut v = zoom_in_last();
            v.reverse();
            v
        }
        SequenceScheduleKind::Random(seed) => {
            let mut v = zoom_in_last();
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            v
        }
    }
}

/// Zoom in by `c` pixels: crop `side - c` and scale back up.
pub fn perturb_zoom_in(img: &Image, c: usize) -> Result<Image> {
    if c == 0 || c >= img.side() {
        return Err(GazeError::InvalidArgument(format!("zoom-in by {c} on side {}", img.side())));
    }
    crop_and_restore(img, img.side() - c)
}

/// Zoom out by `c` pixels: zero-pad `c / 2` on every border and scale back down.
pub fn perturb_zoom_out(img: &Image, c: usize) -> Result<Image> {
    if c == 0 || c % 2 == 1 {
        return Err(GazeError::InvalidArgument(format!("zoom-out needs a positive even c, got {c}")));
    }
    let side = img.side();
    let pad = c / 2;
    let big = side + c;
    let mut data = vec![0.0; big * big];
    for r in 0..side {
        let dst = (r + pad) * big + pad;
        data[dst..dst + side].copy_from_slice(&img.data()[r * side..(r + 1) * side]);
    }
    resize_bilinear(&Image::new(big, data)?, side)
}
