//! Synthetic head images whose gaze labels can be read back in closed form.
//!
//! A head is a disc at the image center. Its brightness encodes `cos(yaw)`;
//! a dark pupil offset from the center encodes `sin(yaw)` horizontally and
//! `sin(pitch)` vertically. Head size follows the `scale` parameter, which is
//! the nuisance variable the multi-scale model is meant to absorb.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GazeError, Result};
use crate::geometry::GazeAngles;
use crate::image::Image;

pub const RENDER_SIDE: usize = 64;
pub const BACKGROUND: f64 = 0.30;
pub const PUPIL: f64 = 0.05;
/// Head radius in pixels at `scale = 1`.
pub const MAX_RADIUS: f64 = 22.4;
const PUPIL_REACH: f64 = 0.6;
const PUPIL_FRACTION: f64 = 0.12;
const SUPERSAMPLE: usize = 4;

/// One labelled image plus free-form numeric metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: GazeAngles,
    pub meta: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderParams {
    pub yaw: f64,
    pub pitch: f64,
    pub scale: f64,
    pub noise_amp: f64,
    pub seed: u64,
}

impl RenderParams {
    pub fn new(yaw: f64, pitch: f64, scale: f64) -> Self {
        RenderParams { yaw, pitch, scale, noise_amp: 0.02, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        GazeAngles::new(self.yaw, self.pitch)?;
        if !(0.5..=1.0).contains(&self.scale) {
            return Err(GazeError::InvalidArgument(format!("scale {} outside [0.5, 1]", self.scale)));
        }
        if !(self.noise_amp >= 0.0) {
            return Err(GazeError::InvalidArgument(format!("noise amplitude {} is negative", self.noise_amp)));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        MAX_RADIUS * self.scale
    }
}

/// Fill brightness of the head disc for a given yaw.
pub fn fill_brightness(yaw: f64) -> f64 {
    0.5 + 0.35 * yaw.cos()
}

/// Head bounding-box area as a fraction of the image.
pub fn bbox_area(scale: f64) -> f64 {
    let side = 2.0 * MAX_RADIUS * scale / RENDER_SIDE as f64;
    side * side
}

pub fn render(p: &RenderParams) -> Result<Image> {
    p.validate()?;
    let c = RENDER_SIDE as f64 / 2.0;
    let r = p.radius();
    let fill = fill_brightness(p.yaw);
    let px = c + PUPIL_REACH * r * p.yaw.sin();
    let py = c - PUPIL_REACH * r * p.pitch.sin();
    let pr = (PUPIL_FRACTION * r).max(1.0);
    let (r2, pr2) = (r * r, pr * pr);

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let sub = 1.0 / SUPERSAMPLE as f64;
    let mut data = Vec::with_capacity(RENDER_SIDE * RENDER_SIDE);
    for row in 0..RENDER_SIDE {
        for col in 0..RENDER_SIDE {
            let mut acc = 0.0;
            for a in 0..SUPERSAMPLE {
                let y = row as f64 + (a as f64 + 0.5) * sub;
                for b in 0..SUPERSAMPLE {
                    let x = col as f64 + (b as f64 + 0.5) * sub;
                    acc += if (x - px).powi(2) + (y - py).powi(2) <= pr2 {
                        PUPIL
                    } else if (x - c).powi(2) + (y - c).powi(2) <= r2 {
                        fill
                    } else {
                        BACKGROUND
                    };
                }
            }
            let mut v = acc * sub * sub;
            if p.noise_amp > 0.0 {
                v += rng.random_range(-p.noise_amp..=p.noise_amp);
            }
            data.push(v);
        }
    }
    Image::new(RENDER_SIDE, data)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reads the gaze back out of a rendered image.
pub fn oracle_decode(img: &Image) -> Result<GazeAngles> {
    let side = img.side();
    let c = side as f64 / 2.0;
    let dist = |row: usize, col: usize| ((row as f64 + 0.5 - c).powi(2) + (col as f64 + 0.5 - c).powi(2)).sqrt();
    let pixels = || (0..side).flat_map(move |r| (0..side).map(move |q| (r, q)));

    // The smallest head still covers a radius-10 core around the center.
    let core: Vec<f64> = pixels().filter(|&(r, q)| dist(r, q) <= 10.0).map(|(r, q)| img.get(r, q)).collect();
    if core.is_empty() {
        return Err(GazeError::Detection("image too small".into()));
    }
    let fill = median(core);
    let cos_yaw = ((fill - 0.5) / 0.35).clamp(-1.0, 1.0);
    if fill - PUPIL < 0.06 {
        return Err(GazeError::Detection("no contrast between head and pupil".into()));
    }
    let darkness = |v: f64| ((fill - v) / (fill - PUPIL)).clamp(0.0, 1.0);

    // Head area in pixels, counting each pixel linearly between background
    // and fill. No clamping, so the noise averages out.
    let contrast = fill - BACKGROUND;
    let measurable = contrast.abs() >= 0.1;
    let area = |as_head: &dyn Fn(usize, usize) -> bool| -> f64 {
        pixels().map(|(r, q)| if as_head(r, q) { 1.0 } else { (img.get(r, q) - BACKGROUND) / contrast }).sum()
    };

    // Coarse pupil: darkest 3x3 neighbourhood where the pupil center can be.
    // With a measurable head the search stays inside it and darkness is
    // judged against the fill; otherwise against whichever of head and
    // background is darker.
    let (reach, floor) = if measurable {
        let rough = (area(&|_, _| false).max(0.0) / PI).sqrt();
        (PUPIL_REACH * rough + 1.5, fill)
    } else {
        (18.0, fill.min(BACKGROUND))
    };
    let coarse_darkness = |v: f64| ((floor - v) / (floor - PUPIL)).clamp(0.0, 1.0);
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for r in 1..side - 1 {
        for q in 1..side - 1 {
            if dist(r, q) > reach {
                continue;
            }
            let mut s = 0.0;
            for dr in 0..3 {
                for dq in 0..3 {
                    s += coarse_darkness(img.get(r + dr - 1, q + dq - 1));
                }
            }
            if s > best.0 {
                best = (s, r, q);
            }
        }
    }
    if best.0 < 3.0 {
        return Err(GazeError::Detection("no pupil found".into()));
    }
    let (pr0, pq0) = (best.1 as f64 + 0.5, best.2 as f64 + 0.5);
    let near_pupil = |r: usize, q: usize, rad: f64| ((r as f64 + 0.5 - pr0).powi(2) + (q as f64 + 0.5 - pq0).powi(2)).sqrt() <= rad;

    let area_radius = measurable.then(|| (area(&|r, q| near_pupil(r, q, 4.5)).max(0.0) / PI).sqrt());

    // Refined pupil centroid, weighted by darkness and kept inside the head.
    let (mut wsum, mut xs, mut ys) = (0.0, 0.0, 0.0);
    for (r, q) in pixels() {
        if !near_pupil(r, q, 4.5) {
            continue;
        }
        if let Some(rad) = area_radius {
            if dist(r, q) > rad - 0.7 {
                continue;
            }
        }
        let w = darkness(img.get(r, q));
        if w < 0.35 {
            continue;
        }
        wsum += w;
        xs += w * (q as f64 + 0.5);
        ys += w * (r as f64 + 0.5);
    }
    if wsum <= 0.0 {
        return Err(GazeError::Detection("pupil has no weight inside the head".into()));
    }
    let (dx, dy) = (xs / wsum - c, c - ys / wsum);

    let radius = match area_radius {
        Some(r) => r,
        None => {
            let sin_abs = (1.0 - cos_yaw * cos_yaw).sqrt();
            dx.abs() / (PUPIL_REACH * sin_abs)
        }
    };
    if !(radius > 1.0) {
        return Err(GazeError::Detection("head radius not measurable".into()));
    }
    let sin_yaw = (dx / (PUPIL_REACH * radius)).clamp(-1.0, 1.0);
    let sin_pitch = (dy / (PUPIL_REACH * radius)).clamp(-1.0, 1.0);
    GazeAngles::new(sin_yaw.atan2(cos_yaw), sin_pitch.asin().clamp(-FRAC_PI_2, FRAC_PI_2))
}

/// Closed interval `[lo, hi]` to sample from uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRange {
    pub lo: f64,
    pub hi: f64,
}

impl SampleRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        SampleRange { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        SampleRange { lo: v, hi: v }
    }

    fn check(&self, what: &str, bounds: (f64, f64)) -> Result<()> {
        if !(self.lo <= self.hi) {
            return Err(GazeError::InvalidArgument(format!("{what} range [{}, {}] is empty", self.lo, self.hi)));
        }
        if self.lo < bounds.0 || self.hi > bounds.1 {
            return Err(GazeError::InvalidArgument(format!(
                "{what} range [{}, {}] exceeds [{}, {}]",
                self.lo, self.hi, bounds.0, bounds.1
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Dataset sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub yaw: SampleRange,
    pub pitch: SampleRange,
    pub scale: SampleRange,
    pub noise_amp: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            yaw: SampleRange::new(-PI, PI),
            pitch: SampleRange::new(-40f64.to_radians(), 40f64.to_radians()),
            scale: SampleRange::new(0.5, 1.0),
            noise_amp: 0.02,
        }
    }
}

fn base_meta(scale: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("scale".to_string(), scale),
        ("bbox_area".to_string(), bbox_area(scale)),
        ("distance".to_string(), 1.0 / scale),
    ])
}

/// Seeded synthetic dataset. Sample `i` draws from its own stream of `seed`,
/// and images are snapped to 8-bit levels so they survive PGM storage.
pub fn generate_dataset(n: usize, seed: u64, spec: &DatasetSpec) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(GazeError::InvalidArgument("sample count must be at least 1".into()));
    }
    spec.yaw.check("yaw", (-PI, PI))?;
    spec.pitch.check("pitch", (-FRAC_PI_2, FRAC_PI_2))?;
    spec.scale.check("scale", (0.5, 1.0))?;
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let yaw = spec.yaw.sample(&mut rng);
            let pitch = spec.pitch.sample(&mut rng);
            let scale = spec.scale.sample(&mut rng);
            let params = RenderParams { yaw, pitch, scale, noise_amp: spec.noise_amp, seed: rng.random() };
            Ok(Sample {
                image: render(&params)?.quantized(),
                label: GazeAngles::new(yaw, pitch)?,
                meta: base_meta(scale),
            })
        })
        .collect()
}

/// Frames of a gaze drifting linearly in yaw; frame `k` has yaw
/// `start.yaw + k * drift`.
pub fn generate_sequence(
    n_frames: usize,
    start: GazeAngles,
    drift: f64,
    scale: f64,
    noise_amp: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    if n_frames % 2 == 0 {
        return Err(GazeError::InvalidArgument(format!("sequence needs 2T+1 frames, got {n_frames}")));
    }
    (0..n_frames)
        .map(|k| {
            let yaw = start.yaw() + k as f64 * drift;
            let label = GazeAngles::new(yaw, start.pitch())?;
            let params = RenderParams {
                yaw,
                pitch: start.pitch(),
                scale,
                noise_amp,
                seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64),
            };
            let mut meta = base_meta(scale);
            meta.insert("frame".into(), k as f64);
            Ok(Sample { image: render(&params)?.quantized(), label, meta })
        })
        .collect()
}
