//! Angle encoding, two-branch yaw decoding and angular error.
//!
//! Yaw is encoded as `(sin yaw, cos yaw)` so that the regression target is
//! continuous across the `+pi / -pi` seam. Decoding recovers yaw twice, once
//! from the sine (`theta_s`) and once from the cosine (`theta_c`), and then
//! blends the two with a weight that favours the sine branch near the front
//! and the cosine branch near the sides.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};

/// Gaze direction as yaw and pitch in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeAngles {
    yaw: f64,
    pitch: f64,
}

impl GazeAngles {
    pub fn new(yaw: f64, pitch: f64) -> Result<Self> {
        if !(-PI..=PI).contains(&yaw) {
            return Err(GazeError::YawOutOfRange(yaw));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
            return Err(GazeError::PitchOutOfRange(pitch));
        }
        Ok(GazeAngles { yaw, pitch })
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }
}

/// The `(sin yaw, cos yaw, sin pitch)` target triple.
///
/// Components are clamped to `[-1, 1]` on construction, so a decoder never
/// sees an argument outside the domain of `asin`/`acos`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedGaze {
    s_theta: f64,
    c_theta: f64,
    s_phi: f64,
}

impl EncodedGaze {
    pub fn new(s_theta: f64, c_theta: f64, s_phi: f64) -> Self {
        EncodedGaze {
            s_theta: s_theta.clamp(-1.0, 1.0),
            c_theta: c_theta.clamp(-1.0, 1.0),
            s_phi: s_phi.clamp(-1.0, 1.0),
        }
    }

    pub fn s_theta(&self) -> f64 {
        self.s_theta
    }

    pub fn c_theta(&self) -> f64 {
        self.c_theta
    }

    pub fn s_phi(&self) -> f64 {
        self.s_phi
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s_theta, self.c_theta, self.s_phi]
    }
}

/// Both yaw branch estimates and the blending weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawEstimates {
    pub theta_s: f64,
    pub theta_c: f64,
    pub weight_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVector3 {
    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GazeBin {
    Back,
    Front180,
    Front40,
}

impl GazeBin {
    pub const ALL: [GazeBin; 3] = [GazeBin::Back, GazeBin::Front180, GazeBin::Front40];

    pub fn name(&self) -> &'static str {
        match self {
            GazeBin::Back => "back",
            GazeBin::Front180 => "front180",
            GazeBin::Front40 => "front40",
        }
    }
}

/// `+1` for any non-negative input, including `-0.0`; `-1` otherwise.
pub fn sign_nonneg(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn encode_gaze(angles: GazeAngles) -> EncodedGaze {
    let (s, c) = angles.yaw.sin_cos();
    EncodedGaze::new(s, c, angles.pitch.sin())
}

/// Yaw from the sine, with the half-plane picked by the sign of the cosine.
pub fn decode_theta_s(e: &EncodedGaze) -> f64 {
    let base = e.s_theta.asin();
    if sign_nonneg(e.c_theta) > 0.0 {
        base
    } else {
        sign_nonneg(e.s_theta) * PI - base
    }
}

/// Yaw from the cosine, with the sign taken from the sine.
pub fn decode_theta_c(e: &EncodedGaze) -> f64 {
    sign_nonneg(e.s_theta) * e.c_theta.acos()
}

/// Unweighted mean of the two branches.
///
/// The mean is linear, not circular: both branches always share the sign of
/// `s_theta`, so they can never sit on opposite sides of the seam.
pub fn decode_yaw_sc(e: &EncodedGaze) -> f64 {
    0.5 * (decode_theta_s(e) + decode_theta_c(e))
}

pub fn decode_yaw_wsc(e: &EncodedGaze) -> (f64, YawEstimates) {
    let theta_s = decode_theta_s(e);
    let theta_c = decode_theta_c(e);
    let weight_w = (0.5 * (theta_s + theta_c)).cos().abs().min(1.0);
    let yaw = weight_w * theta_s + (1.0 - weight_w) * theta_c;
    (yaw, YawEstimates { theta_s, theta_c, weight_w })
}

pub fn decode_pitch(e: &EncodedGaze) -> f64 {
    e.s_phi.asin()
}

/// Gaze direction in camera coordinates; `(0, 0)` looks down `-z`.
pub fn to_unit_vector(angles: GazeAngles) -> UnitVector3 {
    let (sy, cy) = angles.yaw.sin_cos();
    let (sp, cp) = angles.pitch.sin_cos();
    UnitVector3 { x: -cp * sy, y: sp, z: -cp * cy }
}

pub fn angular_error(a: GazeAngles, b: GazeAngles) -> f64 {
    let dot = to_unit_vector(a).dot(&to_unit_vector(b));
    dot.clamp(-1.0, 1.0).acos()
}

/// Bins a ground-truth yaw falls into. `|yaw| = pi/2` counts as back and
/// `|yaw| = pi/9` as front40.
pub fn classify_bin(yaw: f64) -> &'static [GazeBin] {
    const BACK: [GazeBin; 1] = [GazeBin::Back];
    const FRONT: [GazeBin; 1] = [GazeBin::Front180];
    const FRONT_NARROW: [GazeBin; 2] = [GazeBin::Front180, GazeBin::Front40];
    let a = yaw.abs();
    if a >= FRAC_PI_2 {
        &BACK
    } else if a <= PI / 9.0 {
        &FRONT_NARROW
    } else {
        &FRONT
    }
}

/// Shortest distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ga(y: f64, p: f64) -> GazeAngles {
        GazeAngles::new(y, p).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn angles_reject_out_of_range() {
        assert!(GazeAngles::new(3.2, 0.0).is_err());
        assert!(GazeAngles::new(0.0, -1.6).is_err());
        assert!(GazeAngles::new(f64::NAN, 0.0).is_err());
        assert!(GazeAngles::new(PI, FRAC_PI_2).is_ok());
    }

    #[test]
    fn encode_examples() {
        let e = encode_gaze(ga(0.0, 0.0));
        assert_eq!(e.as_array(), [0.0, 1.0, 0.0]);
        let e = encode_gaze(ga(PI, 0.0));
        close(e.s_theta(), 0.0, 1e-15);
        close(e.c_theta(), -1.0, 1e-15);
        let e = encode_gaze(ga(FRAC_PI_2, PI / 6.0));
        close(e.s_theta(), 1.0, 1e-15);
        close(e.c_theta(), 0.0, 1e-15);
        close(e.s_phi(), 0.5, 1e-15);
    }

    #[test]
    fn encoded_components_clamped() {
        let e = EncodedGaze::new(2.0, -3.0, 1.5);
        assert_eq!(e.as_array(), [1.0, -1.0, 1.0]);
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign_nonneg(0.0), 1.0);
        assert_eq!(sign_nonneg(-0.0), 1.0);
        assert_eq!(sign_nonneg(-1e-300), -1.0);
        assert_eq!(sign_nonneg(3.5), 1.0);
    }

    #[test]
    fn theta_s_examples() {
        close(decode_theta_s(&EncodedGaze::new(0.5, 0.9, 0.0)), 0.5236, 1e-4);
        close(decode_theta_s(&EncodedGaze::new(0.5, -0.9, 0.0)), 2.6180, 1e-4);
        close(decode_theta_s(&EncodedGaze::new(-0.5, -0.9, 0.0)), -2.6180, 1e-4);
    }

    #[test]
    fn theta_c_examples() {
        close(decode_theta_c(&EncodedGaze::new(0.1, 0.5, 0.0)), 1.0472, 1e-4);
        close(decode_theta_c(&EncodedGaze::new(0.1, -1.0, 0.0)), PI, 1e-15);
        close(decode_theta_c(&EncodedGaze::new(-0.1, 0.5, 0.0)), -1.0472, 1e-4);
    }

    #[test]
    fn sc_examples() {
        close(decode_yaw_sc(&encode_gaze(ga(0.3, 0.0))), 0.3, 1e-12);
        close(decode_yaw_sc(&EncodedGaze::new(0.5, 0.5, 0.0)), 0.7854, 1e-4);
        let y = -PI + 1e-9;
        assert!(circular_distance(decode_yaw_sc(&encode_gaze(ga(y, 0.0))), y) < 1e-6);
    }

    #[test]
    fn wsc_examples() {
        let (y, est) = decode_yaw_wsc(&encode_gaze(ga(0.0, 0.0)));
        assert_eq!(y, 0.0);
        assert_eq!(est.weight_w, 1.0);

        let (y, est) = decode_yaw_wsc(&encode_gaze(ga(FRAC_PI_2, 0.0)));
        close(y, FRAC_PI_2, 1e-7);
        close(est.weight_w, 0.0, 1e-7);

        // Inconsistent pair: theta_s = pi/6, theta_c = pi/3.
        let (y, est) = decode_yaw_wsc(&EncodedGaze::new(0.5, 0.5, 0.0));
        let (ts, tc) = (PI / 6.0, PI / 3.0);
        let w = ((ts + tc) / 2.0).cos().abs();
        close(est.theta_s, ts, 1e-12);
        close(est.theta_c, tc, 1e-12);
        close(est.weight_w, w, 1e-12);
        close(est.weight_w, 0.7071, 1e-4);
        close(y, w * ts + (1.0 - w) * tc, 1e-12);
        close(y, 0.6770, 1e-4);
    }

    #[test]
    fn pitch_examples() {
        assert_eq!(decode_pitch(&EncodedGaze::new(0.0, 1.0, 0.0)), 0.0);
        close(decode_pitch(&EncodedGaze::new(0.0, 1.0, 0.5)), 0.5236, 1e-4);
        close(decode_pitch(&EncodedGaze::new(0.0, 1.0, -1.0)), -FRAC_PI_2, 1e-15);
    }

    #[test]
    fn unit_vector_examples() {
        let v = to_unit_vector(ga(0.0, 0.0));
        assert_eq!((v.x, v.y, v.z), (0.0, 0.0, -1.0));
        let v = to_unit_vector(ga(PI, 0.0));
        close(v.x, 0.0, 1e-15);
        close(v.z, 1.0, 1e-15);
        let v = to_unit_vector(ga(0.0, FRAC_PI_2));
        close(v.y, 1.0, 1e-15);
        close(v.z, 0.0, 1e-15);
    }

    #[test]
    fn angular_error_examples() {
        assert_eq!(angular_error(ga(0.4, 0.2), ga(0.4, 0.2)), 0.0);
        close(angular_error(ga(0.0, 0.0), ga(PI, 0.0)), PI, 1e-7);
        close(angular_error(ga(0.0, 0.0), ga(FRAC_PI_2, 0.0)), FRAC_PI_2, 1e-12);
    }

    #[test]
    fn bin_examples() {
        assert_eq!(classify_bin(0.1), &[GazeBin::Front180, GazeBin::Front40]);
        assert_eq!(classify_bin(1.0), &[GazeBin::Front180]);
        assert_eq!(classify_bin(-3.0), &[GazeBin::Back]);
        assert_eq!(classify_bin(FRAC_PI_2), &[GazeBin::Back]);
        assert_eq!(classify_bin(-PI / 9.0), &[GazeBin::Front180, GazeBin::Front40]);
    }

    #[test]
    fn round_trip_at_seam() {
        for yaw in [PI, -PI] {
            let e = encode_gaze(ga(yaw, 0.0));
            assert!(circular_distance(decode_yaw_sc(&e), yaw) < 1e-6);
            assert!(circular_distance(decode_yaw_wsc(&e).0, yaw) < 1e-6);
        }
    }

    /// Monte-Carlo: noise on (s, c) hurts the cosine branch near the front and
    /// the sine branch near the side.
    #[test]
    fn branch_noise_sensitivity() {
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mean_errors = |theta: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let (mut es, mut ec) = (0.0, 0.0);
            let n = 10_000;
            for _ in 0..n {
                let e = EncodedGaze::new(
                    theta.sin() + noise.sample(&mut rng),
                    theta.cos() + noise.sample(&mut rng),
                    0.0,
                );
                es += (decode_theta_s(&e) - theta).abs();
                ec += (decode_theta_c(&e) - theta).abs();
            }
            (es / n as f64, ec / n as f64)
        };
        let (s5, c5) = mean_errors(5f64.to_radians());
        assert!(s5 < c5, "theta=5deg: S {s5} C {c5}");
        let (s85, c85) = mean_errors(85f64.to_radians());
        assert!(s85 > c85, "theta=85deg: S {s85} C {c85}");
    }

    #[test]
    fn unit_vectors_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = ga(rng.random_range(-PI..=PI), rng.random_range(-FRAC_PI_2..=FRAC_PI_2));
            assert!((to_unit_vector(a).norm() - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(yaw in (-PI + 1e-6)..(PI - 1e-6), pitch in (-FRAC_PI_2 + 1e-9)..(FRAC_PI_2 - 1e-9)) {
            let e = encode_gaze(ga(yaw, pitch));
            prop_assert!((e.s_theta().powi(2) + e.c_theta().powi(2) - 1.0).abs() < 1e-12);
            prop_assert!((decode_yaw_sc(&e) - yaw).abs() < 1e-9);
            prop_assert!((decode_yaw_wsc(&e).0 - yaw).abs() < 1e-9);
            prop_assert!((decode_pitch(&e) - pitch).abs() < 1e-9);
            prop_assert!((decode_theta_s(&e) - decode_theta_c(&e)).abs() < 1e-9);
        }

        #[test]
        fn branches_share_sign(s in -1.5f64..1.5, c in -1.5f64..1.5) {
            let e = EncodedGaze::new(s, c, 0.0);
            let (yaw, est) = decode_yaw_wsc(&e);
            prop_assert!(est.theta_s * est.theta_c >= 0.0);
            prop_assert!((0.0..=1.0).contains(&est.weight_w));
            prop_assert!((-PI..=PI).contains(&est.theta_s));
            prop_assert!((-PI..=PI).contains(&est.theta_c));
            prop_assert!((-PI..=PI).contains(&yaw));
        }

        #[test]
        fn angular_error_is_symmetric(y1 in -PI..PI, p1 in -FRAC_PI_2..FRAC_PI_2, y2 in -PI..PI, p2 in -FRAC_PI_2..FRAC_PI_2) {
            let (a, b) = (ga(y1, p1), ga(y2, p2));
            let e = angular_error(a, b);
            prop_assert_eq!(e, angular_error(b, a));
            prop_assert!((0.0..=PI).contains(&e));
        }
    }
}
