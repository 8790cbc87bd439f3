//! Pinball (quantile) loss with a shared uncertainty offset.
//!
//! For each target the prediction is shifted down by `sigma` for the low
//! quantiles and up by `sigma` for the high ones, so a well calibrated model
//! learns `sigma` as the half-width of its 10..90% band.

use crate::error::{GazeError, Result};
use crate::geometry::{encode_gaze, EncodedGaze, GazeAngles};
use crate::model::ModelOutput;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSet {
    taus: Vec<f64>,
}

impl QuantileSet {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(GazeError::InvalidArgument("quantile set is empty".into()));
        }
        if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(GazeError::InvalidArgument(format!("quantile {t} outside (0, 1)")));
        }
        Ok(QuantileSet { taus })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }
}

impl Default for QuantileSet {
    fn default() -> Self {
        QuantileSet { taus: vec![0.1, 0.9] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Quantile-averaged loss per target, in head output order.
    pub per_target: Vec<f64>,
    /// Unweighted `(1 - (s^2 + c^2))^2` penalty; zero when not in use.
    pub regularizer: f64,
}

/// Gradient of the loss with respect to the head outputs (before activation).
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub d_preds: Vec<f64>,
    pub d_sigma: f64,
}

/// Which objective the trainer minimises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Pinball,
    /// Pinball blended with the unit-circle penalty at the given weight.
    Regularized(f64),
}

impl Default for LossKind {
    fn default() -> Self {
        LossKind::Pinball
    }
}

fn residual(y_p: f64, sigma: f64, y_g: f64, tau: f64) -> f64 {
    if tau <= 0.5 {
        y_g - (y_p - sigma)
    } else {
        y_g - (y_p + sigma)
    }
}

pub fn pinball(y_p: f64, sigma: f64, y_g: f64, tau: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(GazeError::InvalidArgument(format!("sigma {sigma} is negative")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(GazeError::InvalidArgument(format!("quantile {tau} outside (0, 1)")));
    }
    let y = residual(y_p, sigma, y_g, tau);
    Ok((tau * y).max(-(1.0 - tau) * y))
}

/// Subgradient of [`pinball`] with respect to `(y_p, sigma)`. At the kink the
/// `tau` branch is taken.
pub fn pinball_grad(y_p: f64, sigma: f64, y_g: f64, tau: f64) -> (f64, f64) {
    let y = residual(y_p, sigma, y_g, tau);
    let d_y = if y >= 0.0 { tau } else { -(1.0 - tau) };
    let d_sigma_dy = if tau <= 0.5 { 1.0 } else { -1.0 };
    (-d_y, d_y * d_sigma_dy)
}

/// Mean over targets of the mean over quantiles, all sharing one `sigma`.
pub fn multi_target_pinball(
    preds: &[f64],
    sigma: f64,
    targets: &[f64],
    quantiles: &QuantileSet,
) -> Result<LossBreakdown> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(GazeError::shape(format!("{} targets", preds.len()), targets.len()));
    }
    let nq = quantiles.taus.len() as f64;
    let mut per_target = Vec::with_capacity(preds.len());
    for (&p, &g) in preds.iter().zip(targets) {
        let mut acc = 0.0;
        for &tau in &quantiles.taus {
            acc += pinball(p, sigma, g, tau)?;
        }
        per_target.push(acc / nq);
    }
    let total = per_target.iter().sum::<f64>() / per_target.len() as f64;
    Ok(LossBreakdown { total, per_target, regularizer: 0.0 })
}

pub fn multi_target_pinball_grad(
    preds: &[f64],
    sigma: f64,
    targets: &[f64],
    quantiles: &QuantileSet,
) -> LossGrad {
    let scale = 1.0 / (quantiles.taus.len() * preds.len()) as f64;
    let mut d_preds = vec![0.0; preds.len()];
    let mut d_sigma = 0.0;
    for (i, (&p, &g)) in preds.iter().zip(targets).enumerate() {
        for &tau in &quantiles.taus {
            let (dp, ds) = pinball_grad(p, sigma, g, tau);
            d_preds[i] += dp * scale;
            d_sigma += ds * scale;
        }
    }
    LossGrad { d_preds, d_sigma }
}

fn encoded_parts(pred: &ModelOutput) -> Result<([f64; 3], f64)> {
    match pred {
        ModelOutput::Encoded { gaze, sigma } => Ok((gaze.as_array(), *sigma)),
        ModelOutput::Raw { .. } => Err(GazeError::ModeMismatch { decoder: "encoded loss", mode: "raw" }),
    }
}

pub fn gaze_loss(pred: &ModelOutput, target: &EncodedGaze, quantiles: &QuantileSet) -> Result<LossBreakdown> {
    let (p, sigma) = encoded_parts(pred)?;
    multi_target_pinball(&p, sigma, &target.as_array(), quantiles)
}

pub fn gaze_loss_grad(pred: &ModelOutput, target: &EncodedGaze, quantiles: &QuantileSet) -> Result<LossGrad> {
    let (p, sigma) = encoded_parts(pred)?;
    Ok(multi_target_pinball_grad(&p, sigma, &target.as_array(), quantiles))
}

fn check_reg_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(GazeError::InvalidArgument(format!("regularizer weight {w} outside [0, 1]")))
    }
}

fn circle_violation(p: &[f64; 3]) -> f64 {
    1.0 - (p[0] * p[0] + p[1] * p[1])
}

pub fn regularized_gaze_loss(
    pred: &ModelOutput,
    target: &EncodedGaze,
    quantiles: &QuantileSet,
    reg_weight: f64,
) -> Result<LossBreakdown> {
    check_reg_weight(reg_weight)?;
    let (p, _) = encoded_parts(pred)?;
    let mut out = gaze_loss(pred, target, quantiles)?;
    let v = circle_violation(&p);
    out.regularizer = v * v;
    out.total = reg_weight * out.total + (1.0 - reg_weight) * out.regularizer;
    Ok(out)
}

pub fn regularized_gaze_loss_grad(
    pred: &ModelOutput,
    target: &EncodedGaze,
    quantiles: &QuantileSet,
    reg_weight: f64,
) -> Result<LossGrad> {
    check_reg_weight(reg_weight)?;
    let (p, _) = encoded_parts(pred)?;
    let mut g = gaze_loss_grad(pred, target, quantiles)?;
    let v = circle_violation(&p);
    for d in g.d_preds.iter_mut() {
        *d *= reg_weight;
    }
    g.d_sigma *= reg_weight;
    // d/ds (1 - s^2 - c^2)^2 = -4 s (1 - s^2 - c^2)
    g.d_preds[0] += (1.0 - reg_weight) * -4.0 * p[0] * v;
    g.d_preds[1] += (1.0 - reg_weight) * -4.0 * p[1] * v;
    Ok(g)
}

/// Loss and gradient of any head output against a ground-truth label.
///
/// Encoded heads are scored on `(sin yaw, cos yaw, sin pitch)`; raw heads on
/// `(yaw, pitch)` with the same sigma mechanics.
pub fn loss_and_grad(
    pred: &ModelOutput,
    label: &GazeAngles,
    quantiles: &QuantileSet,
    kind: LossKind,
) -> Result<(LossBreakdown, LossGrad)> {
    match pred {
        ModelOutput::Encoded { .. } => {
            let target = encode_gaze(*label);
            match kind {
                LossKind::Pinball => Ok((
                    gaze_loss(pred, &target, quantiles)?,
                    gaze_loss_grad(pred, &target, quantiles)?,
                )),
                LossKind::Regularized(w) => Ok((
                    regularized_gaze_loss(pred, &target, quantiles, w)?,
                    regularized_gaze_loss_grad(pred, &target, quantiles, w)?,
                )),
            }
        }
        ModelOutput::Raw { theta, phi, sigma } => {
            if let LossKind::Regularized(_) = kind {
                return Err(GazeError::ModeMismatch { decoder: "regularized loss", mode: "raw" });
            }
            let preds = [*theta, *phi];
            let targets = [label.yaw(), label.pitch()];
            Ok((
                multi_target_pinball(&preds, *sigma, &targets, quantiles)?,
                multi_target_pinball_grad(&preds, *sigma, &targets, quantiles),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn enc(s: f64, c: f64, p: f64, sigma: f64) -> ModelOutput {
        ModelOutput::Encoded { gaze: EncodedGaze::new(s, c, p), sigma }
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn pinball_hand_values() {
        close(pinball(0.8, 0.1, 1.0, 0.1).unwrap(), 0.03, 1e-12);
        close(pinball(0.8, 0.1, 1.0, 0.9).unwrap(), 0.09, 1e-12);
        assert_eq!(pinball(0.4, 0.0, 0.4, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn pinball_rejects_bad_inputs() {
        assert!(pinball(0.0, -0.1, 0.0, 0.1).is_err());
        assert!(pinball(0.0, 0.1, 0.0, 1.0).is_err());
        assert!(QuantileSet::new(vec![]).is_err());
        assert!(QuantileSet::new(vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn gaze_loss_hand_values() {
        let target = EncodedGaze::new(0.3, 0.7, -0.2);
        let exact = enc(0.3, 0.7, -0.2, 0.0);
        assert_eq!(gaze_loss(&exact, &target, &QuantileSet::default()).unwrap().total, 0.0);

        let target = EncodedGaze::new(1.0, 0.0, 0.0);
        let pred = enc(0.8, 0.0, 0.0, 0.1);
        let b = gaze_loss(&pred, &target, &QuantileSet::default()).unwrap();
        close(b.per_target[0], 0.06, 1e-12);
        // Exact targets still pay for sigma: 0.1 * 0.1 under either quantile.
        close(b.per_target[1], 0.01, 1e-12);
        close(b.per_target[2], 0.01, 1e-12);
        close(b.total, 0.08 / 3.0, 1e-12);

        let target = EncodedGaze::new(-0.2, 1.0, 0.0);
        let pred = enc(0.0, 0.0, 0.0, 0.05);
        let b = gaze_loss(&pred, &target, &QuantileSet::default()).unwrap();
        close(b.per_target[0], 0.08, 1e-12);
    }

    #[test]
    fn gaze_loss_rejects_raw_output() {
        let raw = ModelOutput::Raw { theta: 0.0, phi: 0.0, sigma: 0.1 };
        assert!(gaze_loss(&raw, &EncodedGaze::new(0.0, 1.0, 0.0), &QuantileSet::default()).is_err());
    }

    #[test]
    fn regularized_examples() {
        let q = QuantileSet::default();
        let target = EncodedGaze::new(0.6, 0.8, 0.1);
        let on_circle = enc(0.6, 0.8, 0.3, 0.2);
        let plain = gaze_loss(&on_circle, &target, &q).unwrap();
        let reg = regularized_gaze_loss(&on_circle, &target, &q, 0.9).unwrap();
        assert!(reg.regularizer.abs() < 1e-30);
        close(reg.total, 0.9 * plain.total, 1e-15);

        let origin = enc(0.0, 0.0, 0.0, 0.0);
        let t0 = EncodedGaze::new(0.0, 0.0, 0.0);
        let reg = regularized_gaze_loss(&origin, &t0, &q, 0.9).unwrap();
        assert_eq!(reg.regularizer, 1.0);
        close(reg.total, 0.1, 1e-15);

        let pred = enc(0.1, -0.4, 0.7, 0.3);
        let plain = gaze_loss(&pred, &target, &q).unwrap();
        let reg = regularized_gaze_loss(&pred, &target, &q, 1.0).unwrap();
        assert_eq!(reg.total, plain.total);

        assert!(regularized_gaze_loss(&pred, &target, &q, 1.1).is_err());
        assert!(regularized_gaze_loss(&pred, &target, &q, -0.1).is_err());
    }

    #[test]
    fn regularizer_gradient_vanishes_on_circle() {
        let q = QuantileSet::default();
        let target = EncodedGaze::new(0.6, 0.8, 0.0);
        let pred = enc(0.6, 0.8, 0.0, 0.0);
        let plain = gaze_loss_grad(&pred, &target, &q).unwrap();
        let reg = regularized_gaze_loss_grad(&pred, &target, &q, 0.0).unwrap();
        assert!(reg.d_preds[0].abs() < 1e-15);
        assert!(reg.d_preds[1].abs() < 1e-15);
        assert_eq!(plain.d_preds.len(), 3);
    }

    fn residual_min(p: &[f64; 3], sigma: f64, t: &[f64; 3], q: &QuantileSet) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..3 {
            for &tau in q.taus() {
                m = m.min(residual(p[i], sigma, t[i], tau).abs());
            }
        }
        m
    }

    // Central differences of the loss over (s, c, s_phi, sigma).
    fn fd_grad(p: [f64; 3], sigma: f64, t: &EncodedGaze, q: &QuantileSet, reg: Option<f64>, h: f64) -> [f64; 4] {
        let eval = |p: [f64; 3], s: f64| {
            let o = enc(p[0], p[1], p[2], s);
            match reg {
                None => gaze_loss(&o, t, q).unwrap().total,
                Some(w) => regularized_gaze_loss(&o, t, q, w).unwrap().total,
            }
        };
        let mut g = [0.0; 4];
        for i in 0..3 {
            let (mut a, mut b) = (p, p);
            a[i] += h;
            b[i] -= h;
            g[i] = (eval(a, sigma) - eval(b, sigma)) / (2.0 * h);
        }
        g[3] = (eval(p, sigma + h) - eval(p, sigma - h)) / (2.0 * h);
        g
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let q = QuantileSet::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 100 {
            let p = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
            let sigma = rng.random_range(0.01..0.9);
            let t = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if residual_min(&p, sigma, &t, &q) < 1e-4 {
                continue;
            }
            let target = EncodedGaze::new(t[0], t[1], t[2]);
            for reg in [None, Some(0.9)] {
                let o = enc(p[0], p[1], p[2], sigma);
                let g = match reg {
                    None => gaze_loss_grad(&o, &target, &q).unwrap(),
                    Some(w) => regularized_gaze_loss_grad(&o, &target, &q, w).unwrap(),
                };
                let fd = fd_grad(p, sigma, &target, &q, reg, 1e-6);
                for i in 0..3 {
                    assert!(rel_err(g.d_preds[i], fd[i]) < 1e-5, "d_pred[{i}] {} vs {}", g.d_preds[i], fd[i]);
                }
                assert!(rel_err(g.d_sigma, fd[3]) < 1e-5, "d_sigma {} vs {}", g.d_sigma, fd[3]);
            }
            checked += 1;
        }
    }

    #[test]
    fn sigma_gradient_at_perfect_prediction() {
        let q = QuantileSet::default();
        let target = EncodedGaze::new(0.2, -0.5, 0.4);
        let p = target.as_array();
        let sigma = 0.3;
        let g = gaze_loss_grad(&enc(p[0], p[1], p[2], sigma), &target, &q).unwrap();
        let fd = fd_grad(p, sigma, &target, &q, None, 1e-6);
        assert!(rel_err(g.d_sigma, fd[3]) < 1e-5, "{} vs {}", g.d_sigma, fd[3]);
    }

    #[test]
    fn raw_mode_loss_uses_two_targets() {
        let q = QuantileSet::default();
        let label = GazeAngles::new(1.0, 0.2).unwrap();
        let pred = ModelOutput::Raw { theta: 1.0, phi: 0.2, sigma: 0.0 };
        let (b, g) = loss_and_grad(&pred, &label, &q, LossKind::Pinball).unwrap();
        assert_eq!(b.per_target.len(), 2);
        assert_eq!(b.total, 0.0);
        assert_eq!(g.d_preds.len(), 2);
        assert!(loss_and_grad(&pred, &label, &q, LossKind::Regularized(0.9)).is_err());
    }

    proptest! {
        #[test]
        fn pinball_is_nonnegative(y_p in -2.0f64..2.0, sigma in 0.0f64..1.0, y_g in -2.0f64..2.0, tau in 0.01f64..0.99) {
            let l = pinball(y_p, sigma, y_g, tau).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, residual(y_p, sigma, y_g, tau) == 0.0);
        }

        #[test]
        fn pinball_convex_in_prediction(a in -2.0f64..2.0, b in -2.0f64..2.0, sigma in 0.0f64..1.0, y_g in -2.0f64..2.0, tau in 0.01f64..0.99, lam in 0.0f64..1.0) {
            let mid = lam * a + (1.0 - lam) * b;
            let lhs = pinball(mid, sigma, y_g, tau).unwrap();
            let rhs = lam * pinball(a, sigma, y_g, tau).unwrap() + (1.0 - lam) * pinball(b, sigma, y_g, tau).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn loss_order_invariant(p in proptest::array::uniform3(-1.0f64..1.0), t in proptest::array::uniform3(-1.0f64..1.0), sigma in 0.0f64..1.0) {
            let fwd = QuantileSet::new(vec![0.1, 0.9]).unwrap();
            let rev = QuantileSet::new(vec![0.9, 0.1]).unwrap();
            let a = multi_target_pinball(&p, sigma, &t, &fwd).unwrap().total;
            let b = multi_target_pinball(&[p[2], p[0], p[1]], sigma, &[t[2], t[0], t[1]], &rev).unwrap().total;
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
