use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward, forward_cached, predict_angles, Aggregation, BackboneParams, GazeModel, HeadMode};
use crate::error::{GazeError, Result};
use crate::geometry::angular_error;
use crate::image::Image;
use crate::loss::{loss_and_grad, LossKind, QuantileSet};
use crate::preprocess::CropSchedule;
use crate::synth::Sample;

/// Stream offset so shuffling never shares a generator with initialisation.
const SHUFFLE_STREAM: u64 = 0x5eed_0f_5a3b1e;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: LossKind,
    pub head: HeadMode,
    pub aggregation: Aggregation,
    pub schedule: CropSchedule,
    pub quantiles: QuantileSet,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            loss: LossKind::Pinball,
            head: HeadMode::Encoded,
            aggregation: Aggregation::SpatialMax,
            schedule: CropSchedule::desk_default(),
            quantiles: QuantileSet::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GazeError::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("Adam betas must lie in [0, 1) and eps must be positive".into());
        }
        match (self.loss, self.head) {
            (LossKind::Regularized(_), HeadMode::Raw) => bad("regularized loss needs the encoded head".into()),
            (LossKind::Regularized(w), _) if !(0.0..=1.0).contains(&w) => {
                bad(format!("regularizer weight {w} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when no validation set was supplied.
    pub val_angular_error_rad: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GazeModel,
    pub history: Vec<EpochStats>,
}

/// Adam with bias-corrected moments, one moment buffer per tensor.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: BackboneParams,
    v: BackboneParams,
}

impl Adam {
    pub fn new(params: &BackboneParams, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { lr, beta1, beta2, eps, step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn update(&mut self, params: &mut BackboneParams, grads: &BackboneParams) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

fn mean_angular_error(model: &GazeModel, inputs: &[Vec<Image>], samples: &[Sample]) -> Result<f64> {
    let decoder = model.head.default_decoder();
    let mut acc = 0.0;
    for (scales, s) in inputs.iter().zip(samples) {
        let out = model.forward_scales(scales)?;
        acc += angular_error(predict_angles(&out, decoder)?, s.label);
    }
    Ok(acc / samples.len() as f64)
}

/// Trains a fresh model. Results are bitwise reproducible for a fixed config.
pub fn train(dataset: &[Sample], val: Option<&[Sample]>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(GazeError::EmptyDataset);
    }
    let mut model = GazeModel::new(config.head, config.aggregation, config.schedule.clone(), config.seed)?;
    let inputs: Vec<Vec<Image>> = dataset.iter().map(|s| model.expand(&s.image)).collect::<Result<_>>()?;
    let val_inputs: Option<Vec<Vec<Image>>> = match val {
        Some(v) if !v.is_empty() => Some(v.iter().map(|s| model.expand(&s.image)).collect::<Result<_>>()?),
        _ => None,
    };

    let mut adam = Adam::new(&model.params, config.learning_rate, config.beta1, config.beta2, config.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.params.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let scales: Vec<&Image> = inputs[i].iter().collect();
                let cache = forward_cached(&model.params, model.head, model.aggregation, &scales)?;
                let (loss, g) = loss_and_grad(&cache.output, &dataset[i].label, &config.quantiles, config.loss)?;
                if !loss.total.is_finite() {
                    return Err(GazeError::NonFiniteLoss { epoch });
                }
                epoch_loss += loss.total;
                let d_out: Vec<f64> = g.d_preds.iter().map(|d| d * scale).collect();
                backward(&model.params, &cache, &d_out, g.d_sigma * scale, &mut grads);
            }
            adam.update(&mut model.params, &grads);
        }
        if !model.params.all_finite() {
            return Err(GazeError::NonFiniteLoss { epoch });
        }
        let val_err = match (&val_inputs, val) {
            (Some(vi), Some(v)) => mean_angular_error(&model, vi, v)?,
            _ => f64::NAN,
        };
        history.push(EpochStats {
            epoch,
            train_loss: epoch_loss / dataset.len() as f64,
            val_angular_error_rad: val_err,
        });
    }
    Ok(TrainOutcome { model, history })
}

/// History as CSV with header `epoch,train_loss,val_angular_error_rad`.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_angular_error_rad\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.train_loss, h.val_angular_error_rad));
    }
    out
}
