//! The trainable gaze network.
//!
//! Each crop scale runs through a shared three-layer conv trunk producing a
//! 16x8x8 map. The maps are fused by an elementwise max over the scale axis,
//! global-average pooled and passed through a two-layer dense head. Forward
//! passes keep enough state for an exact hand-written backward pass.

mod conv;
pub mod params;
mod train;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use crate::error::{GazeError, Result};
use crate::geometry::{decode_pitch, decode_yaw_sc, decode_yaw_wsc, EncodedGaze, GazeAngles};
use crate::image::Image;
use crate::preprocess::{
    center_crop, expand_static, resize_bilinear, sequence_crop_sizes, CropSchedule, SequenceScheduleKind,
};

pub use conv::out_side as conv_out_side;
pub use params::{decode_tensors, encode_tensors, BackboneParams, Tensor, HIDDEN, HIDDEN_MAX1D};
pub use train::{history_csv, train, Adam, EpochStats, TrainConfig, TrainOutcome};

use conv::{conv_relu_backward, conv_relu_forward, ConvCache};
use params::CONV3_OUT;

/// Side length the backbone accepts.
pub const INPUT_SIDE: usize = 64;
/// Spatial side of the backbone feature map.
pub const FEATURE_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    /// `(sin yaw, cos yaw, sin pitch, sigma)`.
    Encoded,
    /// `(yaw, pitch, sigma)`.
    Raw,
}

impl HeadMode {
    pub fn outputs(self) -> usize {
        match self {
            HeadMode::Encoded => 4,
            HeadMode::Raw => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadMode::Encoded => "encoded",
            HeadMode::Raw => "raw",
        }
    }

    pub fn default_decoder(self) -> Decoder {
        match self {
            HeadMode::Encoded => Decoder::Wsc,
            HeadMode::Raw => Decoder::Raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Elementwise max over per-scale 2D feature maps.
    SpatialMax,
    /// Elementwise max over per-scale 256-wide dense features.
    Max1d,
    /// Only the first crop of the schedule is used.
    SingleScale,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::SpatialMax => "spatial_max",
            Aggregation::Max1d => "max_1d",
            Aggregation::SingleScale => "single_scale",
        }
    }

    fn hidden(self) -> usize {
        match self {
            Aggregation::Max1d => HIDDEN_MAX1D,
            _ => HIDDEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    Wsc,
    Sc,
    Raw,
}

impl Decoder {
    pub fn name(self) -> &'static str {
        match self {
            Decoder::Wsc => "wsc",
            Decoder::Sc => "sc",
            Decoder::Raw => "raw",
        }
    }
}

/// Activated head output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelOutput {
    Encoded { gaze: EncodedGaze, sigma: f64 },
    Raw { theta: f64, phi: f64, sigma: f64 },
}

impl ModelOutput {
    pub fn sigma(&self) -> f64 {
        match self {
            ModelOutput::Encoded { sigma, .. } | ModelOutput::Raw { sigma, .. } => *sigma,
        }
    }

    pub fn head_mode(&self) -> HeadMode {
        match self {
            ModelOutput::Encoded { .. } => HeadMode::Encoded,
            ModelOutput::Raw { .. } => HeadMode::Raw,
        }
    }
}

pub fn predict_angles(out: &ModelOutput, decoder: Decoder) -> Result<GazeAngles> {
    match (out, decoder) {
        (ModelOutput::Encoded { gaze, .. }, Decoder::Wsc) => GazeAngles::new(decode_yaw_wsc(gaze).0, decode_pitch(gaze)),
        (ModelOutput::Encoded { gaze, .. }, Decoder::Sc) => GazeAngles::new(decode_yaw_sc(gaze), decode_pitch(gaze)),
        (ModelOutput::Raw { theta, phi, .. }, Decoder::Raw) => GazeAngles::new(*theta, *phi),
        (ModelOutput::Encoded { .. }, Decoder::Raw) => {
            Err(GazeError::ModeMismatch { decoder: "raw", mode: "encoded" })
        }
        (ModelOutput::Raw { .. }, d) => Err(GazeError::ModeMismatch { decoder: d.name(), mode: "raw" }),
    }
}

/// `C x H x W` activation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(GazeError::shape(format!("{channels}x{height}x{width}"), data.len()));
        }
        Ok(FeatureMap { channels, height, width, data })
    }

    fn shape_str(&self) -> String {
        format!("{}x{}x{}", self.channels, self.height, self.width)
    }
}

fn check_input(img: &Image) -> Result<()> {
    if img.side() != INPUT_SIDE {
        return Err(GazeError::shape(format!("{INPUT_SIDE}x{INPUT_SIDE} image"), format!("{0}x{0}", img.side())));
    }
    Ok(())
}

struct TrunkCache {
    layers: [ConvCache; 3],
}

impl TrunkCache {
    fn features(&self) -> &[f64] {
        &self.layers[2].out
    }
}

fn trunk_forward(input: &[f64], side: usize, p: &BackboneParams) -> TrunkCache {
    let l1 = conv_relu_forward(input, side, &p.conv1_w, &p.conv1_b);
    let s1 = conv_out_side(side);
    let l2 = conv_relu_forward(&l1.out, s1, &p.conv2_w, &p.conv2_b);
    let s2 = conv_out_side(s1);
    let l3 = conv_relu_forward(&l2.out, s2, &p.conv3_w, &p.conv3_b);
    TrunkCache { layers: [l1, l2, l3] }
}

fn trunk_backward(cache: &TrunkCache, mut d_feat: Vec<f64>, p: &BackboneParams, g: &mut BackboneParams) {
    let [l1, l2, l3] = &cache.layers;
    let mut d2 = conv_relu_backward(l3, &mut d_feat, &p.conv3_w, &mut g.conv3_w, &mut g.conv3_b, true)
        .expect("input grad requested");
    let mut d1 = conv_relu_backward(l2, &mut d2, &p.conv2_w, &mut g.conv2_w, &mut g.conv2_b, true)
        .expect("input grad requested");
    conv_relu_backward(l1, &mut d1, &p.conv1_w, &mut g.conv1_w, &mut g.conv1_b, false);
}

/// conv1 -> ReLU -> conv2 -> ReLU -> conv3 -> ReLU on a 64x64 image.
pub fn backbone_forward(img: &Image, params: &BackboneParams) -> Result<FeatureMap> {
    check_input(img)?;
    let t = trunk_forward(img.data(), INPUT_SIDE, params);
    FeatureMap::new(CONV3_OUT, FEATURE_SIDE, FEATURE_SIDE, t.layers[2].out.clone())
}

/// Elementwise max across maps. The second value holds, per element, the
/// index of the winning map (lowest index on ties).
pub fn aggregate_spatial_max(maps: &[FeatureMap]) -> Result<(FeatureMap, Vec<usize>)> {
    let first = maps.first().ok_or_else(|| GazeError::InvalidArgument("no feature maps".into()))?;
    if let Some(m) = maps.iter().find(|m| (m.channels, m.height, m.width) != (first.channels, first.height, first.width)) {
        return Err(GazeError::shape(first.shape_str(), m.shape_str()));
    }
    let slices: Vec<&[f64]> = maps.iter().map(|m| m.data.as_slice()).collect();
    let (data, arg) = max_over(&slices);
    Ok((FeatureMap { data, ..first.clone() }, arg))
}

/// Elementwise max over equally sized vectors, with argmax routing.
pub fn aggregate_max_1d(features: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<usize>)> {
    let first = features.first().ok_or_else(|| GazeError::InvalidArgument("no feature vectors".into()))?;
    if let Some(f) = features.iter().find(|f| f.len() != first.len()) {
        return Err(GazeError::shape(first.len(), f.len()));
    }
    let slices: Vec<&[f64]> = features.iter().map(|f| f.as_slice()).collect();
    Ok(max_over(&slices))
}

fn max_over(slices: &[&[f64]]) -> (Vec<f64>, Vec<usize>) {
    let mut best = slices[0].to_vec();
    let mut arg = vec![0; best.len()];
    for (k, s) in slices.iter().enumerate().skip(1) {
        for ((b, a), &v) in best.iter_mut().zip(arg.iter_mut()).zip(s.iter()) {
            if v > *b {
                *b = v;
                *a = k;
            }
        }
    }
    (best, arg)
}

fn global_avg_pool(features: &[f64], channels: usize) -> Vec<f64> {
    let n = features.len() / channels;
    features.chunks_exact(n).map(|c| c.iter().sum::<f64>() / n as f64).collect()
}

/// `w x + b` for a row-major `[out, in]` weight.
fn dense(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    w.data
        .chunks_exact(n_in)
        .zip(&b.data)
        .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Accumulates `dW += dy x^T`, `db += dy` and returns `W^T dy`.
fn dense_backward(w: &Tensor, x: &[f64], dy: &[f64], dw: &mut Tensor, db: &mut Tensor) -> Vec<f64> {
    let n_in = x.len();
    let mut dx = vec![0.0; n_in];
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db.data[o] += g;
        let row = &w.data[o * n_in..(o + 1) * n_in];
        let drow = &mut dw.data[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
    dx
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn activate(z: &[f64], mode: HeadMode) -> ModelOutput {
    match mode {
        HeadMode::Encoded => ModelOutput::Encoded {
            gaze: EncodedGaze::new(z[0].tanh(), z[1].tanh(), z[2].tanh()),
            sigma: sigmoid(z[3]),
        },
        HeadMode::Raw => ModelOutput::Raw {
            theta: PI * z[0].tanh(),
            phi: FRAC_PI_2 * z[1].tanh(),
            sigma: sigmoid(z[2]),
        },
    }
}

/// Chains a gradient over activated outputs back to the pre-activations.
fn activation_backward(z: &[f64], d_out: &[f64], d_sigma: f64, mode: HeadMode) -> Vec<f64> {
    let dtanh = |v: f64| 1.0 - v.tanh().powi(2);
    let s = sigmoid(*z.last().expect("nonempty head"));
    let ds = d_sigma * s * (1.0 - s);
    match mode {
        HeadMode::Encoded => vec![d_out[0] * dtanh(z[0]), d_out[1] * dtanh(z[1]), d_out[2] * dtanh(z[2]), ds],
        HeadMode::Raw => vec![d_out[0] * PI * dtanh(z[0]), d_out[1] * FRAC_PI_2 * dtanh(z[1]), ds],
    }
}

/// Dense head on an aggregated 2D map: GAP -> dense -> ReLU -> dense -> activation.
pub fn head_forward(fm: &FeatureMap, params: &BackboneParams, mode: HeadMode) -> Result<ModelOutput> {
    if (fm.channels, fm.height, fm.width) != (CONV3_OUT, FEATURE_SIDE, FEATURE_SIDE) {
        return Err(GazeError::shape(format!("{CONV3_OUT}x{FEATURE_SIDE}x{FEATURE_SIDE}"), fm.shape_str()));
    }
    if params.outputs() != mode.outputs() {
        return Err(GazeError::shape(format!("{} head outputs", mode.outputs()), params.outputs()));
    }
    let gap = global_avg_pool(&fm.data, fm.channels);
    let h: Vec<f64> = dense(&params.dense1_w, &params.dense1_b, &gap).into_iter().map(|v| v.max(0.0)).collect();
    Ok(activate(&dense(&params.dense2_w, &params.dense2_b, &h), mode))
}

enum AggCache {
    Spatial { argmax: Vec<usize>, gap: Vec<f64>, z1: Vec<f64> },
    Dense { argmax: Vec<usize>, gaps: Vec<Vec<f64>>, z1s: Vec<Vec<f64>> },
}

/// Everything a backward pass needs from one forward pass.
pub struct ForwardCache {
    trunks: Vec<TrunkCache>,
    agg: AggCache,
    h: Vec<f64>,
    z2: Vec<f64>,
    pub output: ModelOutput,
}

/// Forward pass over pre-scaled inputs (one per scale or frame).
pub fn forward_cached(
    params: &BackboneParams,
    mode: HeadMode,
    aggregation: Aggregation,
    scales: &[&Image],
) -> Result<ForwardCache> {
    if scales.is_empty() {
        return Err(GazeError::InvalidArgument("no input scales".into()));
    }
    for img in scales {
        check_input(img)?;
    }
    if params.outputs() != mode.outputs() || params.hidden() != aggregation.hidden() {
        return Err(GazeError::shape(
            format!("{}x{} head", aggregation.hidden(), mode.outputs()),
            format!("{}x{}", params.hidden(), params.outputs()),
        ));
    }
    let trunks: Vec<TrunkCache> = scales.iter().map(|img| trunk_forward(img.data(), INPUT_SIDE, params)).collect();
    let (agg, h) = match aggregation {
        Aggregation::SpatialMax | Aggregation::SingleScale => {
            let maps: Vec<&[f64]> = trunks.iter().map(|t| t.features()).collect();
            let (fused, argmax) = max_over(&maps);
            let gap = global_avg_pool(&fused, CONV3_OUT);
            let z1 = dense(&params.dense1_w, &params.dense1_b, &gap);
            let h = z1.iter().map(|v| v.max(0.0)).collect();
            (AggCache::Spatial { argmax, gap, z1 }, h)
        }
        Aggregation::Max1d => {
            let gaps: Vec<Vec<f64>> = trunks.iter().map(|t| global_avg_pool(t.features(), CONV3_OUT)).collect();
            let z1s: Vec<Vec<f64>> = gaps.iter().map(|g| dense(&params.dense1_w, &params.dense1_b, g)).collect();
            let hs: Vec<Vec<f64>> = z1s.iter().map(|z| z.iter().map(|v| v.max(0.0)).collect()).collect();
            let (h, argmax) = aggregate_max_1d(&hs)?;
            (AggCache::Dense { argmax, gaps, z1s }, h)
        }
    };
    let z2 = dense(&params.dense2_w, &params.dense2_b, &h);
    let output = activate(&z2, mode);
    Ok(ForwardCache { trunks, agg, h, z2, output })
}

/// Backpropagates a loss gradient given over the activated outputs
/// (`d_out` for the angle outputs, `d_sigma` for the uncertainty) and
/// accumulates parameter gradients into `grads`.
pub fn backward(
    params: &BackboneParams,
    cache: &ForwardCache,
    d_out: &[f64],
    d_sigma: f64,
    grads: &mut BackboneParams,
) {
    let mode = cache.output.head_mode();
    let dz2 = activation_backward(&cache.z2, d_out, d_sigma, mode);
    let dh = dense_backward(&params.dense2_w, &cache.h, &dz2, &mut grads.dense2_w, &mut grads.dense2_b);
    let n_feat = CONV3_OUT * FEATURE_SIDE * FEATURE_SIDE;
    let spread = 1.0 / (FEATURE_SIDE * FEATURE_SIDE) as f64;
    let mut d_feats: Vec<Option<Vec<f64>>> = vec![None; cache.trunks.len()];
    match &cache.agg {
        AggCache::Spatial { argmax, gap, z1 } => {
            let dz1: Vec<f64> = dh.iter().zip(z1).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect();
            let dgap = dense_backward(&params.dense1_w, gap, &dz1, &mut grads.dense1_w, &mut grads.dense1_b);
            for (e, &k) in argmax.iter().enumerate() {
                let g = dgap[e / (FEATURE_SIDE * FEATURE_SIDE)] * spread;
                d_feats[k].get_or_insert_with(|| vec![0.0; n_feat])[e] = g;
            }
        }
        AggCache::Dense { argmax, gaps, z1s } => {
            let mut dz1s: Vec<Option<Vec<f64>>> = vec![None; z1s.len()];
            for (j, &k) in argmax.iter().enumerate() {
                if z1s[k][j] > 0.0 {
                    dz1s[k].get_or_insert_with(|| vec![0.0; dh.len()])[j] = dh[j];
                }
            }
            for (k, dz1) in dz1s.iter().enumerate() {
                let Some(dz1) = dz1 else { continue };
                let dgap = dense_backward(&params.dense1_w, &gaps[k], dz1, &mut grads.dense1_w, &mut grads.dense1_b);
                let d: Vec<f64> = (0..n_feat).map(|e| dgap[e / (FEATURE_SIDE * FEATURE_SIDE)] * spread).collect();
                d_feats[k] = Some(d);
            }
        }
    }
    for (trunk, d) in cache.trunks.iter().zip(d_feats) {
        if let Some(d) = d {
            trunk_backward(trunk, d, params, grads);
        }
    }
}

/// Anything that maps an input image to a head output.
pub trait GazePredictor: Sync {
    fn head_mode(&self) -> HeadMode;
    fn predict(&self, img: &Image) -> Result<ModelOutput>;
}

/// Parameters plus the configuration needed to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeModel {
    pub params: BackboneParams,
    pub head: HeadMode,
    pub aggregation: Aggregation,
    schedule: CropSchedule,
}

impl GazeModel {
    pub fn new(head: HeadMode, aggregation: Aggregation, schedule: CropSchedule, seed: u64) -> Result<Self> {
        schedule.check_fits(INPUT_SIDE)?;
        let params = BackboneParams::init(aggregation.hidden(), head.outputs(), seed);
        Ok(GazeModel { params, head, aggregation, schedule: Self::effective(aggregation, schedule) })
    }

    pub fn from_parts(
        params: BackboneParams,
        head: HeadMode,
        aggregation: Aggregation,
        schedule: CropSchedule,
    ) -> Result<Self> {
        schedule.check_fits(INPUT_SIDE)?;
        if params.outputs() != head.outputs() || params.hidden() != aggregation.hidden() {
            return Err(GazeError::shape(
                format!("{}x{} head", aggregation.hidden(), head.outputs()),
                format!("{}x{}", params.hidden(), params.outputs()),
            ));
        }
        Ok(GazeModel { params, head, aggregation, schedule: Self::effective(aggregation, schedule) })
    }

    fn effective(aggregation: Aggregation, schedule: CropSchedule) -> CropSchedule {
        match aggregation {
            Aggregation::SingleScale => schedule.first_only(),
            _ => schedule,
        }
    }

    pub fn schedule(&self) -> &CropSchedule {
        &self.schedule
    }

    /// Crops of `img` the model consumes, one per schedule entry.
    pub fn expand(&self, img: &Image) -> Result<Vec<Image>> {
        check_input(img)?;
        expand_static(img, &self.schedule)
    }

    pub fn forward_scales(&self, scales: &[Image]) -> Result<ModelOutput> {
        let refs: Vec<&Image> = scales.iter().collect();
        Ok(forward_cached(&self.params, self.head, self.aggregation, &refs)?.output)
    }

    /// Static multi-scale forward: expand, run the trunk per scale, fuse, head.
    pub fn forward_msa(&self, img: &Image) -> Result<ModelOutput> {
        self.forward_scales(&self.expand(img)?)
    }

    /// Sequence forward over `2T + 1` frames, each cropped per `kind`.
    pub fn forward_sequence(&self, frames: &[Image], kind: SequenceScheduleKind) -> Result<ModelOutput> {
        self.forward_scales(&self.sequence_inputs(frames, kind)?)
    }

    pub fn sequence_inputs(&self, frames: &[Image], kind: SequenceScheduleKind) -> Result<Vec<Image>> {
        let expected = 2 * (self.schedule.len() - 1) + 1;
        if frames.len() != expected {
            return Err(GazeError::shape(format!("{expected} frames"), frames.len()));
        }
        sequence_crop_sizes(&self.schedule, kind)
            .into_iter()
            .zip(frames)
            .map(|(size, frame)| {
                check_input(frame)?;
                if size == frame.side() {
                    Ok(frame.clone())
                } else {
                    resize_bilinear(&center_crop(frame, size)?, frame.side())
                }
            })
            .collect()
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut named: Vec<(String, Tensor)> = params::TENSOR_NAMES
            .iter()
            .zip(self.params.tensors())
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        let head = match self.head {
            HeadMode::Encoded => 0.0,
            HeadMode::Raw => 1.0,
        };
        let agg = match self.aggregation {
            Aggregation::SpatialMax => 0.0,
            Aggregation::Max1d => 1.0,
            Aggregation::SingleScale => 2.0,
        };
        let crops: Vec<f64> = self.schedule.sizes().iter().map(|&s| s as f64).collect();
        named.push(("config.head".into(), Tensor { shape: vec![1], data: vec![head] }));
        named.push(("config.aggregation".into(), Tensor { shape: vec![1], data: vec![agg] }));
        named.push(("config.crops".into(), Tensor { shape: vec![crops.len()], data: crops }));
        named
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        encode_tensors(&self.named_tensors())
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let named = decode_tensors(bytes)?;
        let scalar = |name: &str| -> Result<f64> {
            named
                .iter()
                .find(|(n, _)| n == name)
                .and_then(|(_, t)| (t.data.len() == 1).then(|| t.data[0]))
                .ok_or_else(|| GazeError::Checkpoint(format!("missing scalar {name}")))
        };
        let head = match scalar("config.head")? {
            v if v == 0.0 => HeadMode::Encoded,
            v if v == 1.0 => HeadMode::Raw,
            v => return Err(GazeError::Checkpoint(format!("unknown head mode {v}"))),
        };
        let aggregation = match scalar("config.aggregation")? {
            v if v == 0.0 => Aggregation::SpatialMax,
            v if v == 1.0 => Aggregation::Max1d,
            v if v == 2.0 => Aggregation::SingleScale,
            v => return Err(GazeError::Checkpoint(format!("unknown aggregation {v}"))),
        };
        let crops = named
            .iter()
            .find(|(n, _)| n == "config.crops")
            .ok_or_else(|| GazeError::Checkpoint("missing config.crops".into()))?;
        let sizes = crops
            .1
            .data
            .iter()
            .map(|&v| {
                if v.fract() == 0.0 && (1.0..=INPUT_SIDE as f64).contains(&v) {
                    Ok(v as usize)
                } else {
                    Err(GazeError::Checkpoint(format!("bad crop size {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let params = BackboneParams::from_named(&named)?;
        if !params.all_finite() {
            return Err(GazeError::Checkpoint("non-finite parameter".into()));
        }
        Self::from_parts(params, head, aggregation, CropSchedule::new(sizes)?)
            .map_err(|e| GazeError::Checkpoint(e.to_string()))
    }

    /// Writes the checkpoint via a temporary file and an atomic rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, &self.to_checkpoint_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| GazeError::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}

impl GazePredictor for GazeModel {
    fn head_mode(&self) -> HeadMode {
        self.head
    }

    fn predict(&self, img: &Image) -> Result<ModelOutput> {
        self.forward_msa(img)
    }
}
