//! Batch evaluation over labelled datasets.
//!
//! Predictions may be computed on several threads, but per-sample errors are
//! always reduced sequentially in dataset order so reports are bitwise
//! independent of the thread count.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{GazeError, Result};
use crate::geometry::{angular_error, classify_bin, GazeAngles, GazeBin, YawEstimates};
use crate::image::Image;
use crate::model::{predict_angles, Decoder, GazePredictor, HeadMode, ModelOutput};
use crate::preprocess::{perturb_zoom_in, perturb_zoom_out};
use crate::synth::Sample;

/// Zoom magnifications (pixels) used for 64px inputs.
pub const DESK_MAGNIFICATIONS: [usize; 4] = [4, 8, 12, 16];
pub const YAW_HIST_BINS: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinStats {
    /// Mean angular error in radians; NaN for an empty bin.
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub decoder: &'static str,
    pub n: usize,
    pub overall: f64,
    pub back: BinStats,
    pub front180: BinStats,
    pub front40: BinStats,
}

impl EvalReport {
    pub fn bin(&self, bin: GazeBin) -> BinStats {
        match bin {
            GazeBin::Back => self.back,
            GazeBin::Front180 => self.front180,
            GazeBin::Front40 => self.front40,
        }
    }

    /// Builds a report from per-sample errors, summed in the given order.
    pub fn from_errors(decoder: Decoder, labels: &[GazeAngles], errors: &[f64]) -> Self {
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        let mut total = 0.0;
        for (label, &e) in labels.iter().zip(errors) {
            total += e;
            for bin in classify_bin(label.yaw()) {
                let k = GazeBin::ALL.iter().position(|b| b == bin).expect("bin listed in ALL");
                sums[k] += e;
                counts[k] += 1;
            }
        }
        let stats = |k: usize| BinStats { mean: sums[k] / counts[k] as f64, count: counts[k] };
        let idx = |b: GazeBin| GazeBin::ALL.iter().position(|x| *x == b).expect("bin listed in ALL");
        EvalReport {
            decoder: decoder.name(),
            n: errors.len(),
            overall: total / errors.len() as f64,
            back: stats(idx(GazeBin::Back)),
            front180: stats(idx(GazeBin::Front180)),
            front40: stats(idx(GazeBin::Front40)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `decoder,bin,mean_error_rad,count`, with an `all360` row first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("decoder,bin,mean_error_rad,count\n");
        self.write_csv_rows(&mut out);
        out
    }

    fn write_csv_rows(&self, out: &mut String) {
        let _ = writeln!(out, "{},all360,{},{}", self.decoder, self.overall, self.n);
        for bin in GazeBin::ALL {
            let s = self.bin(bin);
            let _ = writeln!(out, "{},{},{},{}", self.decoder, bin.name(), s.mean, s.count);
        }
    }
}

/// Side-by-side reports sharing one forward pass per sample.
pub fn decoder_table_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("decoder,bin,mean_error_rad,count\n");
    for r in reports {
        r.write_csv_rows(&mut out);
    }
    out
}

pub fn check_decoder(mode: HeadMode, decoder: Decoder) -> Result<()> {
    match (mode, decoder) {
        (HeadMode::Encoded, Decoder::Raw) => Err(GazeError::ModeMismatch { decoder: "raw", mode: "encoded" }),
        (HeadMode::Raw, Decoder::Sc | Decoder::Wsc) => {
            Err(GazeError::ModeMismatch { decoder: decoder.name(), mode: "raw" })
        }
        _ => Ok(()),
    }
}

/// Maps `f` over `items` on up to `threads` scoped threads, preserving order.
fn par_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<Result<Vec<U>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<U>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn predict_all<P: GazePredictor + ?Sized>(model: &P, images: &[&Image], threads: usize) -> Result<Vec<ModelOutput>> {
    par_map(images, threads, |img| model.predict(img))
}

fn errors_for(outputs: &[ModelOutput], labels: &[GazeAngles], decoder: Decoder) -> Result<Vec<f64>> {
    outputs
        .iter()
        .zip(labels)
        .map(|(o, l)| Ok(angular_error(predict_angles(o, decoder)?, *l)))
        .collect()
}

fn split(dataset: &[Sample]) -> (Vec<&Image>, Vec<GazeAngles>) {
    dataset.iter().map(|s| (&s.image, s.label)).unzip()
}

pub fn evaluate<P: GazePredictor + ?Sized>(
    model: &P,
    dataset: &[Sample],
    decoder: Decoder,
    threads: usize,
) -> Result<EvalReport> {
    check_decoder(model.head_mode(), decoder)?;
    if dataset.is_empty() {
        return Err(GazeError::EmptyDataset);
    }
    let (images, labels) = split(dataset);
    let outputs = predict_all(model, &images, threads)?;
    Ok(EvalReport::from_errors(decoder, &labels, &errors_for(&outputs, &labels, decoder)?))
}

/// `sc` and `wsc` reports from a single forward pass per sample.
pub fn compare_decoders<P: GazePredictor + ?Sized>(
    model: &P,
    dataset: &[Sample],
    threads: usize,
) -> Result<Vec<EvalReport>> {
    if model.head_mode() != HeadMode::Encoded {
        return Err(GazeError::ModeMismatch { decoder: "sc/wsc", mode: "raw" });
    }
    if dataset.is_empty() {
        return Err(GazeError::EmptyDataset);
    }
    let (images, labels) = split(dataset);
    let outputs = predict_all(model, &images, threads)?;
    [Decoder::Sc, Decoder::Wsc]
        .into_iter()
        .map(|d| Ok(EvalReport::from_errors(d, &labels, &errors_for(&outputs, &labels, d)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRow {
    /// Magnification in pixels; 0 is the unperturbed baseline.
    pub c: usize,
    pub zoom_in_error: f64,
    pub zoom_out_error: f64,
    /// Average of the zoom-in and zoom-out mean errors.
    pub mean_error: f64,
    pub pct_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub decoder: &'static str,
    pub n: usize,
    /// Baseline first, then one row per magnification in the order given.
    pub rows: Vec<PerturbationRow>,
}

impl PerturbationReport {
    pub fn magnifications(&self) -> Vec<usize> {
        self.rows.iter().skip(1).map(|r| r.c).collect()
    }

    /// Mean percentage increase over all non-baseline rows.
    pub fn mean_pct_increase(&self) -> f64 {
        let rows = &self.rows[1..];
        rows.iter().map(|r| r.pct_increase).sum::<f64>() / rows.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,zoom_in_error_rad,zoom_out_error_rad,mean_error_rad,pct_increase\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.c, r.zoom_in_error, r.zoom_out_error, r.mean_error, r.pct_increase
            );
        }
        out
    }
}

fn pct_increase(mean: f64, baseline: f64) -> f64 {
    if mean == baseline {
        0.0
    } else {
        100.0 * (mean - baseline) / baseline
    }
}

/// Error growth under zoom perturbations, restricted to front-facing samples.
pub fn scale_robustness<P: GazePredictor + ?Sized>(
    model: &P,
    dataset: &[Sample],
    magnifications: &[usize],
    threads: usize,
) -> Result<PerturbationReport> {
    if let Some(c) = magnifications.iter().find(|&&c| c % 2 == 1) {
        return Err(GazeError::InvalidArgument(format!("magnification {c} must be even")));
    }
    let decoder = model.head_mode().default_decoder();
    let front: Vec<&Sample> =
        dataset.iter().filter(|s| classify_bin(s.label.yaw()).contains(&GazeBin::Front180)).collect();
    if front.is_empty() {
        return Err(GazeError::EmptyDataset);
    }
    let labels: Vec<GazeAngles> = front.iter().map(|s| s.label).collect();
    let mean_error = |images: &[&Image]| -> Result<f64> {
        let outputs = predict_all(model, images, threads)?;
        Ok(errors_for(&outputs, &labels, decoder)?.iter().sum::<f64>() / labels.len() as f64)
    };

    let originals: Vec<&Image> = front.iter().map(|s| &s.image).collect();
    let baseline = mean_error(&originals)?;
    let mut rows = vec![PerturbationRow {
        c: 0,
        zoom_in_error: baseline,
        zoom_out_error: baseline,
        mean_error: baseline,
        pct_increase: 0.0,
    }];
    for &c in magnifications {
        let zin = par_map(&originals, threads, |img| perturb_zoom_in(img, c))?;
        let zout = par_map(&originals, threads, |img| perturb_zoom_out(img, c))?;
        let m_in = mean_error(&zin.iter().collect::<Vec<_>>())?;
        let m_out = mean_error(&zout.iter().collect::<Vec<_>>())?;
        let mean = 0.5 * (m_in + m_out);
        rows.push(PerturbationRow {
            c,
            zoom_in_error: m_in,
            zoom_out_error: m_out,
            mean_error: mean,
            pct_increase: pct_increase(mean, baseline),
        });
    }
    Ok(PerturbationReport { decoder: decoder.name(), n: front.len(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaBin {
    pub lo: f64,
    pub hi: f64,
    /// NaN for an empty bin.
    pub mean: f64,
    pub count: usize,
}

/// Mean error per equal-width bin of a metadata value's observed range.
pub fn group_by_meta<P: GazePredictor + ?Sized>(
    model: &P,
    dataset: &[Sample],
    decoder: Decoder,
    key: &str,
    n_bins: usize,
    threads: usize,
) -> Result<Vec<MetaBin>> {
    check_decoder(model.head_mode(), decoder)?;
    if n_bins == 0 {
        return Err(GazeError::InvalidArgument("need at least one bin".into()));
    }
    if dataset.is_empty() {
        return Err(GazeError::EmptyDataset);
    }
    let values = dataset
        .iter()
        .enumerate()
        .map(|(i, s)| s.meta.get(key).copied().ok_or_else(|| GazeError::MissingMeta { index: i, key: key.into() }))
        .collect::<Result<Vec<f64>>>()?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (images, labels) = split(dataset);
    let outputs = predict_all(model, &images, threads)?;
    let errors = errors_for(&outputs, &labels, decoder)?;

    let width = (hi - lo) / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&v, &e) in values.iter().zip(&errors) {
        let k = if width > 0.0 { (((v - lo) / width) as usize).min(n_bins - 1) } else { 0 };
        sums[k] += e;
        counts[k] += 1;
    }
    Ok((0..n_bins)
        .map(|k| MetaBin {
            lo: lo + k as f64 * width,
            hi: if k + 1 == n_bins { hi } else { lo + (k + 1) as f64 * width },
            mean: sums[k] / counts[k] as f64,
            count: counts[k],
        })
        .collect())
}

pub fn meta_bins_csv(key: &str, bins: &[MetaBin]) -> String {
    let mut out = format!("{key}_lo,{key}_hi,mean_error_rad,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{},{}", b.lo, b.hi, b.mean, b.count);
    }
    out
}

/// 5-degree histograms over `[-pi, pi]` of the two yaw branch estimates and
/// the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YawHistogram {
    /// `YAW_HIST_BINS + 1` edges; the first is exactly `-pi`, the last `pi`.
    pub edges: Vec<f64>,
    pub theta_s: Vec<usize>,
    pub theta_c: Vec<usize>,
    pub theta_g: Vec<usize>,
}

impl YawHistogram {
    /// Bin holding `yaw`; bins are half-open except the last, which includes `pi`.
    pub fn bin_of(&self, yaw: f64) -> usize {
        self.edges[1..YAW_HIST_BINS].partition_point(|&e| e <= yaw)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo_deg,hi_deg,theta_s,theta_c,theta_g\n");
        for k in 0..YAW_HIST_BINS {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.edges[k].to_degrees(),
                self.edges[k + 1].to_degrees(),
                self.theta_s[k],
                self.theta_c[k],
                self.theta_g[k]
            );
        }
        out
    }
}

/// Histograms of `(estimates, ground-truth yaw)` pairs.
pub fn yaw_histogram(records: &[(YawEstimates, f64)]) -> YawHistogram {
    let mut edges: Vec<f64> = (0..=YAW_HIST_BINS).map(|k| -PI + k as f64 * TAU / YAW_HIST_BINS as f64).collect();
    edges[YAW_HIST_BINS] = PI;
    let mut h = YawHistogram {
        edges,
        theta_s: vec![0; YAW_HIST_BINS],
        theta_c: vec![0; YAW_HIST_BINS],
        theta_g: vec![0; YAW_HIST_BINS],
    };
    for (est, truth) in records {
        let (s, c, g) = (h.bin_of(est.theta_s), h.bin_of(est.theta_c), h.bin_of(*truth));
        h.theta_s[s] += 1;
        h.theta_c[c] += 1;
        h.theta_g[g] += 1;
    }
    h
}
