//! `gazekit` command-line tool: generate data, train, evaluate, decode.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gazekit::eval::{
    compare_decoders, decoder_table_csv, evaluate, group_by_meta, meta_bins_csv, scale_robustness,
};
use gazekit::geometry::{decode_pitch, decode_theta_c, decode_theta_s, decode_yaw_sc, decode_yaw_wsc, EncodedGaze};
use gazekit::loss::LossKind;
use gazekit::manifest::{load_manifest, write_manifest};
use gazekit::model::{history_csv, train, Aggregation, Decoder, GazeModel, HeadMode, TrainConfig};
use gazekit::preprocess::CropSchedule;
use gazekit::synth::{generate_dataset, generate_sequence, DatasetSpec, Sample, SampleRange};
use gazekit::{write_atomic, GazeError};

#[derive(Parser)]
#[command(name = "gazekit", version, about = "Full-range gaze estimation on synthetic head images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset to PGM images plus a manifest
    Gen(GenArgs),
    /// Train a model on a manifest and write a checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest
    Eval(EvalArgs),
    /// Print every yaw estimate for one encoded prediction
    Decode(DecodeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of samples (or sequences with --sequence-frames)
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives manifest.jsonl and images/
    #[arg(long)]
    out: PathBuf,
    /// Yaw range in degrees
    #[arg(long, default_value_t = -180.0, allow_negative_numbers = true)]
    yaw_min: f64,
    #[arg(long, default_value_t = 180.0, allow_negative_numbers = true)]
    yaw_max: f64,
    /// Pitch range in degrees
    #[arg(long, default_value_t = -40.0, allow_negative_numbers = true)]
    pitch_min: f64,
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    pitch_max: f64,
    #[arg(long, default_value_t = 0.5)]
    scale_min: f64,
    #[arg(long, default_value_t = 1.0)]
    scale_max: f64,
    /// Amplitude of the uniform pixel noise
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Emit sequences of this many frames (odd) instead of still images
    #[arg(long)]
    sequence_frames: Option<usize>,
    /// Yaw change per frame in radians
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    drift: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Encoded,
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    #[value(name = "spatial_max")]
    SpatialMax,
    #[value(name = "max_1d")]
    Max1d,
    #[value(name = "single_scale")]
    SingleScale,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Pinball,
    Regularized,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Wsc,
    Sc,
    Raw,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Optional validation manifest, scored after every epoch
    #[arg(long)]
    val_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = HeadArg::Encoded)]
    head: HeadArg,
    #[arg(long, value_enum, default_value_t = AggArg::SpatialMax)]
    agg: AggArg,
    /// Strictly decreasing center-crop sizes
    #[arg(long, value_delimiter = ',', default_value = "64,57,50,43")]
    crops: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = LossArg::Pinball)]
    loss: LossArg,
    /// Weight of the pinball term in the regularized loss
    #[arg(long, default_value_t = 0.9)]
    reg_weight: f64,
    /// Checkpoint path
    #[arg(long)]
    out: PathBuf,
    /// History CSV path [default: <out>.history.csv]
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Defaults to wsc for encoded heads and raw for raw heads
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    #[arg(long)]
    report_json: Option<PathBuf>,
    /// Per-bin CSV; extra tables go next to it with a suffix
    #[arg(long)]
    report_csv: Option<PathBuf>,
    /// Add the sc/wsc comparison table
    #[arg(long)]
    compare_decoders: bool,
    /// Group the error by this metadata key
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Zoom magnifications in pixels, e.g. 4,8,12,16
    #[arg(long, value_delimiter = ',')]
    perturb: Option<Vec<usize>>,
    #[arg(long, env = "GAZEKIT_THREADS", default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(allow_negative_numbers = true)]
    s_theta: f64,
    #[arg(allow_negative_numbers = true)]
    c_theta: f64,
    #[arg(allow_negative_numbers = true)]
    s_phi: f64,
}

/// Failure classes, one per exit code.
enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<GazeError> for Failure {
    fn from(e: GazeError) -> Self {
        let msg = e.to_string();
        match e {
            GazeError::InvalidArgument(_)
            | GazeError::InvalidSchedule(_)
            | GazeError::ModeMismatch { .. }
            | GazeError::YawOutOfRange(_)
            | GazeError::PitchOutOfRange(_) => Failure::Usage(msg),
            GazeError::NonFiniteLoss { .. } => Failure::Numeric(msg),
            _ => Failure::Data(msg),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    write_atomic(path, text.as_bytes()).map_err(Failure::from)
}

/// Fails early if a file could not be created at `path` later on.
fn check_writable(path: &Path) -> CmdResult {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Failure::Data(format!("{}: directory does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(Failure::Data(format!("{}: is a directory", path.display())));
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let range = |lo: f64, hi: f64| SampleRange::new(lo.to_radians(), hi.to_radians());
    let spec = DatasetSpec {
        yaw: range(a.yaw_min, a.yaw_max),
        pitch: range(a.pitch_min, a.pitch_max),
        scale: SampleRange::new(a.scale_min, a.scale_max),
        noise_amp: a.noise,
    };
    if !(a.noise >= 0.0) {
        return Err(usage("--noise must be non-negative"));
    }
    let samples = match a.sequence_frames {
        None => generate_dataset(a.n, a.seed, &spec)?,
        Some(frames) => gen_sequences(&a, frames, spec)?,
    };
    fs::create_dir_all(&a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    let path = write_manifest(&a.out, &samples)?;
    println!("wrote {} samples to {}", samples.len(), path.display());
    Ok(())
}

/// Sequence starts are drawn like still samples, with the yaw range shrunk
/// so the whole drift stays inside it.
fn gen_sequences(a: &GenArgs, frames: usize, mut spec: DatasetSpec) -> Result<Vec<Sample>, Failure> {
    if frames % 2 == 0 {
        return Err(usage("--sequence-frames must be odd"));
    }
    let span = a.drift * (frames - 1) as f64;
    if span >= 0.0 {
        spec.yaw.hi -= span;
    } else {
        spec.yaw.lo -= span;
    }
    if spec.yaw.lo > spec.yaw.hi {
        return Err(usage("drift too large for the yaw range"));
    }
    let starts = generate_dataset(a.n, a.seed, &spec)?;
    let mut out = Vec::with_capacity(a.n * frames);
    for (k, s) in starts.iter().enumerate() {
        let scale = s.meta["scale"];
        let seq_seed = a.seed.wrapping_add(k as u64);
        for mut f in generate_sequence(frames, s.label, a.drift, scale, a.noise, seq_seed)? {
            f.meta.insert("sequence".into(), k as f64);
            out.push(f);
        }
    }
    Ok(out)
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let history_path = a.history.clone().unwrap_or_else(|| with_suffix(&a.out, ".history.csv"));
    let config = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.seed,
        loss: match a.loss {
            LossArg::Pinball => LossKind::Pinball,
            LossArg::Regularized => LossKind::Regularized(a.reg_weight),
        },
        head: match a.head {
            HeadArg::Encoded => HeadMode::Encoded,
            HeadArg::Raw => HeadMode::Raw,
        },
        aggregation: match a.agg {
            AggArg::SpatialMax => Aggregation::SpatialMax,
            AggArg::Max1d => Aggregation::Max1d,
            AggArg::SingleScale => Aggregation::SingleScale,
        },
        schedule: CropSchedule::new(a.crops.clone())?,
        ..TrainConfig::default()
    };
    if a.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    config.validate()?;
    config.schedule.check_fits(gazekit::model::INPUT_SIDE)?;
    check_writable(&a.out)?;
    check_writable(&history_path)?;

    let data = load_manifest(&a.manifest)?;
    let val = a.val_manifest.as_deref().map(load_manifest).transpose()?;
    let outcome = train(&data, val.as_deref(), &config)?;
    for h in &outcome.history {
        eprintln!("epoch {:>4}  loss {:.6}  val {:.3} deg", h.epoch, h.train_loss, h.val_angular_error_rad.to_degrees());
    }
    outcome.model.save(&a.out)?;
    write_file(&history_path, &history_csv(&outcome.history))?;
    println!("wrote {} and {}", a.out.display(), history_path.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if a.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    if a.group_by.is_some() && a.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    if let Some(c) = a.perturb.iter().flatten().find(|&&c| c == 0 || c % 2 == 1 || c >= 64) {
        return Err(usage(format!("magnification {c} must be even and in 2..64")));
    }
    for p in a.report_json.iter().chain(&a.report_csv) {
        check_writable(p)?;
    }
    let model = GazeModel::load(&a.checkpoint)?;
    let decoder = match a.decoder {
        None => model.head.default_decoder(),
        Some(DecoderArg::Wsc) => Decoder::Wsc,
        Some(DecoderArg::Sc) => Decoder::Sc,
        Some(DecoderArg::Raw) => Decoder::Raw,
    };
    gazekit::eval::check_decoder(model.head, decoder)?;
    if a.compare_decoders && model.head != HeadMode::Encoded {
        return Err(usage("--compare-decoders needs an encoded-head checkpoint"));
    }
    let data = load_manifest(&a.manifest)?;
    if let Some(key) = &a.group_by {
        if let Some(i) = data.iter().position(|s| !s.meta.contains_key(key)) {
            return Err(GazeError::MissingMeta { index: i, key: key.clone() }.into());
        }
    }

    let report = evaluate(&model, &data, decoder, a.threads)?;
    println!(
        "n={} decoder={} all360={:.3} front180={:.3} back={:.3} front40={:.3} (deg)",
        report.n,
        report.decoder,
        report.overall.to_degrees(),
        report.front180.mean.to_degrees(),
        report.back.mean.to_degrees(),
        report.front40.mean.to_degrees()
    );
    let mut doc = json!({ "report": report });
    let mut extra_csv: Vec<(&str, String)> = Vec::new();

    if a.compare_decoders {
        let table = compare_decoders(&model, &data, a.threads)?;
        for r in &table {
            println!("decoder={} front40={:.3} all360={:.3} (deg)", r.decoder, r.front40.mean.to_degrees(), r.overall.to_degrees());
        }
        extra_csv.push((".decoders.csv", decoder_table_csv(&table)));
        doc["decoders"] = json!(table);
    }
    if let Some(key) = &a.group_by {
        let bins = group_by_meta(&model, &data, decoder, key, a.bins, a.threads)?;
        for b in &bins {
            println!("{key} [{:.4}, {:.4}] n={} mean={:.3} deg", b.lo, b.hi, b.count, b.mean.to_degrees());
        }
        extra_csv.push((".grouped.csv", meta_bins_csv(key, &bins)));
        doc["grouped"] = json!({ "key": key, "bins": bins });
    }
    if let Some(cs) = &a.perturb {
        let pr = scale_robustness(&model, &data, cs, a.threads)?;
        for r in &pr.rows {
            println!("c={} mean={:.3} deg increase={:+.2}%", r.c, r.mean_error.to_degrees(), r.pct_increase);
        }
        extra_csv.push((".perturb.csv", pr.to_csv()));
        doc["perturbation"] = json!(pr);
    }

    if let Some(p) = &a.report_json {
        write_file(p, &(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"))?;
    }
    if let Some(p) = &a.report_csv {
        write_file(p, &report.to_csv())?;
        for (suffix, text) in &extra_csv {
            write_file(&with_suffix(p, suffix), text)?;
        }
    }
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> CmdResult {
    let raw = [a.s_theta, a.c_theta, a.s_phi];
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(usage("inputs must be finite"));
    }
    if raw.iter().any(|v| v.abs() > 1.0) {
        eprintln!("warning: inputs outside [-1, 1] were clamped");
    }
    let g = EncodedGaze::new(a.s_theta, a.c_theta, a.s_phi);
    let (wsc, est) = decode_yaw_wsc(&g);
    println!("theta_s   {:.6}", decode_theta_s(&g));
    println!("theta_c   {:.6}", decode_theta_c(&g));
    println!("theta_sc  {:.6}", decode_yaw_sc(&g));
    println!("theta_wsc {wsc:.6}");
    println!("w         {:.6}", est.weight_w);
    println!("pitch     {:.6}", decode_pitch(&g));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Decode(a) => cmd_decode(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
