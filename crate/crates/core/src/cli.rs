//! The `automap` command line: data generation, training, evaluation,
//! weight analysis and classical baselines.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 numeric abort, 5 artifact mismatch.
//! Every command that gets as far as knowing its output location writes a
//! JSON run manifest there, on failure as well as on success.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis;
use crate::baselines::{self, Method, ART_SWEEPS};
use crate::container;
use crate::datasets::{augment_rot90, build_dataset, load_corpus, noise_corpus, synth_corpus, Corpus, TargetMode};
use crate::encoders::{make_encoding, EncodingKind, EncodingSpec};
use crate::error::{Error, Result};
use crate::evaluation::{self, add_awgn_snr, EvalOptions, Snr};
use crate::network::Checkpoint;
use crate::rng;
use crate::training::{self, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "automap", version, about = "Learned sensor-to-image reconstruction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an image corpus file.
    GenData(GenDataArgs),
    /// Train a network on an encoded corpus.
    Train(TrainArgs),
    /// Evaluate a checkpoint and its paired baseline on held-out images.
    Evaluate(EvaluateArgs),
    /// Activation statistics, weight export and kernel tiles of a checkpoint.
    Analyze(AnalyzeArgs),
    /// Run a conventional reconstruction over a corpus.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusKind {
    /// Procedural scenes of ellipses, rectangles and ramps.
    Synth,
    /// Every .pgm file under --dir.
    Pgm,
    /// I.i.d. Gaussian pixel fields.
    Noise,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: CorpusKind,
    /// Number of images (synth, noise); for pgm, keep at most this many.
    #[arg(long)]
    pub count: Option<usize>,
    /// Image side.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Source directory for --kind pgm.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Add the three 90-degree rotations of every image.
    #[arg(long)]
    pub rotate: bool,
    /// Output corpus file.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Cartesian,
    Poisson,
    Spiral,
    Radon,
    Misaligned,
}

impl From<EncodingArg> for EncodingKind {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Cartesian => EncodingKind::Cartesian,
            EncodingArg::Poisson => EncodingKind::PoissonDisc,
            EncodingArg::Spiral => EncodingKind::Spiral,
            EncodingArg::Radon => EncodingKind::Radon,
            EncodingArg::Misaligned => EncodingKind::Misaligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Magnitude,
    Real,
    Imag,
    Phase,
}

impl From<TargetArg> for TargetMode {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Magnitude => TargetMode::Magnitude,
            TargetArg::Real => TargetMode::Real,
            TargetArg::Imag => TargetMode::Imag,
            TargetArg::Phase => TargetMode::Phase,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub encoding: EncodingArg,
    /// Expected image side; must match the corpus.
    #[arg(long)]
    pub n: Option<usize>,
    /// Modulate images with synthetic phase maps derived from this seed.
    #[arg(long)]
    pub phase_seed: Option<u64>,
    #[arg(long, value_enum, default_value = "magnitude")]
    pub target: TargetArg,
    /// TrainConfig JSON; flags below take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for initialization, shuffling and corruption.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the encoding's random geometry; defaults to the master seed.
    #[arg(long)]
    pub encoding_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Worker threads; results are identical for any value.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out_ckpt: PathBuf,
    /// History CSV path; defaults to `<out-ckpt>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Manifest path; defaults to `<out-ckpt>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Held-out corpus file.
    #[arg(long)]
    pub test_corpus: PathBuf,
    /// Sensor SNR in dB, or `clean`; defaults to the encoding's evaluation level.
    #[arg(long)]
    pub snr_db: Option<String>,
    /// `auto` pairs the encoding with its conventional method; `none` skips it.
    #[arg(long, default_value = "auto")]
    pub baseline: String,
    /// Seed for sensor noise and misalignment of the test encodings.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Phase seed for modulating the test images (phase-trained models).
    #[arg(long)]
    pub phase_seed: Option<u64>,
    #[arg(long, default_value_t = ART_SWEEPS)]
    pub sweeps: usize,
    /// Name of the image subdirectory.
    #[arg(long, default_value = "eval")]
    pub experiment: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Corpus of images to encode and feed through the network.
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long, default_value_t = analysis::DEFAULT_TAU)]
    pub tau: f64,
    /// Seed for misaligned encodings of the inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// art, ifft, zerofill or gridding.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub encoding: EncodingArg,
    #[arg(long, default_value_t = 0)]
    pub encoding_seed: u64,
    /// Sensor SNR in dB, or `clean`.
    #[arg(long, default_value = "clean")]
    pub snr_db: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ART_SWEEPS)]
    pub sweeps: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Config(_) | Error::Domain(_) | Error::Construction(_) => EXIT_USAGE,
        Error::Io(_) | Error::Ingestion { .. } | Error::Format(_) | Error::Json(_) => EXIT_IO,
        Error::Numeric(_) | Error::NonFiniteLoss { .. } | Error::DegenerateSignal(_) => EXIT_NUMERIC,
        Error::Mismatch(_) | Error::Dimension(_) => EXIT_MISMATCH,
    }
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({ "message": e.to_string(), "exit_code": exit_code(e) });
    if let Error::NonFiniteLoss { epoch, batch } = e {
        v["epoch"] = json!(epoch);
        v["batch"] = json!(batch);
    }
    v
}

struct Manifest {
    path: PathBuf,
    argv: Vec<String>,
    output: PathBuf,
    seed: Option<u64>,
    config: Value,
    started: Instant,
}

impl Manifest {
    fn new(path: PathBuf, argv: &[String], output: &Path) -> Self {
        Manifest {
            path,
            argv: argv.to_vec(),
            output: output.to_path_buf(),
            seed: None,
            config: Value::Null,
            started: Instant::now(),
        }
    }

    fn finish(&self, outcome: &Result<Value>) -> Result<()> {
        let mut v = json!({
            "command_line": self.argv,
            "config": self.config,
            "seed": self.seed,
            "versions": {
                "automap": env!("CARGO_PKG_VERSION"),
                "file_format": container::VERSION,
            },
            "output_dir": self.output.display().to_string(),
            "duration_s": self.started.elapsed().as_secs_f64(),
        });
        match outcome {
            Ok(extra) => {
                v["status"] = json!("ok");
                v["result"] = extra.clone();
            }
            Err(e) => {
                v["status"] = json!("error");
                v["error"] = error_json(e);
            }
        }
        let text = serde_json::to_string_pretty(&v)? + "\n";
        container::write_atomic(&self.path, text.as_bytes())
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf()
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(&a, &argv),
        Command::Train(a) => train(&a, &argv),
        Command::Evaluate(a) => evaluate(&a, &argv),
        Command::Analyze(a) => analyze(&a, &argv),
        Command::Baseline(a) => baseline(&a, &argv),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn with_manifest(mut m: Manifest, body: impl FnOnce(&mut Manifest) -> Result<Value>) -> Result<()> {
    let outcome = body(&mut m);
    let written = m.finish(&outcome);
    outcome?;
    written
}

fn gen_data(a: &GenDataArgs, argv: &[String]) -> Result<()> {
    let manifest = Manifest::new(a.manifest.clone().unwrap_or_else(|| sibling(&a.out, ".manifest.json")), argv, &parent_dir(&a.out));
    with_manifest(manifest, |m| {
        m.seed = Some(a.seed);
        m.config = json!({ "kind": format!("{:?}", a.kind).to_lowercase(), "count": a.count, "n": a.n, "rotate": a.rotate });
        if a.count == Some(0) {
            return Err(Error::Usage("--count must be at least 1".into()));
        }
        let mut corpus = match a.kind {
            CorpusKind::Synth | CorpusKind::Noise => {
                let count = a.count.ok_or_else(|| Error::Usage("--count is required for generated corpora".into()))?;
                if a.kind == CorpusKind::Synth {
                    synth_corpus(count, a.n, a.seed)?
                } else {
                    noise_corpus(count, a.n, a.seed)?
                }
            }
            CorpusKind::Pgm => {
                let dir = a.dir.as_ref().ok_or_else(|| Error::Usage("--dir is required for --kind pgm".into()))?;
                let c = load_corpus(dir, a.n)?;
                match a.count {
                    Some(k) => c.truncated(k),
                    None => c,
                }
            }
        };
        if a.rotate {
            corpus = augment_rot90(&corpus);
        }
        corpus.save(&a.out)?;
        Ok(json!({ "images": corpus.len(), "normalization_scale": corpus.normalization_scale }))
    })
}

fn load_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: &TrainArgs, argv: &[String]) -> Result<()> {
    let manifest =
        Manifest::new(a.manifest.clone().unwrap_or_else(|| sibling(&a.out_ckpt, ".manifest.json")), argv, &parent_dir(&a.out_ckpt));
    with_manifest(manifest, |m| {
        let cfg = load_train_config(a)?;
        m.seed = Some(cfg.seed);
        m.config = serde_json::to_value(&cfg)?;
        let kind: EncodingKind = a.encoding.into();
        if a.phase_seed.is_some() && !kind.is_complex() {
            return Err(Error::Usage(format!("{kind} data is real-valued; --phase-seed is not supported")));
        }
        let corpus = Corpus::load(&a.corpus)?;
        if let Some(n) = a.n.filter(|&n| n != corpus.n) {
            return Err(Error::Mismatch(format!("--n {n} but the corpus holds {}x{} images", corpus.n, corpus.n)));
        }
        let enc_seed = a.encoding_seed.unwrap_or(cfg.seed);
        let enc = make_encoding(&EncodingSpec::default_for(kind, corpus.n), corpus.n, enc_seed)?;
        let mut build_rng = rng::stream(cfg.seed, rng::STREAM_MISALIGN);
        let ds = build_dataset(&corpus, &enc, a.target.into(), a.phase_seed, &mut build_rng)?;
        m.config["encoding"] = enc.to_json_value();
        m.config["target_mode"] = json!(ds.target_mode);
        m.config["phase_seed"] = json!(a.phase_seed);
        let outcome = training::train_checkpointed(&ds, &cfg, &a.out_ckpt)?;
        let history = a.history.clone().unwrap_or_else(|| sibling(&a.out_ckpt, ".history.csv"));
        container::write_atomic(&history, training::history_csv(&outcome.history).as_bytes())?;
        Ok(json!({
            "checkpoint": a.out_ckpt.display().to_string(),
            "history": history.display().to_string(),
            "final_loss": outcome.history.last(),
        }))
    })
}

fn parse_baseline(s: &str) -> Result<Option<Method>> {
    match s {
        "auto" => Ok(None),
        "none" => Ok(Some(Method::Automap)),
        other => other.parse().map(Some),
    }
}

fn evaluate(a: &EvaluateArgs, argv: &[String]) -> Result<()> {
    let manifest = Manifest::new(a.out_dir.join("manifest.json"), argv, &a.out_dir);
    with_manifest(manifest, |m| {
        m.seed = Some(a.seed);
        let baseline = parse_baseline(&a.baseline)?;
        let explicit_snr = a.snr_db.as_deref().map(str::parse::<Snr>).transpose()?;
        let ckpt = Checkpoint::load(&a.ckpt)?;
        let test = Corpus::load(&a.test_corpus)?;
        let kind = ckpt.encoding()?.kind();
        let snr = explicit_snr.unwrap_or_else(|| Snr::default_for(kind));
        let opts = EvalOptions {
            experiment: a.experiment.clone(),
            snr,
            baseline,
            noise_seed: a.seed,
            test_phase_seed: a.phase_seed,
            art_sweeps: a.sweeps,
            image_dir: Some(a.out_dir.clone()),
        };
        m.config = json!({ "snr_db": snr, "baseline": a.baseline, "sweeps": a.sweeps, "experiment": a.experiment });
        let (mut report, _) = evaluation::evaluate(&ckpt, &test, &opts)?;
        report.config = m.config.clone();
        report.write(&a.out_dir.join("report.json"), &a.out_dir.join("report.csv"))?;
        Ok(json!({ "methods": report.methods }))
    })
}

fn analyze(a: &AnalyzeArgs, argv: &[String]) -> Result<()> {
    let manifest = Manifest::new(a.out_dir.join("manifest.json"), argv, &a.out_dir);
    with_manifest(manifest, |m| {
        m.seed = Some(a.seed);
        m.config = json!({ "tau": a.tau });
        let ckpt = Checkpoint::load(&a.ckpt)?;
        let corpus = Corpus::load(&a.inputs)?;
        let enc = ckpt.encoding()?;
        if corpus.n != ckpt.params.n {
            return Err(Error::Mismatch(format!("model side {} vs input images of side {}", ckpt.params.n, corpus.n)));
        }
        let mut inputs = Vec::with_capacity(corpus.len());
        for (i, img) in corpus.images.iter().enumerate() {
            let ex = crate::datasets::make_example(
                img,
                &enc,
                ckpt.meta.target_mode,
                ckpt.meta.phase_seed,
                i,
                Some(&mut rng::indexed_stream(a.seed, rng::STREAM_MISALIGN, i as u64)),
            )?;
            let mut sv = ex.sensor;
            sv.values.iter_mut().for_each(|v| *v /= ckpt.meta.sensor_scale);
            inputs.push(sv);
        }
        let stats = analysis::capture_stats(&ckpt.params, &inputs, a.tau, &corpus.provenance)?;
        let text = serde_json::to_string_pretty(&stats)? + "\n";
        container::write_atomic(&a.out_dir.join("activation_stats.json"), text.as_bytes())?;
        analysis::export_fc_weights(&ckpt.params, &a.out_dir.join("fc_weights.csv"))?;
        analysis::kernel_gallery(&ckpt.params, &a.out_dir.join("kernels"))?;
        Ok(json!({ "sparsity_fraction": stats.sparsity_fraction, "l1_mean": stats.l1_mean }))
    })
}

fn baseline(a: &BaselineArgs, argv: &[String]) -> Result<()> {
    let manifest = Manifest::new(a.out_dir.join("manifest.json"), argv, &a.out_dir);
    with_manifest(manifest, |m| {
        m.seed = Some(a.seed);
        m.config = json!({ "method": a.method, "snr_db": a.snr_db, "sweeps": a.sweeps, "encoding_seed": a.encoding_seed });
        let method: Method = a.method.parse()?;
        if method == Method::Automap {
            return Err(Error::Usage("automap is not a baseline method".into()));
        }
        let snr: Snr = a.snr_db.parse()?;
        let corpus = Corpus::load(&a.corpus)?;
        let enc = make_encoding(&EncodingSpec::default_for(a.encoding.into(), corpus.n), corpus.n, a.encoding_seed)?;
        let mut results = Vec::with_capacity(corpus.len());
        for (i, img) in corpus.images.iter().enumerate() {
            let mut shifts = rng::indexed_stream(a.seed, rng::STREAM_MISALIGN, i as u64);
            let sv = enc.encode(img, &crate::numerics::Image::zeros(corpus.n), Some(&mut shifts))?;
            let noisy = add_awgn_snr(&sv, snr, &mut rng::indexed_stream(a.seed, rng::STREAM_NOISE, i as u64))?;
            let rec = baselines::reconstruct(method, &noisy, &enc, a.sweeps)?;
            let truth = img.map(f64::abs);
            let image = if method == Method::Art { rec.image.map(f64::abs) } else { rec.image.clone() };
            let met = evaluation::compute_metrics(&image, &truth, method, snr)?;
            let rel = format!("{}.{}.pgm", evaluation::file_stem(&corpus.ids[i]), method);
            baselines::write_image(&rec.image, &a.out_dir.join(&rel))?;
            results.push(json!({
                "image_id": corpus.ids[i],
                "image": rel,
                "iterations": rec.iterations,
                "residual_history": rec.residual_history,
                "rmse_vs_magnitude": met.rmse,
            }));
        }
        let out = json!({ "method": method, "encoding": enc.kind(), "snr_db": snr, "results": results });
        container::write_atomic(&a.out_dir.join("baseline.json"), (serde_json::to_string_pretty(&out)? + "\n").as_bytes())?;
        Ok(json!({ "images": corpus.len() }))
    })
}
