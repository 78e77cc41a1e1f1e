//! Calibrated sensor noise, image metrics and the train-then-evaluate harness.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::baselines::{self, Method, ART_SWEEPS};
use crate::container;
use crate::datasets::{build_dataset, make_example, synth_corpus, Corpus, TargetMode};
use crate::encoders::{make_encoding, EncodingKind, EncodingOperator, EncodingSpec, SensorVec};
use crate::error::{Error, Result};
use crate::network::{self, Checkpoint, Workspace};
use crate::numerics::Image;
use crate::rng::{self, Rng};
use crate::training::{self, TrainConfig};

/// Noise level: either no noise or a power signal-to-noise ratio in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Clean,
    Db(f64),
}

impl Snr {
    /// The evaluation noise level used for each encoding.
    pub fn default_for(kind: EncodingKind) -> Snr {
        match kind {
            EncodingKind::Radon => Snr::Db(40.0),
            EncodingKind::PoissonDisc => Snr::Db(30.0),
            EncodingKind::Spiral => Snr::Db(25.0),
            EncodingKind::Misaligned | EncodingKind::Cartesian => Snr::Clean,
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Clean => f.write_str("clean"),
            Snr::Db(db) => write!(f, "{db}"),
        }
    }
}

impl FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "clean" {
            return Ok(Snr::Clean);
        }
        match s.parse::<f64>() {
            Ok(db) if db.is_finite() => Ok(Snr::Db(db)),
            _ => Err(Error::Usage(format!("SNR must be a number of dB or 'clean', got '{s}'"))),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Clean => s.serialize_str("clean"),
            Snr::Db(db) => s.serialize_f64(*db),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "clean" => Ok(Snr::Clean),
            Value::Number(x) => Ok(Snr::Db(x.as_f64().unwrap_or(f64::NAN))),
            other => Err(serde::de::Error::custom(format!("bad SNR {other}"))),
        }
    }
}

/// Add white Gaussian noise with per-element std `sqrt(P / 10^(snr/10))`,
/// `P` the mean square over the whole flattened vector.
pub fn add_awgn_snr(sv: &SensorVec, snr: Snr, rng: &mut Rng) -> Result<SensorVec> {
    let db = match snr {
        Snr::Clean => return Ok(sv.clone()),
        Snr::Db(db) => db,
    };
    if !db.is_finite() {
        return Err(Error::Domain(format!("SNR {db} dB")));
    }
    let power = sv.values.iter().map(|v| v * v).sum::<f64>() / sv.len().max(1) as f64;
    if power == 0.0 {
        return Err(Error::DegenerateSignal("cannot set an SNR on an all-zero signal".into()));
    }
    let sigma = (power / 10f64.powf(db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let values = sv.values.iter().map(|v| v + normal.sample(rng)).collect();
    SensorVec::new(values, sv.layout.clone())
}

/// Encodes infinities and NaN as the strings "inf", "-inf", "nan".
pub(crate) mod real {
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(x) => Ok(x.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("bad number {s}"))),
            },
            other => Err(serde::de::Error::custom(format!("bad number {other}"))),
        }
    }

    pub fn text(v: f64) -> String {
        if v.is_finite() {
            format!("{v}")
        } else if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    /// Peak 1.0; `"inf"` for a perfect reconstruction.
    #[serde(with = "real")]
    pub psnr_db: f64,
    pub method: Method,
    pub snr_db: Snr,
}

pub fn compute_metrics(recon: &Image, truth: &Image, method: Method, snr: Snr) -> Result<Metrics> {
    if recon.n() != truth.n() {
        return Err(Error::dim(format!("recon side {} vs truth side {}", recon.n(), truth.n())));
    }
    let sq: f64 = recon.pixels().iter().zip(truth.pixels()).map(|(a, b)| (a - b) * (a - b)).sum();
    let rmse = (sq / recon.pixels().len() as f64).sqrt();
    let psnr_db = if rmse == 0.0 { f64::INFINITY } else { 20.0 * (1.0 / rmse).log10() };
    Ok(Metrics { rmse, psnr_db, method, snr_db: snr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub image_id: String,
    pub method: Method,
    pub rmse: f64,
    #[serde(with = "real")]
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub count: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    #[serde(with = "real")]
    pub psnr_db_mean: f64,
    #[serde(with = "real")]
    pub psnr_db_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub train_corpus: Option<u64>,
    pub test_corpus: Option<u64>,
    pub encoding: u64,
    pub train: u64,
    pub noise: u64,
    pub phase: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub encoding: EncodingKind,
    pub n: usize,
    pub noise: Snr,
    pub target_mode: TargetMode,
    pub methods: Vec<MethodSummary>,
    pub per_image: Vec<ImageMetrics>,
    /// Written image files, relative to the output directory.
    pub images: Vec<String>,
    pub seeds: Seeds,
    pub config: Value,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// `image_id,method,rmse,psnr_db`, one row per image and method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,method,rmse,psnr_db\n");
        for m in &self.per_image {
            out.push_str(&format!("{},{},{},{}\n", m.image_id, m.method, real::text(m.rmse), real::text(m.psnr_db)));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        container::write_atomic(json_path, self.to_json().as_bytes())?;
        container::write_atomic(csv_path, self.to_csv().as_bytes())
    }
}

fn summarize(method: Method, rows: &[&ImageMetrics]) -> MethodSummary {
    let stats = |xs: Vec<f64>| {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        if !mean.is_finite() {
            return (mean, f64::NAN);
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
        (mean, var.sqrt())
    };
    let (rmse_mean, rmse_std) = stats(rows.iter().map(|m| m.rmse).collect());
    let (psnr_db_mean, psnr_db_std) = stats(rows.iter().map(|m| m.psnr_db).collect());
    MethodSummary { method, count: rows.len(), rmse_mean, rmse_std, psnr_db_mean, psnr_db_std }
}

/// File-name-safe form of an image id.
pub fn file_stem(image_id: &str) -> String {
    image_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub experiment: String,
    pub snr: Snr,
    /// `None` pairs the encoding with its conventional baseline.
    pub baseline: Option<Method>,
    pub noise_seed: u64,
    /// Phase seed for modulating the test images; unused for magnitude-only models.
    pub test_phase_seed: Option<u64>,
    pub art_sweeps: usize,
    /// Where `{experiment}/{image_id}.{method}.pgm` images go; `None` writes nothing.
    pub image_dir: Option<PathBuf>,
}

/// One reconstruction per test image and method, in the model's target channel.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image_id: String,
    pub truth: Image,
    pub outputs: Vec<(Method, Image)>,
}

/// Evaluate a trained model and its conventional baseline on held-out images.
pub fn evaluate(ckpt: &Checkpoint, test: &Corpus, opts: &EvalOptions) -> Result<(ExperimentReport, Vec<Reconstruction>)> {
    let enc = ckpt.encoding()?;
    let p = &ckpt.params;
    if test.n != p.n || enc.n() != p.n {
        return Err(Error::Mismatch(format!("model side {} vs test images of side {}", p.n, test.n)));
    }
    if enc.input_len() != p.d_in {
        return Err(Error::Mismatch(format!("model input {} vs encoding input {}", p.d_in, enc.input_len())));
    }
    let mode = ckpt.meta.target_mode;
    let phase_seed = match (ckpt.meta.phase_seed, opts.test_phase_seed) {
        (None, _) => None,
        (Some(train), test) => Some(test.unwrap_or(train)),
    };
    let baseline = match (opts.baseline, mode) {
        (Some(Method::Automap), _) => None,
        (Some(m), _) => Some(m),
        (None, TargetMode::Magnitude) => Some(Method::baseline_for(enc.kind())),
        (None, _) => None,
    };
    let mut per_image = Vec::new();
    let mut images = Vec::new();
    let mut recons = Vec::with_capacity(test.len());
    let mut ws = Workspace::new(p.n);
    for (i, img) in test.images.iter().enumerate() {
        let mut shifts = rng::indexed_stream(opts.noise_seed, rng::STREAM_MISALIGN, i as u64);
        let ex = make_example(img, &enc, mode, phase_seed, i, Some(&mut shifts))?;
        let mut noise = rng::indexed_stream(opts.noise_seed, rng::STREAM_NOISE, i as u64);
        let noisy = add_awgn_snr(&ex.sensor, opts.snr, &mut noise)?;
        let truth = Image::new(p.n, ex.target.clone())?;

        let input: Vec<f64> = noisy.values.iter().map(|v| v / ckpt.meta.sensor_scale).collect();
        network::forward_into(p, &input, &mut ws)?;
        let mut outputs = vec![(Method::Automap, Image::new(p.n, ws.output().to_vec())?)];
        if let Some(m) = baseline {
            let rec = baselines::reconstruct(m, &noisy, &enc, opts.art_sweeps)?;
            // ART estimates the signed image; compare it in the target channel.
            let image = if mode == TargetMode::Magnitude { rec.image.map(f64::abs) } else { rec.image };
            outputs.push((m, image));
        }
        let id = &test.ids[i];
        for (m, out) in &outputs {
            let met = compute_metrics(out, &truth, *m, opts.snr)?;
            per_image.push(ImageMetrics { image_id: id.clone(), method: *m, rmse: met.rmse, psnr_db: met.psnr_db });
            if let Some(dir) = &opts.image_dir {
                let rel = format!("{}/{}.{}.pgm", opts.experiment, file_stem(id), m);
                baselines::write_image(out, &dir.join(&rel))?;
                images.push(rel);
            }
        }
        recons.push(Reconstruction { image_id: id.clone(), truth, outputs });
    }
    let mut methods = vec![Method::Automap];
    methods.extend(baseline);
    let summaries = methods
        .iter()
        .map(|&m| summarize(m, &per_image.iter().filter(|r| r.method == m).collect::<Vec<_>>()))
        .collect();
    let report = ExperimentReport {
        experiment: opts.experiment.clone(),
        encoding: enc.kind(),
        n: p.n,
        noise: opts.snr,
        target_mode: mode,
        methods: summaries,
        per_image,
        images,
        seeds: Seeds {
            train_corpus: None,
            test_corpus: None,
            encoding: enc.seed(),
            train: ckpt.meta.train_seed,
            noise: opts.noise_seed,
            phase: phase_seed,
        },
        config: Value::Null,
    };
    Ok((report, recons))
}

/// The full protocol for one encoding: train on one synthetic corpus,
/// evaluate against the paired baseline on a disjoint one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: EncodingKind,
    pub n: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub train_corpus_seed: u64,
    pub test_corpus_seed: u64,
    pub encoding_seed: u64,
    pub noise_seed: u64,
    pub phase_seed: Option<u64>,
    pub target_mode: TargetMode,
    /// Overrides the encoding's default noise level.
    pub snr: Option<Snr>,
    pub art_sweeps: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: EncodingKind::Cartesian,
            n: 16,
            train_count: 512,
            test_count: 32,
            train_corpus_seed: 1,
            test_corpus_seed: 2,
            encoding_seed: 3,
            noise_seed: 4,
            phase_seed: None,
            target_mode: TargetMode::Magnitude,
            snr: None,
            art_sweeps: ART_SWEEPS,
            train: TrainConfig::default(),
        }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub checkpoint: Checkpoint,
    pub history: Vec<f64>,
    pub report: ExperimentReport,
    pub reconstructions: Vec<Reconstruction>,
}

pub fn ensure_held_out(train: &Corpus, test: &Corpus) -> Result<()> {
    let seen: HashSet<&str> = train.ids.iter().map(String::as_str).collect();
    match test.ids.iter().find(|id| seen.contains(id.as_str())) {
        Some(id) => Err(Error::config(format!("test image {id} also appears in the training corpus"))),
        None => Ok(()),
    }
}

/// Run the protocol; with `out_dir`, writes `{experiment}/` model, history,
/// report and images beneath it.
pub fn run_experiment(name: &str, cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentRun> {
    if cfg.train_corpus_seed == cfg.test_corpus_seed {
        return Err(Error::config("train and test corpus seeds must differ"));
    }
    let enc: EncodingOperator = make_encoding(&EncodingSpec::default_for(cfg.kind, cfg.n), cfg.n, cfg.encoding_seed)?;
    let train_corpus = synth_corpus(cfg.train_count, cfg.n, cfg.train_corpus_seed)?;
    let test_corpus = synth_corpus(cfg.test_count, cfg.n, cfg.test_corpus_seed)?;
    ensure_held_out(&train_corpus, &test_corpus)?;
    let mut build_rng = rng::stream(cfg.train.seed, rng::STREAM_MISALIGN);
    let ds = build_dataset(&train_corpus, &enc, cfg.target_mode, cfg.phase_seed, &mut build_rng)?;
    let outcome = training::train(&ds, &cfg.train)?;
    let checkpoint = training::checkpoint_for(&ds, &cfg.train, outcome.params, cfg.train.epochs);
    let opts = EvalOptions {
        experiment: name.to_string(),
        snr: cfg.snr.unwrap_or_else(|| Snr::default_for(cfg.kind)),
        baseline: None,
        noise_seed: cfg.noise_seed,
        test_phase_seed: cfg.phase_seed.map(|s| rng::derive_seed(s, "test_phase", 0)),
        art_sweeps: cfg.art_sweeps,
        image_dir: out_dir.map(Path::to_path_buf),
    };
    let (mut report, reconstructions) = evaluate(&checkpoint, &test_corpus, &opts)?;
    report.seeds.train_corpus = Some(cfg.train_corpus_seed);
    report.seeds.test_corpus = Some(cfg.test_corpus_seed);
    report.config = serde_json::to_value(cfg)?;
    if let Some(dir) = out_dir {
        let exp = dir.join(name);
        checkpoint.save(&exp.join("model.ckpt"))?;
        container::write_atomic(&exp.join("history.csv"), training::history_csv(&outcome.history).as_bytes())?;
        report.write(&exp.join("report.json"), &exp.join("report.csv"))?;
    }
    Ok(ExperimentRun { checkpoint, history: outcome.history, report, reconstructions })
}
