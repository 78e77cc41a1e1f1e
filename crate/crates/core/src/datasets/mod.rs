//! Image corpora, preprocessing, augmentation and (sensor, target) training pairs.

mod augment;
mod ingest;
mod synth;

pub use augment::{augment_rot90, augment_tile_crop, rot90, tile_crop_at};
pub use ingest::{box_downsample, center_square};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::container;
use crate::encoders::{apply_phase, synthesize_phase_map, EncodingOperator, SensorLayout, SensorVec};
use crate::error::{Error, Result};
use crate::numerics::{Image, MIN_SIDE};
use crate::rng::{self, Rng};

const CORPUS_MAGIC: &[u8; 4] = b"AMCO";
const DATASET_MAGIC: &[u8; 4] = b"AMDS";

/// Preprocessed images of a common side: each mean-subtracted, all divided by
/// the dataset-wide max-abs so the largest magnitude is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub n: usize,
    pub images: Vec<Image>,
    /// Stable per-image identifiers, used to prove train/test disjointness.
    pub ids: Vec<String>,
    pub provenance: String,
    pub normalization_scale: f64,
}

/// Mean-subtract every image, then scale the set so the global max-abs is 1.
pub fn preprocess(n: usize, raw: Vec<Vec<f64>>, ids: Vec<String>, provenance: String) -> Result<Corpus> {
    if raw.is_empty() {
        return Err(Error::config("a corpus needs at least one image"));
    }
    let centered: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|px| {
            let mean = px.iter().sum::<f64>() / px.len() as f64;
            let peak = px.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let out: Vec<f64> = px.into_iter().map(|v| v - mean).collect();
            // a flat image leaves only rounding residue after centering
            if out.iter().all(|v| v.abs() <= 1e-12 * peak) {
                vec![0.0; out.len()]
            } else {
                out
            }
        })
        .collect();
    let scale = centered.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let images = centered
        .into_iter()
        .map(|px| {
            let px = if scale > 0.0 { px.into_iter().map(|v| v / scale).collect() } else { px };
            Image::new(n, px)
        })
        .collect::<Result<_>>()?;
    Ok(Corpus { n, images, ids, provenance, normalization_scale: scale })
}

pub fn synth_corpus(count: usize, n: usize, seed: u64) -> Result<Corpus> {
    check_side(n)?;
    let ids = (0..count).map(|i| format!("synth:{seed}:{i}")).collect();
    preprocess(n, synth::scenes(count, n, seed), ids, format!("synth(seed={seed})"))
}

/// I.i.d. standard-normal pixel fields, preprocessed like any other corpus.
pub fn noise_corpus(count: usize, n: usize, seed: u64) -> Result<Corpus> {
    check_side(n)?;
    let ids = (0..count).map(|i| format!("noise:{seed}:{i}")).collect();
    preprocess(n, synth::noise_fields(count, n, seed), ids, format!("noise(seed={seed})"))
}

/// Read every `.pgm` in `dir` (sorted by name), center-crop, box-filter to `n x n`.
pub fn load_corpus(dir: &Path, n: usize) -> Result<Corpus> {
    check_side(n)?;
    let (ids, raw): (Vec<String>, Vec<Vec<f64>>) =
        ingest::read_all(dir, n)?.into_iter().map(|(name, px)| (format!("pgm:{name}"), px)).unzip();
    preprocess(n, raw, ids, format!("pgm({})", dir.display()))
}

fn check_side(n: usize) -> Result<()> {
    if n < MIN_SIDE {
        return Err(Error::config(format!("image side {n} is below {MIN_SIDE}")));
    }
    Ok(())
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Restrict to the first `count` images (no renormalization).
    pub fn truncated(&self, count: usize) -> Corpus {
        let count = count.min(self.len());
        Corpus {
            images: self.images[..count].to_vec(),
            ids: self.ids[..count].to_vec(),
            ..self.clone()
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = json!({
            "count": self.len(),
            "n": self.n,
            "ids": self.ids,
            "provenance": self.provenance,
            "normalization_scale": self.normalization_scale,
        });
        let parts: Vec<&[f64]> = self.images.iter().map(|i| i.pixels()).collect();
        container::write(path, CORPUS_MAGIC, &meta, &parts)
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        let (meta, payload) = container::read(path, CORPUS_MAGIC)?;
        let count = meta_usize(&meta, "count")?;
        let n = meta_usize(&meta, "n")?;
        if payload.len() != count * n * n {
            return Err(Error::Format("corpus payload length does not match its header".into()));
        }
        let ids: Vec<String> = serde_json::from_value(meta["ids"].clone())?;
        let images = payload.chunks_exact(n * n).map(|c| Image::new(n, c.to_vec())).collect::<Result<_>>()?;
        Ok(Corpus {
            n,
            images,
            ids,
            provenance: meta["provenance"].as_str().unwrap_or_default().to_string(),
            normalization_scale: meta["normalization_scale"].as_f64().unwrap_or(1.0),
        })
    }
}

fn meta_usize(meta: &Value, key: &str) -> Result<usize> {
    meta.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::Format(format!("missing '{key}' in file header")))
}

/// Which channel of the (possibly complex) ground-truth image the network learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Magnitude,
    Real,
    Imag,
    Phase,
}

impl TargetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::Magnitude => "magnitude",
            TargetMode::Real => "real",
            TargetMode::Imag => "imag",
            TargetMode::Phase => "phase",
        }
    }

    pub fn extract(self, re: &[f64], im: &[f64]) -> Vec<f64> {
        re.iter()
            .zip(im)
            .map(|(&a, &b)| match self {
                TargetMode::Magnitude => a.hypot(b),
                TargetMode::Real => a,
                TargetMode::Imag => b,
                TargetMode::Phase => b.atan2(a),
            })
            .collect()
    }
}

impl fmt::Display for TargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(TargetMode::Magnitude),
            "real" => Ok(TargetMode::Real),
            "imag" => Ok(TargetMode::Imag),
            "phase" => Ok(TargetMode::Phase),
            other => Err(Error::config(format!("unknown target mode '{other}'"))),
        }
    }
}

/// One encoded example before input scaling.
#[derive(Debug, Clone)]
pub struct Example {
    pub sensor: SensorVec,
    pub target: Vec<f64>,
    pub truth_re: Image,
    pub truth_im: Image,
}

/// Seed of the phase map applied to image `index` of a phase-modulated set.
pub fn phase_map_seed(phase_seed: u64, index: usize) -> u64 {
    rng::derive_seed(phase_seed, rng::STREAM_PHASE, index as u64)
}

/// Optionally phase-modulate `img`, encode it, and extract the target channel.
pub fn make_example(
    img: &Image,
    encoding: &EncodingOperator,
    mode: TargetMode,
    phase_seed: Option<u64>,
    index: usize,
    rng: Option<&mut Rng>,
) -> Result<Example> {
    let (truth_re, truth_im) = match phase_seed {
        Some(s) => apply_phase(img, &synthesize_phase_map(img.n(), phase_map_seed(s, index)))?,
        None => (img.clone(), Image::zeros(img.n())),
    };
    let sensor = encoding.encode(&truth_re, &truth_im, rng)?;
    let target = mode.extract(truth_re.pixels(), truth_im.pixels());
    Ok(Example { sensor, target, truth_re, truth_im })
}

/// Network training pairs. Inputs are stored flat and already divided by `sensor_scale`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub n: usize,
    pub layout: SensorLayout,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub sensor_scale: f64,
    pub encoding: EncodingOperator,
    pub target_mode: TargetMode,
    pub phase_seed: Option<u64>,
    pub image_ids: Vec<String>,
}

pub fn check_target_mode(encoding: &EncodingOperator, mode: TargetMode, phase_seed: Option<u64>) -> Result<()> {
    if mode != TargetMode::Magnitude && phase_seed.is_none() {
        return Err(Error::config(format!(
            "target '{mode}' needs phase-modulated data; a real corpus only has magnitude targets"
        )));
    }
    if phase_seed.is_some() && !encoding.kind().is_complex() {
        return Err(Error::config(format!("{} encoding is real-valued; phase modulation is unsupported", encoding.kind())));
    }
    Ok(())
}

/// Encode every corpus image and scale all inputs by their global max-abs.
///
/// Misaligned encodings draw their line shifts from per-image streams derived
/// from one value taken from `rng`, so results do not depend on encode order.
pub fn build_dataset(
    corpus: &Corpus,
    encoding: &EncodingOperator,
    target_mode: TargetMode,
    phase_seed: Option<u64>,
    rng: &mut Rng,
) -> Result<Dataset> {
    if corpus.n != encoding.n() {
        return Err(Error::dim(format!("corpus side {} vs encoding side {}", corpus.n, encoding.n())));
    }
    check_target_mode(encoding, target_mode, phase_seed)?;
    let shift_base: u64 = rng.random();
    let layout = encoding.layout();
    let d_in = layout.len();
    let n2 = corpus.n * corpus.n;
    let mut inputs = Vec::with_capacity(corpus.len() * d_in);
    let mut targets = Vec::with_capacity(corpus.len() * n2);
    for (i, img) in corpus.images.iter().enumerate() {
        let mut shifts = rng::indexed_stream(shift_base, rng::STREAM_MISALIGN, i as u64);
        let ex = make_example(img, encoding, target_mode, phase_seed, i, Some(&mut shifts))?;
        inputs.extend_from_slice(&ex.sensor.values);
        targets.extend_from_slice(&ex.target);
    }
    let scale = inputs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        inputs.iter_mut().for_each(|v| *v /= scale);
    }
    Ok(Dataset {
        n: corpus.n,
        layout,
        inputs,
        targets,
        sensor_scale: if scale > 0.0 { scale } else { 1.0 },
        encoding: encoding.clone(),
        target_mode,
        phase_seed,
        image_ids: corpus.ids.clone(),
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }

    pub fn d_in(&self) -> usize {
        self.layout.len()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let d = self.d_in();
        &self.inputs[i * d..(i + 1) * d]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let n2 = self.n * self.n;
        &self.targets[i * n2..(i + 1) * n2]
    }

    pub fn sensor_vec(&self, i: usize) -> SensorVec {
        SensorVec { values: self.input(i).to_vec(), layout: self.layout.clone() }
    }

    fn meta(&self) -> Value {
        json!({
            "count": self.len(),
            "n": self.n,
            "d_in": self.d_in(),
            "layout": self.layout,
            "encoding": self.encoding.to_json_value(),
            "sensor_scale": self.sensor_scale,
            "target_mode": self.target_mode,
            "phase_seed": self.phase_seed,
            "image_ids": self.image_ids,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container::encode(DATASET_MAGIC, &self.meta(), &[&self.inputs, &self.targets])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        let (meta, payload) = container::decode(DATASET_MAGIC, bytes)?;
        let count = meta_usize(&meta, "count")?;
        let n = meta_usize(&meta, "n")?;
        let d_in = meta_usize(&meta, "d_in")?;
        if payload.len() != count * (d_in + n * n) {
            return Err(Error::Format("dataset payload length does not match its header".into()));
        }
        let layout: SensorLayout = serde_json::from_value(meta["layout"].clone())?;
        if layout.len() != d_in {
            return Err(Error::Format("dataset layout disagrees with d_in".into()));
        }
        let (inputs, targets) = payload.split_at(count * d_in);
        Ok(Dataset {
            n,
            layout,
            inputs: inputs.to_vec(),
            targets: targets.to_vec(),
            sensor_scale: meta["sensor_scale"].as_f64().ok_or_else(|| Error::Format("sensor_scale".into()))?,
            encoding: EncodingOperator::from_json_value(&meta["encoding"])?,
            target_mode: serde_json::from_value(meta["target_mode"].clone())?,
            phase_seed: serde_json::from_value(meta["phase_seed"].clone())?,
            image_ids: serde_json::from_value(meta["image_ids"].clone())?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        Dataset::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests;
