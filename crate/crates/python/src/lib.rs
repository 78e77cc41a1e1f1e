use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use automap::analysis;
use automap::baselines::{self, Method};
use automap::datasets::{self, build_dataset, Corpus, TargetMode};
use automap::encoders::{make_encoding, EncodingKind, EncodingOperator, EncodingSpec, SensorVec};
use automap::evaluation::{self, add_awgn_snr, ExperimentConfig, Snr};
use automap::network::{self, Checkpoint};
use automap::numerics::{self, Image, KTrajectory, Sinogram};
use automap::rng;
use automap::training::{self, TrainConfig};
use automap::Error;

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Io(_) | Error::Ingestion { .. } => PyOSError::new_err(msg),
        Error::Numeric(_) | Error::NonFiniteLoss { .. } | Error::DegenerateSignal(_) => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for automap::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Square image from a flat row-major list.
fn image(values: Vec<f64>) -> PyResult<Image> {
    let n = (values.len() as f64).sqrt().round() as usize;
    if n * n != values.len() {
        return Err(PyValueError::new_err(format!("{} pixels is not a square image", values.len())));
    }
    Image::new(n, values).py()
}

fn image_pair(re: Vec<f64>, im: Option<Vec<f64>>) -> PyResult<(Image, Image)> {
    let re = image(re)?;
    let im = match im {
        Some(v) => image(v)?,
        None => Image::zeros(re.n()),
    };
    Ok((re, im))
}

#[pyfunction]
#[pyo3(signature = (re, im=None))]
fn dft2(re: Vec<f64>, im: Option<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (re, im) = image_pair(re, im)?;
    let g = numerics::dft2(&re, &im).py()?;
    Ok((g.re, g.im))
}

#[pyfunction]
fn idft2(re: Vec<f64>, im: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let n = image(re.clone())?.n();
    let g = numerics::ComplexGrid::new(n, re, im).py()?;
    let (a, b) = numerics::idft2(&g).py()?;
    Ok((a.into_pixels(), b.into_pixels()))
}

/// Samples at `(ku, kv)` frequencies, returned as separate real and imaginary lists.
#[pyfunction]
#[pyo3(signature = (points, re, im=None))]
fn nudft(points: Vec<(f64, f64)>, re: Vec<f64>, im: Option<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (re, im) = image_pair(re, im)?;
    let traj = KTrajectory::new(points).py()?;
    let s = numerics::nudft(&re, &im, &traj).py()?;
    Ok((s.iter().map(|z| z.re).collect(), s.iter().map(|z| z.im).collect()))
}

#[pyfunction]
fn radon_forward(img: Vec<f64>, n_angles: usize, n_rays: usize) -> PyResult<Vec<f64>> {
    Ok(numerics::radon_forward(&image(img)?, n_angles, n_rays).py()?.values)
}

#[pyfunction]
fn radon_adjoint(values: Vec<f64>, n_angles: usize, n_rays: usize, n: usize) -> PyResult<Vec<f64>> {
    let sino = Sinogram::new(n_angles, n_rays, values).py()?;
    Ok(numerics::radon_adjoint(&sino, n).py()?.into_pixels())
}

fn corpus_images(c: Corpus) -> Vec<Vec<f64>> {
    c.images.into_iter().map(Image::into_pixels).collect()
}

/// Preprocessed synthetic phantoms as flat lists.
#[pyfunction]
fn synth_corpus(count: usize, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(corpus_images(datasets::synth_corpus(count, n, seed).py()?))
}

#[pyfunction]
fn noise_corpus(count: usize, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(corpus_images(datasets::noise_corpus(count, n, seed).py()?))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().py()
}

#[pyclass(name = "Encoding", module = "automap", skip_from_py_object)]
#[derive(Clone)]
struct PyEncoding {
    inner: EncodingOperator,
}

impl PyEncoding {
    fn sensor(&self, values: Vec<f64>) -> PyResult<SensorVec> {
        SensorVec::new(values, self.inner.layout()).py()
    }
}

#[pymethods]
impl PyEncoding {
    /// Operator with the default geometry for `kind` at side `n`.
    #[new]
    #[pyo3(signature = (kind, n, seed=0))]
    fn new(kind: &str, n: usize, seed: u64) -> PyResult<Self> {
        let kind: EncodingKind = parse(kind)?;
        Ok(PyEncoding { inner: make_encoding(&EncodingSpec::default_for(kind, n), n, seed).py()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyEncoding { inner: EncodingOperator::from_json(text).py()? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn input_len(&self) -> usize {
        self.inner.input_len()
    }

    /// Flattened sensor data; misaligned encodings draw line shifts from `shift_seed`.
    #[pyo3(signature = (re, im=None, shift_seed=None))]
    fn encode(&self, re: Vec<f64>, im: Option<Vec<f64>>, shift_seed: Option<u64>) -> PyResult<Vec<f64>> {
        let (re, im) = image_pair(re, im)?;
        let mut shifts = shift_seed.map(|s| rng::stream(s, rng::STREAM_MISALIGN));
        Ok(self.inner.encode(&re, &im, shifts.as_mut()).py()?.values)
    }

    fn add_noise(&self, values: Vec<f64>, snr_db: f64, seed: u64) -> PyResult<Vec<f64>> {
        let sv = self.sensor(values)?;
        Ok(add_awgn_snr(&sv, Snr::Db(snr_db), &mut rng::stream(seed, rng::STREAM_NOISE)).py()?.values)
    }

    /// Conventional reconstruction; `method` defaults to the encoding's usual baseline.
    #[pyo3(signature = (values, method=None, sweeps=baselines::ART_SWEEPS))]
    fn baseline(&self, values: Vec<f64>, method: Option<&str>, sweeps: usize) -> PyResult<Vec<f64>> {
        let m = match method {
            Some(s) => parse::<Method>(s)?,
            None => Method::baseline_for(self.inner.kind()),
        };
        let sv = self.sensor(values)?;
        Ok(baselines::reconstruct(m, &sv, &self.inner, sweeps).py()?.image.into_pixels())
    }

    fn __repr__(&self) -> String {
        format!("Encoding(kind='{}', n={}, input_len={})", self.kind(), self.n(), self.input_len())
    }
}

#[pyclass(name = "Model", module = "automap")]
struct PyModel {
    inner: Checkpoint,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: Checkpoint::load(&path).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).py()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.params.n
    }

    #[getter]
    fn d_in(&self) -> usize {
        self.inner.params.d_in
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.meta.epoch
    }

    #[getter]
    fn target_mode(&self) -> &'static str {
        self.inner.meta.target_mode.as_str()
    }

    #[getter]
    fn encoding(&self) -> PyResult<PyEncoding> {
        Ok(PyEncoding { inner: self.inner.encoding().py()? })
    }

    /// Network output for raw (unscaled) sensor data.
    fn reconstruct(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        let scale = self.inner.meta.sensor_scale;
        let input: Vec<f64> = values.iter().map(|v| v / scale).collect();
        if input.len() != self.inner.params.d_in {
            return Err(PyValueError::new_err(format!("expected {} values, got {}", self.inner.params.d_in, input.len())));
        }
        Ok(network::forward(&self.inner.params, &input, false).py()?.0)
    }

    /// FC2 activation statistics over raw sensor inputs, as JSON.
    #[pyo3(signature = (inputs, tau=analysis::DEFAULT_TAU))]
    fn activation_stats(&self, inputs: Vec<Vec<f64>>, tau: f64) -> PyResult<String> {
        let enc = self.inner.encoding().py()?;
        let scale = self.inner.meta.sensor_scale;
        let svs = inputs
            .into_iter()
            .map(|v| SensorVec::new(v.iter().map(|x| x / scale).collect(), enc.layout()))
            .collect::<automap::Result<Vec<_>>>()
            .py()?;
        let stats = analysis::capture_stats(&self.inner.params, &svs, tau, "python").py()?;
        serde_json::to_string(&stats).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn fc_weights_csv(&self) -> String {
        analysis::fc_weights_csv(&self.inner.params)
    }
}

/// Train a network on flat images; returns the model and per-epoch mean loss.
/// `config` is a JSON object of training settings.
#[pyfunction]
#[pyo3(signature = (images, encoding, target="magnitude", phase_seed=None, config=None))]
fn train(
    py: Python<'_>,
    images: Vec<Vec<f64>>,
    encoding: &PyEncoding,
    target: &str,
    phase_seed: Option<u64>,
    config: Option<&str>,
) -> PyResult<(PyModel, Vec<f64>)> {
    let cfg: TrainConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => TrainConfig::default(),
    };
    let mode: TargetMode = parse(target)?;
    let imgs = images.into_iter().map(image).collect::<PyResult<Vec<_>>>()?;
    let n = imgs.first().map_or(0, Image::n);
    let ids = (0..imgs.len()).map(|i| format!("python:{i}")).collect();
    let corpus = Corpus { n, images: imgs, ids, provenance: "python".into(), normalization_scale: 1.0 };
    let enc = encoding.inner.clone();
    let (ckpt, history) = py
        .detach(|| {
            let ds = build_dataset(&corpus, &enc, mode, phase_seed, &mut rng::stream(cfg.seed, rng::STREAM_MISALIGN))?;
            let out = training::train(&ds, &cfg)?;
            Ok::<_, Error>((training::checkpoint_for(&ds, &cfg, out.params, cfg.epochs), out.history))
        })
        .py()?;
    Ok((PyModel { inner: ckpt }, history))
}

/// Train and evaluate one experiment from a JSON config; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (name, config="{}", out_dir=None))]
fn run_experiment(py: Python<'_>, name: &str, config: &str, out_dir: Option<PathBuf>) -> PyResult<String> {
    let cfg: ExperimentConfig = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let run = py.detach(|| evaluation::run_experiment(name, &cfg, out_dir.as_deref())).py()?;
    Ok(run.report.to_json())
}

#[pymodule]
#[pyo3(name = "automap")]
fn automap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dft2, m)?)?;
    m.add_function(wrap_pyfunction!(idft2, m)?)?;
    m.add_function(wrap_pyfunction!(nudft, m)?)?;
    m.add_function(wrap_pyfunction!(radon_forward, m)?)?;
    m.add_function(wrap_pyfunction!(radon_adjoint, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(noise_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyEncoding>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
