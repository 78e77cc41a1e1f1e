//! Frozen acquisition forward models and synthetic phase modulation.

mod phase;
mod poisson;
mod spiral;

pub use phase::{apply_phase, phase_map_from_params, synthesize_phase_map, PhaseMap};
pub use poisson::poisson_disc_mask;
pub use spiral::spiral_trajectory;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{self, ComplexGrid, Image, KTrajectory, RadonGeometry, MIN_SIDE};
use crate::rng::Rng;

pub const SPIRAL_INTERLEAVES: usize = 10;
pub const SPIRAL_UNDERSAMPLING: f64 = 1.2;
pub const POISSON_FRACTION: f64 = 0.40;
pub const POISSON_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    Cartesian,
    PoissonDisc,
    Spiral,
    Radon,
    Misaligned,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 5] = [
        EncodingKind::Cartesian,
        EncodingKind::PoissonDisc,
        EncodingKind::Spiral,
        EncodingKind::Radon,
        EncodingKind::Misaligned,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EncodingKind::Cartesian => "cartesian",
            EncodingKind::PoissonDisc => "poisson_disc",
            EncodingKind::Spiral => "spiral",
            EncodingKind::Radon => "radon",
            EncodingKind::Misaligned => "misaligned",
        }
    }

    pub fn is_complex(self) -> bool {
        self != EncodingKind::Radon
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(EncodingKind::Cartesian),
            "poisson" | "poisson_disc" => Ok(EncodingKind::PoissonDisc),
            "spiral" => Ok(EncodingKind::Spiral),
            "radon" => Ok(EncodingKind::Radon),
            "misaligned" => Ok(EncodingKind::Misaligned),
            other => Err(Error::config(format!("unknown encoding kind '{other}'"))),
        }
    }
}

/// Construction parameters for an [`EncodingOperator`].
#[derive(Debug, Clone, PartialEq)]
pub enum EncodingSpec {
    Cartesian,
    PoissonDisc { fraction: f64 },
    Spiral { interleaves: usize, undersampling: f64 },
    Radon { n_angles: usize, n_rays: usize },
    Misaligned { max_shift: usize },
}

impl EncodingSpec {
    /// Desk-scale defaults for side `n`.
    pub fn default_for(kind: EncodingKind, n: usize) -> Self {
        match kind {
            EncodingKind::Cartesian => EncodingSpec::Cartesian,
            EncodingKind::PoissonDisc => EncodingSpec::PoissonDisc { fraction: POISSON_FRACTION },
            EncodingKind::Spiral => EncodingSpec::Spiral {
                interleaves: SPIRAL_INTERLEAVES,
                undersampling: SPIRAL_UNDERSAMPLING,
            },
            EncodingKind::Radon => EncodingSpec::Radon {
                n_angles: numerics::radon::default_angles(n),
                n_rays: numerics::radon::default_rays(n),
            },
            EncodingKind::Misaligned => EncodingSpec::Misaligned {
                max_shift: ((3 * n) as f64 / 128.0).round().max(1.0) as usize,
            },
        }
    }

    pub fn kind(&self) -> EncodingKind {
        match self {
            EncodingSpec::Cartesian => EncodingKind::Cartesian,
            EncodingSpec::PoissonDisc { .. } => EncodingKind::PoissonDisc,
            EncodingSpec::Spiral { .. } => EncodingKind::Spiral,
            EncodingSpec::Radon { .. } => EncodingKind::Radon,
            EncodingSpec::Misaligned { .. } => EncodingKind::Misaligned,
        }
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Cartesian,
    PoissonDisc { mask: Vec<bool> },
    Spiral { trajectory: KTrajectory },
    Radon { geometry: Arc<RadonGeometry> },
    Misaligned { max_shift: usize },
}

/// A forward model with all sampling geometry fixed at construction.
#[derive(Debug, Clone)]
pub struct EncodingOperator {
    n: usize,
    seed: u64,
    spec: EncodingSpec,
    geometry: Geometry,
}

pub fn make_encoding(spec: &EncodingSpec, n: usize, seed: u64) -> Result<EncodingOperator> {
    if n < MIN_SIDE {
        return Err(Error::config(format!("image side {n} is below {MIN_SIDE}")));
    }
    let geometry = match *spec {
        EncodingSpec::Cartesian => Geometry::Cartesian,
        EncodingSpec::PoissonDisc { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::config(format!("sampling fraction {fraction} not in (0, 1]")));
            }
            Geometry::PoissonDisc { mask: poisson_disc_mask(n, fraction, seed)? }
        }
        EncodingSpec::Spiral { interleaves, undersampling } => {
            if interleaves == 0 || undersampling.is_nan() || undersampling <= 0.0 {
                return Err(Error::config("spiral needs >= 1 interleave and a positive undersampling factor"));
            }
            Geometry::Spiral { trajectory: spiral_trajectory(n, interleaves, undersampling)? }
        }
        EncodingSpec::Radon { n_angles, n_rays } => {
            Geometry::Radon { geometry: Arc::new(RadonGeometry::new(n, n_angles, n_rays)?) }
        }
        EncodingSpec::Misaligned { max_shift } => {
            if max_shift >= n {
                return Err(Error::config(format!("max shift {max_shift} must be below the side {n}")));
            }
            Geometry::Misaligned { max_shift }
        }
    };
    Ok(EncodingOperator { n, seed, spec: spec.clone(), geometry })
}

/// Layout of a flattened sensor vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub kind: EncodingKind,
    pub complex: bool,
    /// Number of (complex or real) samples.
    pub m: usize,
    pub ordering: String,
}

impl SensorLayout {
    pub fn len(&self) -> usize {
        if self.complex {
            2 * self.m
        } else {
            self.m
        }
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }
}

/// Real-valued network input: complex encodings are stored as `[all re || all im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorVec {
    pub values: Vec<f64>,
    pub layout: SensorLayout,
}

impl SensorVec {
    pub fn new(values: Vec<f64>, layout: SensorLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::dim(format!(
                "layout expects {} values, got {}",
                layout.len(),
                values.len()
            )));
        }
        Ok(SensorVec { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Complex samples in layout order; errors for real-valued layouts.
    pub fn complex_samples(&self) -> Result<Vec<Complex64>> {
        if !self.layout.complex {
            return Err(Error::Usage(format!("{} sensor data is real-valued", self.layout.kind)));
        }
        let m = self.layout.m;
        Ok((0..m).map(|i| Complex64::new(self.values[i], self.values[m + i])).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn flatten_complex(re: impl IntoIterator<Item = f64>, im: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = re.into_iter().collect();
    out.extend(im);
    out
}

/// Map a DFT index to its signed frequency in `[-n/2, n/2)`.
fn centered(k: usize, n: usize) -> i64 {
    let half = (n / 2) as i64;
    let k = k as i64;
    if k >= n as i64 - half {
        k - n as i64
    } else {
        k
    }
}

impl EncodingOperator {
    pub fn kind(&self) -> EncodingKind {
        self.spec.kind()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &EncodingSpec {
        &self.spec
    }

    pub fn mask(&self) -> Option<&[bool]> {
        match &self.geometry {
            Geometry::PoissonDisc { mask } => Some(mask),
            _ => None,
        }
    }

    pub fn trajectory(&self) -> Option<&KTrajectory> {
        match &self.geometry {
            Geometry::Spiral { trajectory } => Some(trajectory),
            _ => None,
        }
    }

    pub fn radon_geometry(&self) -> Option<&RadonGeometry> {
        match &self.geometry {
            Geometry::Radon { geometry } => Some(geometry),
            _ => None,
        }
    }

    pub fn max_shift(&self) -> Option<usize> {
        match self.geometry {
            Geometry::Misaligned { max_shift } => Some(max_shift),
            _ => None,
        }
    }

    pub fn sampled_fraction(&self) -> f64 {
        match &self.geometry {
            Geometry::PoissonDisc { mask } => {
                mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
            }
            _ => 1.0,
        }
    }

    pub fn layout(&self) -> SensorLayout {
        let n2 = self.n * self.n;
        let (m, ordering) = match &self.geometry {
            Geometry::Cartesian | Geometry::Misaligned { .. } => (n2, "grid_row_major"),
            Geometry::PoissonDisc { mask } => {
                (mask.iter().filter(|&&b| b).count(), "mask_row_major")
            }
            Geometry::Spiral { trajectory } => (trajectory.len(), "trajectory_order"),
            Geometry::Radon { geometry } => (geometry.n_rows(), "sinogram_angle_major"),
        };
        SensorLayout { kind: self.kind(), complex: self.kind().is_complex(), m, ordering: ordering.into() }
    }

    pub fn input_len(&self) -> usize {
        self.layout().len()
    }

    /// Apply the forward model. `rng` is required only for misaligned sampling,
    /// which draws fresh per-row shifts on every call.
    pub fn encode(&self, img_re: &Image, img_im: &Image, rng: Option<&mut Rng>) -> Result<SensorVec> {
        if img_re.n() != self.n || img_im.n() != self.n {
            return Err(Error::dim(format!(
                "operator built for side {}, image parts have sides {} and {}",
                self.n,
                img_re.n(),
                img_im.n()
            )));
        }
        let layout = self.layout();
        let values = match &self.geometry {
            Geometry::Cartesian => {
                let g = numerics::dft2(img_re, img_im)?;
                flatten_complex(g.re, g.im)
            }
            Geometry::PoissonDisc { mask } => {
                let g = numerics::dft2(img_re, img_im)?;
                let pick = |v: &[f64]| -> Vec<f64> {
                    v.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| x).collect()
                };
                flatten_complex(pick(&g.re), pick(&g.im))
            }
            Geometry::Spiral { trajectory } => {
                let s = numerics::nudft(img_re, img_im, trajectory)?;
                flatten_complex(s.iter().map(|z| z.re), s.iter().map(|z| z.im))
            }
            Geometry::Radon { geometry } => {
                if img_im.pixels().iter().any(|&v| v != 0.0) {
                    return Err(Error::Usage("radon encoding takes real images only".into()));
                }
                geometry.forward(img_re)?.values
            }
            Geometry::Misaligned { max_shift } => {
                let rng = rng.ok_or_else(|| {
                    Error::Usage("misaligned encoding needs a random stream for its line shifts".into())
                })?;
                let max = *max_shift as i64;
                let shifts: Vec<i64> = (0..self.n).map(|_| rng.random_range(-max..=max)).collect();
                let g = shift_lines(&numerics::dft2(img_re, img_im)?, &shifts);
                flatten_complex(g.re, g.im)
            }
        };
        SensorVec::new(values, layout)
    }

    /// Scatter sampled k-space entries back onto the full grid, zeros elsewhere.
    pub fn scatter_to_grid(&self, sv: &SensorVec) -> Result<ComplexGrid> {
        let n2 = self.n * self.n;
        if sv.layout != self.layout() {
            return Err(Error::dim("sensor layout does not match this operator"));
        }
        match &self.geometry {
            Geometry::Cartesian | Geometry::Misaligned { .. } => {
                ComplexGrid::new(self.n, sv.values[..n2].to_vec(), sv.values[n2..].to_vec())
            }
            Geometry::PoissonDisc { mask } => {
                let m = sv.layout.m;
                let mut g = ComplexGrid::zeros(self.n);
                let positions = mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i);
                for (j, i) in positions.enumerate() {
                    g.re[i] = sv.values[j];
                    g.im[i] = sv.values[m + j];
                }
                Ok(g)
            }
            _ => Err(Error::Usage(format!("{} data does not live on the Cartesian grid", self.kind()))),
        }
    }

    pub fn to_json_value(&self) -> Value {
        let (params, geometry) = match (&self.spec, &self.geometry) {
            (EncodingSpec::PoissonDisc { fraction }, Geometry::PoissonDisc { mask }) => (
                json!({ "target_fraction": fraction }),
                json!({ "mask": B64.encode(pack_bits(mask)) }),
            ),
            (EncodingSpec::Spiral { interleaves, undersampling }, Geometry::Spiral { trajectory }) => (
                json!({ "interleaves": interleaves, "undersampling": undersampling }),
                json!({ "trajectory": trajectory.to_flat() }),
            ),
            (EncodingSpec::Radon { n_angles, n_rays }, _) => (
                json!({ "n_angles": n_angles, "n_rays": n_rays }),
                json!({ "n_angles": n_angles, "n_rays": n_rays }),
            ),
            (EncodingSpec::Misaligned { max_shift }, _) => (
                json!({ "max_shift": max_shift }),
                json!({ "max_shift": max_shift, "per_example": true }),
            ),
            _ => (json!({}), json!({})),
        };
        json!({
            "kind": self.kind().as_str(),
            "n": self.n,
            "seed": self.seed,
            "params": params,
            "geometry": geometry,
        })
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(text)?)
    }

    /// Rebuild an operator from its serialized form. Stored geometry is used
    /// as-is rather than regenerated, so masks survive generator changes.
    pub fn from_json_value(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("encoding JSON: missing or invalid '{what}'"));
        let kind: EncodingKind =
            v.get("kind").and_then(Value::as_str).ok_or_else(|| bad("kind"))?.parse()?;
        let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as usize;
        let seed = v.get("seed").and_then(Value::as_u64).ok_or_else(|| bad("seed"))?;
        let params = v.get("params").ok_or_else(|| bad("params"))?;
        let geom = v.get("geometry").ok_or_else(|| bad("geometry"))?;
        let num = |o: &Value, k: &str| o.get(k).and_then(Value::as_f64).ok_or_else(|| bad(k));
        let int = |o: &Value, k: &str| o.get(k).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad(k));
        if n < MIN_SIDE {
            return Err(bad("n"));
        }
        let (spec, geometry) = match kind {
            EncodingKind::Cartesian => (EncodingSpec::Cartesian, Geometry::Cartesian),
            EncodingKind::PoissonDisc => {
                let fraction = num(params, "target_fraction")?;
                let text = geom.get("mask").and_then(Value::as_str).ok_or_else(|| bad("mask"))?;
                let bytes = B64.decode(text).map_err(|_| bad("mask"))?;
                let mask = unpack_bits(&bytes, n * n).ok_or_else(|| bad("mask"))?;
                (EncodingSpec::PoissonDisc { fraction }, Geometry::PoissonDisc { mask })
            }
            EncodingKind::Spiral => {
                let flat: Vec<f64> = geom
                    .get("trajectory")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("trajectory"))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| bad("trajectory")))
                    .collect::<Result<_>>()?;
                let trajectory = KTrajectory::from_flat(&flat)?;
                trajectory.check_range(n)?;
                (
                    EncodingSpec::Spiral {
                        interleaves: int(params, "interleaves")?,
                        undersampling: num(params, "undersampling")?,
                    },
                    Geometry::Spiral { trajectory },
                )
            }
            EncodingKind::Radon => {
                let (n_angles, n_rays) = (int(geom, "n_angles")?, int(geom, "n_rays")?);
                (
                    EncodingSpec::Radon { n_angles, n_rays },
                    Geometry::Radon { geometry: Arc::new(RadonGeometry::new(n, n_angles, n_rays)?) },
                )
            }
            EncodingKind::Misaligned => {
                let max_shift = int(geom, "max_shift")?;
                (EncodingSpec::Misaligned { max_shift }, Geometry::Misaligned { max_shift })
            }
        };
        Ok(EncodingOperator { n, seed, spec, geometry })
    }
}

/// Shift each k-space row along the readout (column) axis by `shifts[row]`
/// samples in centered coordinates; vacated samples become zero.
pub(crate) fn shift_lines(g: &ComplexGrid, shifts: &[i64]) -> ComplexGrid {
    let n = g.n;
    let mut out = ComplexGrid::zeros(n);
    let half = (n / 2) as i64;
    for (r, &s) in shifts.iter().enumerate().take(n) {
        for c in 0..n {
            // centered position p in [0, n) with DC at n/2
            let p = centered(c, n) + half;
            let src = p - s;
            if !(0..n as i64).contains(&src) {
                continue;
            }
            let src_k = (src - half).rem_euclid(n as i64) as usize;
            out.re[r * n + c] = g.re[r * n + src_k];
            out.im[r * n + c] = g.im[r * n + src_k];
        }
    }
    out
}

/// LSB-first bit packing, row-major.
fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |b, (i, &on)| b | ((on as u8) << i)))
        .collect()
}

fn unpack_bits(bytes: &[u8], len: usize) -> Option<Vec<bool>> {
    if bytes.len() != len.div_ceil(8) {
        return None;
    }
    Some((0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

#[cfg(test)]
mod tests;
