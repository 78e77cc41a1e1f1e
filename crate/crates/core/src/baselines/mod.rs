//! Conventional reconstructions: inverse DFT, zero-filled inverse DFT,
//! adjoint-NUDFT gridding, and Kaczmarz ART.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::encoders::{EncodingKind, EncodingOperator, SensorVec};
use crate::error::{Error, Result};
use crate::numerics::{idft2, nudft_adjoint, ComplexGrid, Image, KTrajectory, RadonGeometry, Sinogram};
use crate::pgm;

pub const ART_SWEEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Automap,
    Ifft,
    #[serde(rename = "zerofill")]
    ZeroFill,
    Gridding,
    Art,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Automap => "automap",
            Method::Ifft => "ifft",
            Method::ZeroFill => "zerofill",
            Method::Gridding => "gridding",
            Method::Art => "art",
        }
    }

    /// The conventional reconstruction paired with each encoding.
    pub fn baseline_for(kind: EncodingKind) -> Method {
        match kind {
            EncodingKind::Cartesian | EncodingKind::Misaligned => Method::Ifft,
            EncodingKind::PoissonDisc => Method::ZeroFill,
            EncodingKind::Spiral => Method::Gridding,
            EncodingKind::Radon => Method::Art,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "automap" => Ok(Method::Automap),
            "ifft" => Ok(Method::Ifft),
            "zerofill" | "zero_fill" => Ok(Method::ZeroFill),
            "gridding" => Ok(Method::Gridding),
            "art" => Ok(Method::Art),
            other => Err(Error::Usage(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub image: Image,
    pub method: Method,
    /// ART only.
    pub iterations: usize,
    /// ART only: `||Ax - b||` after each sweep.
    pub residual_history: Vec<f64>,
}

fn magnitude(re: &Image, im: &Image) -> Image {
    let px = re.pixels().iter().zip(im.pixels()).map(|(a, b)| a.hypot(*b)).collect();
    Image::from_raw(re.n(), px)
}

fn grid_side(m: usize) -> Option<usize> {
    let n = (m as f64).sqrt().round() as usize;
    (n * n == m).then_some(n)
}

/// Magnitude of the inverse DFT of a full-grid complex sensor vector.
pub fn ifft_recon(sv: &SensorVec) -> Result<Image> {
    let full = sv.layout.complex && sv.layout.ordering == "grid_row_major";
    let n = grid_side(sv.layout.m).filter(|_| full).ok_or_else(|| {
        Error::Usage(format!("inverse DFT needs full-grid k-space, got {} data", sv.layout.kind))
    })?;
    let n2 = n * n;
    let grid = ComplexGrid::new(n, sv.values[..n2].to_vec(), sv.values[n2..].to_vec())?;
    let (re, im) = idft2(&grid)?;
    Ok(magnitude(&re, &im))
}

/// Samples scattered to their mask positions, zeros elsewhere, then inverse DFT magnitude.
pub fn zero_fill_recon(sv: &SensorVec, op: &EncodingOperator) -> Result<Image> {
    if op.mask().is_none() {
        return Err(Error::Usage(format!("zero-fill needs a sampling mask, not {} data", op.kind())));
    }
    let grid = op.scatter_to_grid(sv)?;
    let (re, im) = idft2(&grid)?;
    Ok(magnitude(&re, &im))
}

/// Adjoint NUDFT magnitude scaled by `n^2 / m`.
pub fn gridding_recon(samples: &[Complex64], traj: &KTrajectory, n: usize) -> Result<Image> {
    let (re, im) = nudft_adjoint(samples, traj, n)?;
    let scale = (n * n) as f64 / samples.len() as f64;
    Ok(magnitude(&re.map(|v| v * scale), &im.map(|v| v * scale)))
}

/// Row access for [`kaczmarz`]: sparse rows as index/value pairs.
pub trait RowSystem {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn row(&self, r: usize) -> (&[u32], &[f64]);
}

impl RowSystem for RadonGeometry {
    fn n_rows(&self) -> usize {
        RadonGeometry::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        self.n() * self.n()
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        RadonGeometry::row(self, r)
    }
}

/// Dense matrix in sparse-row form, for explicit small systems.
#[derive(Debug, Clone)]
pub struct DenseRows {
    cols: usize,
    index: Vec<u32>,
    values: Vec<Vec<f64>>,
}

impl DenseRows {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("rows of unequal length"));
        }
        Ok(DenseRows { cols, index: (0..cols as u32).collect(), values: rows })
    }
}

impl RowSystem for DenseRows {
    fn n_rows(&self) -> usize {
        self.values.len()
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        (&self.index, &self.values[r])
    }
}

fn residual_norm<A: RowSystem>(a: &A, x: &[f64], b: &[f64]) -> f64 {
    (0..a.n_rows())
        .map(|r| {
            let (idx, val) = a.row(r);
            let ax: f64 = idx.iter().zip(val).map(|(&i, v)| v * x[i as usize]).sum();
            (ax - b[r]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Cyclic row projections in natural order from `x`; rows with zero norm are skipped.
/// `on_sweep` sees the estimate after every full sweep.
pub fn kaczmarz<A: RowSystem>(
    a: &A,
    b: &[f64],
    x: &mut [f64],
    sweeps: usize,
    relax: f64,
    mut on_sweep: impl FnMut(&[f64]),
) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() || x.len() != a.n_cols() {
        return Err(Error::dim(format!(
            "system is {}x{}, got b of {} and x of {}",
            a.n_rows(),
            a.n_cols(),
            b.len(),
            x.len()
        )));
    }
    if sweeps == 0 {
        return Err(Error::config("Kaczmarz needs at least one sweep"));
    }
    let norms: Vec<f64> = (0..a.n_rows()).map(|r| a.row(r).1.iter().map(|v| v * v).sum()).collect();
    let mut history = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        for (r, &nrm) in norms.iter().enumerate() {
            if nrm == 0.0 {
                continue;
            }
            let (idx, val) = a.row(r);
            let ax: f64 = idx.iter().zip(val).map(|(&i, v)| v * x[i as usize]).sum();
            let step = relax * (b[r] - ax) / nrm;
            for (&i, v) in idx.iter().zip(val) {
                x[i as usize] += step * v;
            }
        }
        history.push(residual_norm(a, x, b));
        on_sweep(x);
    }
    Ok(history)
}

/// ART on a sinogram with its matching ray geometry, starting from zero.
pub fn kaczmarz_art(sino: &Sinogram, geometry: &RadonGeometry, sweeps: usize, relax: f64) -> Result<BaselineResult> {
    if sino.n_angles != geometry.n_angles() || sino.n_rays != geometry.n_rays() {
        return Err(Error::dim(format!(
            "sinogram is {}x{}, geometry {}x{}",
            sino.n_angles,
            sino.n_rays,
            geometry.n_angles(),
            geometry.n_rays()
        )));
    }
    let n = geometry.n();
    let mut x = vec![0.0; n * n];
    let residual_history = kaczmarz(geometry, &sino.values, &mut x, sweeps, relax, |_| {})?;
    Ok(BaselineResult { image: Image::new(n, x)?, method: Method::Art, iterations: sweeps, residual_history })
}

/// Run the baseline paired with the operator's encoding on one sensor vector.
pub fn reconstruct(method: Method, sv: &SensorVec, op: &EncodingOperator, sweeps: usize) -> Result<BaselineResult> {
    if sv.layout != op.layout() {
        return Err(Error::Mismatch("sensor layout does not match the encoding".into()));
    }
    let plain = |image: Image| BaselineResult { image, method, iterations: 0, residual_history: Vec::new() };
    match (method, op.kind()) {
        (Method::Ifft, EncodingKind::Cartesian | EncodingKind::Misaligned) => Ok(plain(ifft_recon(sv)?)),
        (Method::ZeroFill, EncodingKind::PoissonDisc | EncodingKind::Cartesian) => {
            Ok(plain(zero_fill_recon(sv, op)?))
        }
        (Method::Gridding, EncodingKind::Spiral) => {
            let traj = op.trajectory().expect("spiral operators carry a trajectory");
            Ok(plain(gridding_recon(&sv.complex_samples()?, traj, op.n())?))
        }
        (Method::Art, EncodingKind::Radon) => {
            let geom = op.radon_geometry().expect("radon operators carry a geometry");
            let sino = Sinogram::new(geom.n_angles(), geom.n_rays(), sv.values.clone())?;
            kaczmarz_art(&sino, geom, sweeps, 1.0)
        }
        (m, k) => Err(Error::Usage(format!("method {m} does not apply to {k} data"))),
    }
}

/// `path` as 8-bit min-max scaled PGM plus a raw little-endian f64 sidecar at `path.f64`.
pub fn write_image(img: &Image, path: &Path) -> Result<()> {
    pgm::write(path, &pgm::from_real(img.n(), img.n(), img.pixels()))?;
    let mut side = path.as_os_str().to_owned();
    side.push(".f64");
    container::write_atomic(Path::new(&side), &container::raw_f64(img.pixels()))
}

#[cfg(test)]
mod tests;
