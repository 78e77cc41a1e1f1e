//! Dense linear-operator kernels with exact adjoints: the unitary 2D DFT,
//! the non-uniform DFT and the discrete parallel-beam Radon transform.

mod fourier;
pub mod radon;

pub use fourier::{dft2, idft2, nudft, nudft_adjoint};
pub use radon::{radon_adjoint, radon_forward, RadonGeometry};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SIDE: usize = 4;

/// Real `n x n` pixel grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    n: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(n: usize, pixels: Vec<f64>) -> Result<Self> {
        if n < MIN_SIDE {
            return Err(Error::Domain(format!("image side {n} is below {MIN_SIDE}")));
        }
        if pixels.len() != n * n {
            return Err(Error::dim(format!(
                "image of side {n} needs {} pixels, got {}",
                n * n,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("image pixel {i}")));
        }
        Ok(Image { n, pixels })
    }

    pub fn zeros(n: usize) -> Self {
        Image { n, pixels: vec![0.0; n * n] }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Image { n, pixels: vec![value; n * n] }
    }

    pub(crate) fn from_raw(n: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), n * n);
        Image { n, pixels }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.n + col]
    }

    pub fn norm(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.pixels.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(self.n, self.pixels.iter().map(|&v| f(v)).collect())
    }
}

/// Complex `n x n` grid in DFT index order: entry `(k_row, k_col)` with DC at `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexGrid {
    pub fn new(n: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != n * n || im.len() != n * n {
            return Err(Error::dim(format!(
                "complex grid of side {n} needs {} entries per part, got {} and {}",
                n * n,
                re.len(),
                im.len()
            )));
        }
        if re.iter().chain(im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("complex grid".into()));
        }
        Ok(ComplexGrid { n, re, im })
    }

    pub fn zeros(n: usize) -> Self {
        ComplexGrid { n, re: vec![0.0; n * n], im: vec![0.0; n * n] }
    }

    pub fn norm(&self) -> f64 {
        self.re.iter().chain(self.im.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, k_row: usize, k_col: usize) -> Complex64 {
        let i = k_row * self.n + k_col;
        Complex64::new(self.re[i], self.im[i])
    }
}

/// Non-uniform k-space sample locations in cycles per field of view.
///
/// `(k_u, k_v)` pairs where `k_u` pairs with the image row index and `k_v` with
/// the column index; both must lie in `[-n/2, n/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTrajectory {
    pub points: Vec<(f64, f64)>,
}

impl KTrajectory {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("empty trajectory".into()));
        }
        Ok(KTrajectory { points })
    }

    /// The integer grid, listed in DFT index order so that `nudft` reproduces `dft2`.
    pub fn cartesian(n: usize) -> Self {
        let half = (n / 2) as i64;
        let wrap = |k: usize| {
            let k = k as i64;
            if k >= n as i64 - half {
                (k - n as i64) as f64
            } else {
                k as f64
            }
        };
        let points = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| (wrap(r), wrap(c)))
            .collect();
        KTrajectory { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        let half = n as f64 / 2.0;
        for (i, &(ku, kv)) in self.points.iter().enumerate() {
            let ok = |k: f64| k.is_finite() && k >= -half && k < half;
            if !ok(ku) || !ok(kv) {
                return Err(Error::Domain(format!(
                    "trajectory point {i} = ({ku}, {kv}) outside [-{half}, {half})"
                )));
            }
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|&(u, v)| [u, v]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::dim("flat trajectory has odd length"));
        }
        KTrajectory::new(flat.chunks_exact(2).map(|p| (p[0], p[1])).collect())
    }
}

/// Parallel-beam projections, row-major over `(angle, ray)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub n_angles: usize,
    pub n_rays: usize,
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn new(n_angles: usize, n_rays: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_angles * n_rays {
            return Err(Error::dim(format!(
                "sinogram {n_angles}x{n_rays} needs {} values, got {}",
                n_angles * n_rays,
                values.len()
            )));
        }
        if n_rays.is_multiple_of(2) {
            return Err(Error::config(format!("ray count {n_rays} must be odd")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("sinogram".into()));
        }
        Ok(Sinogram { n_angles, n_rays, values })
    }

    pub fn get(&self, angle: usize, ray: usize) -> f64 {
        self.values[angle * self.n_rays + ray]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Real inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
