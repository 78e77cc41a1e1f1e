//! Parallel-beam Radon transform with exact line/pixel intersection lengths.
//!
//! Geometry: pixel `(r, c)` is the unit square `x in [c - n/2, c - n/2 + 1)`,
//! `y in [n/2 - r - 1, n/2 - r)`. Angle `j` is `theta_j = j * pi / n_angles`;
//! ray `i` is the line `x cos(theta) + y sin(theta) = i - (n_rays - 1) / 2`.
//! At `theta = 0` rays are vertical and integrate image columns. Rays lying
//! exactly on a pixel edge belong to the pixel on the half-open side.

use std::f64::consts::PI;

use super::{Image, Sinogram};
use crate::error::{Error, Result};

/// Sparse system matrix of the transform, one CSR row per `(angle, ray)` in sinogram order.
#[derive(Debug, Clone)]
pub struct RadonGeometry {
    n: usize,
    n_angles: usize,
    n_rays: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

fn snapped_angle(j: usize, n_angles: usize) -> (f64, f64) {
    let theta = j as f64 * PI / n_angles as f64;
    let (mut s, mut c) = theta.sin_cos();
    if c.abs() < 1e-12 {
        c = 0.0;
        s = s.signum();
    }
    if s.abs() < 1e-12 {
        s = 0.0;
        c = c.signum();
    }
    (c, s)
}

/// Parametric interval of the line `p0 + s*d` inside `[lo, hi)` along one axis.
fn slab(p0: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        (lo <= p0 && p0 < hi).then_some((f64::NEG_INFINITY, f64::INFINITY))
    } else {
        let a = (lo - p0) / d;
        let b = (hi - p0) / d;
        Some((a.min(b), a.max(b)))
    }
}

/// Length of the intersection of the line `{p : p . (c, s) = t}` with a pixel square.
pub(crate) fn intersection_length(t: f64, c: f64, s: f64, x0: f64, y0: f64) -> f64 {
    let (px, py) = (t * c, t * s);
    let (dx, dy) = (-s, c);
    match (slab(px, dx, x0, x0 + 1.0), slab(py, dy, y0, y0 + 1.0)) {
        (Some((a0, a1)), Some((b0, b1))) => (a1.min(b1) - a0.max(b0)).max(0.0),
        _ => 0.0,
    }
}

/// Smallest admissible odd ray count for side `n`: odd and at least `ceil(n * sqrt 2)`.
pub fn min_rays(n: usize) -> usize {
    let m = (n as f64 * std::f64::consts::SQRT_2).ceil() as usize;
    if m.is_multiple_of(2) {
        m + 1
    } else {
        m
    }
}

/// Smallest odd ray count at least `ceil(n * sqrt 2) + 2` (185 at n = 128).
pub fn default_rays(n: usize) -> usize {
    let m = (n as f64 * std::f64::consts::SQRT_2).ceil() as usize + 2;
    if m.is_multiple_of(2) {
        m + 1
    } else {
        m
    }
}

pub fn default_angles(n: usize) -> usize {
    n.max(60)
}

impl RadonGeometry {
    pub fn new(n: usize, n_angles: usize, n_rays: usize) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::config("at least one projection angle is required"));
        }
        if n_rays.is_multiple_of(2) {
            return Err(Error::config(format!("ray count {n_rays} must be odd")));
        }
        if n_rays < min_rays(n) {
            return Err(Error::config(format!(
                "ray count {n_rays} does not cover an image of side {n} (need >= {})",
                min_rays(n)
            )));
        }
        let half = n as f64 / 2.0;
        let center_ray = (n_rays - 1) as f64 / 2.0;
        let mut row_ptr = Vec::with_capacity(n_angles * n_rays + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut buckets: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_rays];
        for j in 0..n_angles {
            let (c, s) = snapped_angle(j, n_angles);
            let half_width = (c.abs() + s.abs()) / 2.0;
            for r in 0..n {
                let y0 = half - r as f64 - 1.0;
                for col in 0..n {
                    let x0 = col as f64 - half;
                    let proj = (x0 + 0.5) * c + (y0 + 0.5) * s;
                    let lo = (proj - half_width + center_ray).ceil().max(0.0) as usize;
                    let hi = ((proj + half_width + center_ray).floor() as usize).min(n_rays - 1);
                    for (i, bucket) in buckets.iter_mut().enumerate().take(hi + 1).skip(lo) {
                        let t = i as f64 - center_ray;
                        let len = intersection_length(t, c, s, x0, y0);
                        if len > 0.0 {
                            bucket.push(((r * n + col) as u32, len));
                        }
                    }
                }
            }
            for bucket in buckets.iter_mut() {
                for (p, w) in bucket.drain(..) {
                    cols.push(p);
                    vals.push(w);
                }
                row_ptr.push(cols.len());
            }
        }
        Ok(RadonGeometry { n, n_angles, n_rays, row_ptr, cols, vals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_rays(&self) -> usize {
        self.n_rays
    }

    pub fn n_rows(&self) -> usize {
        self.n_angles * self.n_rays
    }

    /// `(pixel indices, intersection lengths)` of one sinogram row.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn forward(&self, img: &Image) -> Result<Sinogram> {
        if img.n() != self.n {
            return Err(Error::dim(format!(
                "geometry built for side {}, image has side {}",
                self.n,
                img.n()
            )));
        }
        let px = img.pixels();
        let values = (0..self.n_rows())
            .map(|r| {
                let (idx, w) = self.row(r);
                idx.iter().zip(w).map(|(&p, &l)| px[p as usize] * l).sum()
            })
            .collect();
        Ok(Sinogram { n_angles: self.n_angles, n_rays: self.n_rays, values })
    }

    pub fn adjoint(&self, sino: &Sinogram) -> Result<Image> {
        if sino.n_angles != self.n_angles || sino.n_rays != self.n_rays {
            return Err(Error::dim(format!(
                "sinogram is {}x{}, geometry is {}x{}",
                sino.n_angles, sino.n_rays, self.n_angles, self.n_rays
            )));
        }
        if sino.values.len() != self.n_rows() {
            return Err(Error::dim("sinogram value count does not match its shape"));
        }
        let mut out = vec![0.0; self.n * self.n];
        for (r, &b) in sino.values.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let (idx, w) = self.row(r);
            for (&p, &l) in idx.iter().zip(w) {
                out[p as usize] += b * l;
            }
        }
        Ok(Image::from_raw(self.n, out))
    }
}

pub fn radon_forward(img: &Image, n_angles: usize, n_rays: usize) -> Result<Sinogram> {
    RadonGeometry::new(img.n(), n_angles, n_rays)?.forward(img)
}

pub fn radon_adjoint(sino: &Sinogram, n: usize) -> Result<Image> {
    RadonGeometry::new(n, sino.n_angles, sino.n_rays)?.adjoint(sino)
}
