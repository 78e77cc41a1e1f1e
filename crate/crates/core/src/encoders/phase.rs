use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Image;
use crate::rng;

/// Smooth phase pattern with values in `[0, 2 pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub n: usize,
    pub phase: Vec<f64>,
}

/// Random rotated product of sinusoids, rescaled onto `[0, 2 pi]`.
pub fn synthesize_phase_map(n: usize, seed: u64) -> PhaseMap {
    let mut r = rng::stream(seed, rng::STREAM_PHASE);
    let f_max = (n as f64 / 8.0).max(0.5);
    let theta = r.random_range(0.0..PI);
    let f1 = 0.5 + (f_max - 0.5) * r.random::<f64>();
    let f2 = 0.5 + (f_max - 0.5) * r.random::<f64>();
    phase_map_from_params(n, theta, f1, f2)
}

/// `sin(2 pi f1 u'/n) * sin(2 pi f2 v'/n)` on coordinates rotated by `theta` about
/// the image center. A flat pattern cannot be rescaled and maps to the constant pi.
pub fn phase_map_from_params(n: usize, theta: f64, f1: f64, f2: f64) -> PhaseMap {
    let (s, c) = theta.sin_cos();
    let mid = (n as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..n * n)
        .map(|i| {
            let (u, v) = ((i / n) as f64 - mid, (i % n) as f64 - mid);
            let ur = u * c - v * s;
            let vr = u * s + v * c;
            (2.0 * PI * f1 * ur / n as f64).sin() * (2.0 * PI * f2 * vr / n as f64).sin()
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let phase = if span > 1e-12 {
        raw.iter().map(|&p| ((p - lo) / span * 2.0 * PI).clamp(0.0, 2.0 * PI)).collect()
    } else {
        vec![PI; n * n]
    };
    PhaseMap { n, phase }
}

/// `(img cos(phase), img sin(phase))`.
pub fn apply_phase(img: &Image, pm: &PhaseMap) -> Result<(Image, Image)> {
    if img.n() != pm.n || pm.phase.len() != pm.n * pm.n {
        return Err(Error::dim(format!("image side {} vs phase map side {}", img.n(), pm.n)));
    }
    let n = img.n();
    let re = img.pixels().iter().zip(&pm.phase).map(|(&m, &p)| m * p.cos()).collect();
    let im = img.pixels().iter().zip(&pm.phase).map(|(&m, &p)| m * p.sin()).collect();
    Ok((Image::from_raw(n, re), Image::from_raw(n, im)))
}
