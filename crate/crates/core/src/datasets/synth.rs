//! Procedural grayscale scenes: anti-aliased ellipses and rectangles over smooth ramps.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{self, Rng};

const SUPERSAMPLE: usize = 4;

enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64, rot: f64 },
    Rect { cy: f64, cx: f64, hy: f64, hx: f64, rot: f64 },
    Ramp { gy: f64, gx: f64 },
}

impl Shape {
    fn random(r: &mut Rng, n: f64) -> Shape {
        let rot = r.random_range(0.0..PI);
        let (cy, cx) = (r.random_range(0.15 * n..0.85 * n), r.random_range(0.15 * n..0.85 * n));
        match r.random_range(0..5) {
            0 | 1 => Shape::Ellipse {
                cy,
                cx,
                ry: r.random_range(0.08 * n..0.35 * n),
                rx: r.random_range(0.08 * n..0.35 * n),
                rot,
            },
            2 | 3 => Shape::Rect {
                cy,
                cx,
                hy: r.random_range(0.08 * n..0.3 * n),
                hx: r.random_range(0.08 * n..0.3 * n),
                rot,
            },
            _ => {
                let a = r.random_range(0.0..2.0 * PI);
                Shape::Ramp { gy: a.sin() / n, gx: a.cos() / n }
            }
        }
    }

    /// Ramps have no interior.
    fn inside(&self, y: f64, x: f64) -> bool {
        let local = |cy: f64, cx: f64, rot: f64| {
            let (s, c) = rot.sin_cos();
            let (dy, dx) = (y - cy, x - cx);
            (dy * c - dx * s, dy * s + dx * c)
        };
        match *self {
            Shape::Ellipse { cy, cx, ry, rx, rot } => {
                let (u, v) = local(cy, cx, rot);
                (u / ry).powi(2) + (v / rx).powi(2) <= 1.0
            }
            Shape::Rect { cy, cx, hy, hx, rot } => {
                let (u, v) = local(cy, cx, rot);
                u.abs() <= hy && v.abs() <= hx
            }
            Shape::Ramp { .. } => false,
        }
    }
}

/// One raw (un-normalized) scene with 3 to 10 primitives, values roughly in [0, 1].
pub(crate) fn scene(n: usize, r: &mut Rng) -> Vec<f64> {
    let nf = n as f64;
    let mut img = vec![r.random_range(0.0..0.2); n * n];
    let count = r.random_range(3..=10);
    for _ in 0..count {
        let shape = Shape::random(r, nf);
        let level = r.random_range(0.1..1.0);
        if let Shape::Ramp { gy, gx } = shape {
            let amp = r.random_range(0.1..0.4);
            let (y0, x0) = (nf / 2.0, nf / 2.0);
            for (i, p) in img.iter_mut().enumerate() {
                let (y, x) = ((i / n) as f64 + 0.5 - y0, (i % n) as f64 + 0.5 - x0);
                *p += amp * (gy * y + gx * x);
            }
            continue;
        }
        for (i, p) in img.iter_mut().enumerate() {
            let (row, col) = ((i / n) as f64, (i % n) as f64);
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let y = row + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                    let x = col + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                    hits += shape.inside(y, x) as usize;
                }
            }
            let alpha = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
            *p = (1.0 - alpha) * *p + alpha * level;
        }
    }
    img
}

pub(crate) fn scenes(count: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| scene(n, &mut rng::indexed_stream(seed, rng::STREAM_CORPUS, i as u64)))
        .collect()
}

pub(crate) fn noise_fields(count: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut r = rng::indexed_stream(seed, "noise_corpus", i as u64);
            (0..n * n).map(|_| StandardNormal.sample(&mut r)).collect()
        })
        .collect()
}
