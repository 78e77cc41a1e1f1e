//! Poisson-disc k-space masks by dart throwing with a bisected exclusion radius.
//!
//! Darts are drawn uniformly in centered k coordinates `[-n/2, n/2)^2` from a
//! fixed seeded sequence; a dart is kept when no kept dart lies closer than the
//! radius, then snapped to the grid cell containing it. The radius is bisected
//! until the sampled fraction is within tolerance of the target. DC is always on.

use rand::Rng as _;

use super::POISSON_TOLERANCE;
use crate::error::{Error, Result};
use crate::rng;

const DARTS_PER_CELL: usize = 30;
const BISECTION_ROUNDS: usize = 50;

fn throw(n: usize, darts: &[(f64, f64)], radius: f64) -> Vec<bool> {
    let half = n as f64 / 2.0;
    // acceleration grid with cells no smaller than the radius
    let cell = radius.max(1e-3);
    let side = ((n as f64 / cell).ceil() as usize).max(1);
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); side * side];
    let bucket_of = |x: f64| (((x + half) / cell) as usize).min(side - 1);
    let reach = (radius / cell).ceil() as isize;
    let r2 = radius * radius;
    let mut mask = vec![false; n * n];
    mask[0] = true;
    for &(ku, kv) in darts {
        let (bu, bv) = (bucket_of(ku) as isize, bucket_of(kv) as isize);
        let mut clear = true;
        'scan: for du in -reach..=reach {
            for dv in -reach..=reach {
                let (u, v) = (bu + du, bv + dv);
                if u < 0 || v < 0 || u >= side as isize || v >= side as isize {
                    continue;
                }
                for &(pu, pv) in &buckets[u as usize * side + v as usize] {
                    if (pu - ku).powi(2) + (pv - kv).powi(2) < r2 {
                        clear = false;
                        break 'scan;
                    }
                }
            }
        }
        if clear {
            buckets[bu as usize * side + bv as usize].push((ku, kv));
            let row = ku.floor().rem_euclid(n as f64) as usize;
            let col = kv.floor().rem_euclid(n as f64) as usize;
            mask[row * n + col] = true;
        }
    }
    mask
}

/// Row-major mask in DFT index order with sampled fraction within 0.01 of `fraction`.
pub fn poisson_disc_mask(n: usize, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    let n2 = (n * n) as f64;
    if fraction >= 1.0 {
        return Ok(vec![true; n * n]);
    }
    let half = n as f64 / 2.0;
    let mut r = rng::stream(seed, "poisson_disc");
    let darts: Vec<(f64, f64)> = (0..DARTS_PER_CELL * n * n)
        .map(|_| (r.random_range(-half..half), r.random_range(-half..half)))
        .collect();
    let (mut lo, mut hi) = (0.0, n as f64);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for _ in 0..BISECTION_ROUNDS {
        let mid = 0.5 * (lo + hi);
        let mask = throw(n, &darts, mid);
        let got = mask.iter().filter(|&&b| b).count() as f64 / n2;
        let err = (got - fraction).abs();
        if err <= POISSON_TOLERANCE {
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, mask));
            }
            if err * n2 < 0.5 {
                break;
            }
        }
        if got > fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.map(|(_, m)| m).ok_or_else(|| {
        Error::Construction(format!(
            "no exclusion radius reaches sampled fraction {fraction} +/- {POISSON_TOLERANCE} at side {n}"
        ))
    })
}
