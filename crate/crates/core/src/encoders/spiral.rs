use std::f64::consts::PI;

use crate::error::Result;
use crate::numerics::KTrajectory;

/// Interleaved Archimedean spiral, `r(tau) = tau * n/2` with `tau` equispaced in `[0, 1)`.
///
/// Total sample count is `round(n^2 / undersampling)`, split as evenly as possible over
/// the arms (earlier arms take the remainder). Arm `j` is rotated by `2 pi j / interleaves`
/// and winds `n / (2 * interleaves)` turns, which puts adjacent arms one k-space unit apart.
pub fn spiral_trajectory(n: usize, interleaves: usize, undersampling: f64) -> Result<KTrajectory> {
    let total = ((n * n) as f64 / undersampling).round() as usize;
    let turns = n as f64 / (2.0 * interleaves as f64);
    let k_max = n as f64 / 2.0;
    let base = total / interleaves;
    let extra = total % interleaves;
    let mut points = Vec::with_capacity(total);
    for arm in 0..interleaves {
        let count = base + usize::from(arm < extra);
        let offset = 2.0 * PI * arm as f64 / interleaves as f64;
        for i in 0..count {
            let tau = i as f64 / count as f64;
            let radius = tau * k_max;
            let angle = 2.0 * PI * turns * tau + offset;
            points.push((radius * angle.cos(), radius * angle.sin()));
        }
    }
    KTrajectory::new(points)
}
