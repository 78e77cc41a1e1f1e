//! FC2 activation statistics, FC3 incoming-weight export and output-kernel tiles.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container;
use crate::encoders::SensorVec;
use crate::error::{Error, Result};
use crate::network::{self, NetParams, Workspace, CHANNELS, OUT_KERNEL};
use crate::pgm::{self, Gray8};

pub const HISTOGRAM_BINS: usize = 101;
pub const DEFAULT_TAU: f64 = 0.01;

/// FC2 activation histogram over `[-1, 1]` in 101 equal bins; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub tau: f64,
    /// Fraction of activations with `|a| < tau`.
    pub sparsity_fraction: f64,
    pub l1_mean: f64,
    pub samples: usize,
    pub source: String,
}

pub fn bin_edges() -> Vec<f64> {
    (0..=HISTOGRAM_BINS).map(|i| -1.0 + 2.0 * i as f64 / HISTOGRAM_BINS as f64).collect()
}

fn bin_of(a: f64) -> usize {
    let k = ((a + 1.0) / 2.0 * HISTOGRAM_BINS as f64).floor();
    (k.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn capture_stats(p: &NetParams, inputs: &[SensorVec], tau: f64, source: &str) -> Result<ActivationStats> {
    if inputs.is_empty() {
        return Err(Error::config("activation statistics need at least one input"));
    }
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    let (mut sparse, mut l1, mut total) = (0usize, 0.0, 0usize);
    let mut ws = Workspace::new(p.n);
    for sv in inputs {
        if sv.len() != p.d_in {
            return Err(Error::dim(format!("input of {} values for a network taking {}", sv.len(), p.d_in)));
        }
        network::forward_into(p, &sv.values, &mut ws)?;
        for &a in ws.fc2_act() {
            counts[bin_of(a)] += 1;
            if a.abs() < tau {
                sparse += 1;
            }
            l1 += a.abs();
            total += 1;
        }
    }
    Ok(ActivationStats {
        bin_edges: bin_edges(),
        counts,
        tau,
        sparsity_fraction: sparse as f64 / total as f64,
        l1_mean: l1 / total as f64,
        samples: inputs.len(),
        source: source.to_string(),
    })
}

/// One row per FC3 unit: its pixel index, then its `n^2` incoming weights from FC2.
pub fn fc_weights_csv(p: &NetParams) -> String {
    let px = p.n * p.n;
    let mut out = String::with_capacity(px * px * 24);
    for (i, row) in p.w2.chunks_exact(px).enumerate() {
        out.push_str(&i.to_string());
        for w in row {
            write!(out, ",{w:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn export_fc_weights(p: &NetParams, path: &Path) -> Result<()> {
    container::write_atomic(path, fc_weights_csv(p).as_bytes())
}

/// Parse an export back into `(pixel index, weights)` rows.
pub fn parse_fc_weights(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    text.lines()
        .map(|line| {
            let mut cells = line.split(',');
            let bad = || Error::Format(format!("bad weight row '{}'", line.chars().take(40).collect::<String>()));
            let idx = cells.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let weights = cells.map(|c| c.parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            Ok((idx, weights))
        })
        .collect()
}

fn min_max_tile(values: &[f64]) -> Vec<u8> {
    pgm::from_real(OUT_KERNEL, OUT_KERNEL, values).data
}

/// 64 tiles of 7x7 laid out 8 by 8 with 1-pixel separators.
pub fn kernel_montage(p: &NetParams) -> Gray8 {
    let side = 8 * OUT_KERNEL + 7;
    let mut data = vec![0u8; side * side];
    for (c, k) in p.kt.chunks_exact(OUT_KERNEL * OUT_KERNEL).enumerate() {
        let tile = min_max_tile(k);
        let (oy, ox) = ((c / 8) * (OUT_KERNEL + 1), (c % 8) * (OUT_KERNEL + 1));
        for y in 0..OUT_KERNEL {
            for x in 0..OUT_KERNEL {
                data[(oy + y) * side + ox + x] = tile[y * OUT_KERNEL + x];
            }
        }
    }
    Gray8 { width: side, height: side, data }
}

/// Write `kernel_00.pgm` .. `kernel_63.pgm` and `montage.pgm` into `dir`.
pub fn kernel_gallery(p: &NetParams, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(CHANNELS + 1);
    for (c, k) in p.kt.chunks_exact(OUT_KERNEL * OUT_KERNEL).enumerate() {
        let path = dir.join(format!("kernel_{c:02}.pgm"));
        pgm::write(&path, &Gray8 { width: OUT_KERNEL, height: OUT_KERNEL, data: min_max_tile(k) })?;
        paths.push(path);
    }
    let path = dir.join("montage.pgm");
    pgm::write(&path, &kernel_montage(p))?;
    paths.push(path);
    Ok(paths)
}
