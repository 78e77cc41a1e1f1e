use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pgm::{self, Gray8};

/// Largest centered square: `(row offset, col offset, side)`.
pub fn center_square(height: usize, width: usize) -> (usize, usize, usize) {
    let side = height.min(width);
    ((height - side) / 2, (width - side) / 2, side)
}

/// Area-weighted box filter from `side x side` down to `n x n`.
pub fn box_downsample(src: &[f64], side: usize, n: usize) -> Vec<f64> {
    let ratio = side as f64 / n as f64;
    // weights[i] lists (source index, overlap length) for output cell i along one axis
    let weights: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * ratio, (i + 1) as f64 * ratio);
            (a.floor() as usize..(b.ceil() as usize).min(side))
                .map(|s| (s, (b.min(s as f64 + 1.0) - a.max(s as f64)).max(0.0)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let area = ratio * ratio;
    let mut out = vec![0.0; n * n];
    for (r, wr) in weights.iter().enumerate() {
        for (c, wc) in weights.iter().enumerate() {
            let mut acc = 0.0;
            for &(sr, w1) in wr {
                for &(sc, w2) in wc {
                    acc += w1 * w2 * src[sr * side + sc];
                }
            }
            out[r * n + c] = acc / area;
        }
    }
    out
}

/// Crop and subsample one PGM to `n x n`, intensities in [0, 1].
pub fn ingest_one(path: &Path, img: &Gray8, n: usize) -> Result<Vec<f64>> {
    if img.width < 2 * n || img.height < 2 * n {
        return Err(Error::Ingestion {
            path: path.into(),
            reason: format!("{}x{} is smaller than the required {}x{}", img.width, img.height, 2 * n, 2 * n),
        });
    }
    let (oy, ox, side) = center_square(img.height, img.width);
    let crop: Vec<f64> = (0..side * side)
        .map(|i| img.data[(oy + i / side) * img.width + ox + i % side] as f64 / 255.0)
        .collect();
    Ok(box_downsample(&crop, side, n))
}

pub fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Ingestion { path: dir.into(), reason: e.to_string() })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Ingestion { path: dir.into(), reason: "no .pgm files".into() });
    }
    Ok(files)
}

pub fn read_all(dir: &Path, n: usize) -> Result<Vec<(String, Vec<f64>)>> {
    pgm_files(dir)?
        .into_iter()
        .map(|p| {
            let img = pgm::read(&p)?;
            let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, ingest_one(&p, &img, n)?))
        })
        .collect()
}
