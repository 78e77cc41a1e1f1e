//! Binary 8-bit PGM (P5) reading and writing.

use std::fs;
use std::path::Path;

use crate::container::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn parse(bytes: &[u8]) -> std::result::Result<Gray8, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad header field '{s}'"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}, expected 8-bit"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let data = bytes
        .get(start..start + width * height)
        .ok_or_else(|| "raster truncated".to_string())?
        .to_vec();
    Ok(Gray8 { width, height, data })
}

pub fn read(path: &Path) -> Result<Gray8> {
    let bytes = fs::read(path).map_err(|e| Error::Ingestion { path: path.into(), reason: e.to_string() })?;
    parse(&bytes).map_err(|reason| Error::Ingestion { path: path.into(), reason })
}

pub fn encode(img: &Gray8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write(path: &Path, img: &Gray8) -> Result<()> {
    write_atomic(path, &encode(img))
}

/// Min-max scale real values to 0..=255; a flat input maps to mid-gray.
pub fn from_real(width: usize, height: usize, values: &[f64]) -> Gray8 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let data = values
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 128 })
        .collect();
    Gray8 { width, height, data }
}
