//! Binary container shared by corpus, dataset and checkpoint files:
//!
//! ```text
//! magic: 4 bytes | version: u32 LE | json_len: u64 LE | json metadata | payload: f64 LE ...
//! ```
//!
//! Writes go to a temporary sibling file that is renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

pub fn encode(magic: &[u8; 4], meta: &Value, payload: &[&[f64]]) -> Vec<u8> {
    let json = meta.to_string();
    let total: usize = payload.iter().map(|p| p.len()).sum();
    let mut out = Vec::with_capacity(16 + json.len() + 8 * total);
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    for part in payload {
        for v in part.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(magic: &[u8; 4], bytes: &[u8]) -> Result<(Value, Vec<f64>)> {
    let what = String::from_utf8_lossy(magic).into_owned();
    if bytes.len() < 16 || &bytes[..4] != magic {
        return Err(Error::Format(format!("not a {what} file")));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("{what} version {version} is not supported")));
    }
    let json_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + json_len)
        .ok_or_else(|| Error::Format(format!("{what} metadata truncated")))?;
    let meta: Value = serde_json::from_slice(body)?;
    let rest = &bytes[16 + json_len..];
    if !rest.len().is_multiple_of(8) {
        return Err(Error::Format(format!("{what} payload is not a whole number of f64")));
    }
    let payload = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((meta, payload))
}

pub fn peek_magic(path: &Path) -> Result<[u8; 4]> {
    let bytes = fs::read(path)?;
    bytes
        .get(..4)
        .map(|m| m.try_into().unwrap())
        .ok_or_else(|| Error::Format(format!("{} is too short", path.display())))
}

/// Write-temp-then-rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn write(path: &Path, magic: &[u8; 4], meta: &Value, payload: &[&[f64]]) -> Result<()> {
    write_atomic(path, &encode(magic, meta, payload))
}

pub fn read(path: &Path, magic: &[u8; 4]) -> Result<(Value, Vec<f64>)> {
    decode(magic, &fs::read(path)?)
}

pub fn raw_f64(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}
