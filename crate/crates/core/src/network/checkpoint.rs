//! Checkpoint file: `AMAP` container whose JSON header carries the network
//! shape and the provenance needed to reuse the model, followed by the ten
//! parameter arrays in [`TENSOR_NAMES`] order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{NetParams, CHANNELS, CONV_KERNEL, OUT_KERNEL, TENSOR_NAMES};
use crate::container;
use crate::datasets::TargetMode;
use crate::encoders::EncodingOperator;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AMAP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub sensor_scale: f64,
    /// Serialized encoding operator the network was trained against.
    pub encoding: Value,
    pub target_mode: TargetMode,
    pub train_seed: u64,
    pub phase_seed: Option<u64>,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetParams,
    pub meta: CheckpointMeta,
}

fn shapes(d_in: usize, n: usize) -> Vec<(&'static str, Vec<usize>)> {
    let p = n * n;
    let shapes = [
        vec![p, d_in],
        vec![p],
        vec![p, p],
        vec![p],
        vec![CHANNELS, 1, CONV_KERNEL, CONV_KERNEL],
        vec![CHANNELS],
        vec![CHANNELS, CHANNELS, CONV_KERNEL, CONV_KERNEL],
        vec![CHANNELS],
        vec![CHANNELS, OUT_KERNEL, OUT_KERNEL],
        vec![1],
    ];
    TENSOR_NAMES.iter().copied().zip(shapes).collect()
}

impl Checkpoint {
    pub fn encoding(&self) -> Result<EncodingOperator> {
        EncodingOperator::from_json_value(&self.meta.encoding)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let layers: serde_json::Map<String, Value> =
            shapes(p.d_in, p.n).into_iter().map(|(k, s)| (k.to_string(), json!(s))).collect();
        let meta = json!({
            "d_in": p.d_in,
            "n": p.n,
            "layers": layers,
            "sensor_scale": self.meta.sensor_scale,
            "encoding": self.meta.encoding,
            "target_mode": self.meta.target_mode,
            "seeds": { "train": self.meta.train_seed, "phase": self.meta.phase_seed },
            "epoch": self.meta.epoch,
        });
        let parts: Vec<&[f64]> = p.tensors().iter().map(|t| t.as_slice()).collect();
        container::encode(CHECKPOINT_MAGIC, &meta, &parts)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let (meta, payload) = container::decode(CHECKPOINT_MAGIC, bytes)?;
        let field = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::Format(format!("checkpoint lacks {k}")));
        let d_in: usize = serde_json::from_value(field("d_in")?)?;
        let n: usize = serde_json::from_value(field("n")?)?;
        if d_in == 0 || n < crate::numerics::MIN_SIDE {
            return Err(Error::Format(format!("checkpoint has d_in = {d_in}, n = {n}")));
        }
        let mut params = NetParams::zeros(d_in, n);
        if payload.len() != params.num_values() {
            return Err(Error::Format(format!(
                "checkpoint payload holds {} values, shape needs {}",
                payload.len(),
                params.num_values()
            )));
        }
        let mut offset = 0;
        for t in params.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&payload[offset..offset + len]);
            offset += len;
        }
        let seeds = field("seeds")?;
        Ok(Checkpoint {
            params,
            meta: CheckpointMeta {
                sensor_scale: serde_json::from_value(field("sensor_scale")?)?,
                encoding: field("encoding")?,
                target_mode: serde_json::from_value(field("target_mode")?)?,
                train_seed: serde_json::from_value(seeds["train"].clone())?,
                phase_seed: serde_json::from_value(seeds["phase"].clone())?,
                epoch: serde_json::from_value(field("epoch")?)?,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}
