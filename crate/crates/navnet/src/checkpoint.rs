//! Model checkpoints: `NAVC`, version, JSON header length, JSON header, then
//! every tensor as little-endian `f32` in header order.

use std::fs;
use std::path::Path;

use navnet_core::model::Model;
use navnet_core::preprocess::{Normalization, LABELS};
use navnet_core::rnn::{NetworkConfig, NetworkParams};
use navnet_core::train::TrainReport;
use serde::{Deserialize, Serialize};

use crate::dataset::LeReader;
use crate::error::{NavError, Result};

const MAGIC: &[u8; 4] = b"NAVC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub normalization: Option<Normalization>,
    pub weights: [f32; LABELS],
    pub window: usize,
    #[serde(default)]
    pub stride: usize,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub history: Option<TrainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: NetworkConfig,
    tensors: Vec<TensorEntry>,
    meta: CheckpointMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub params: NetworkParams<f32>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn from_model(model: &Model, history: Option<TrainReport>, stride: usize) -> Checkpoint {
        Checkpoint {
            config: model.network.config,
            params: model.network.params.clone(),
            meta: CheckpointMeta {
                normalization: Some(model.normalization),
                weights: model.weights,
                window: model.window,
                stride,
                warm_start: history.as_ref().is_some_and(|h| h.warm_start),
                history,
            },
        }
    }

    pub fn into_model(self) -> Result<Model> {
        let norm = self
            .meta
            .normalization
            .ok_or_else(|| NavError::Config("checkpoint carries no normalization statistics".into()))?;
        Ok(Model::new(self.config, self.params, norm, self.meta.weights, self.meta.window)?)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.params.check_shapes(&ckpt.config)?;
    let header = Header {
        config: ckpt.config,
        tensors: NetworkParams::<f32>::layout(&ckpt.config)
            .into_iter()
            .map(|t| TensorEntry { name: t.name, shape: t.shape })
            .collect(),
        meta: ckpt.meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NavError::format(path, e.to_string()))?;
    let mut buf = Vec::with_capacity(12 + json.len() + 4 * ckpt.params.num_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for tensor in ckpt.params.slices() {
        for v in tensor {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| NavError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| NavError::io(path, e))?;
    let corrupt = |msg: &str| NavError::format(path, format!("corrupt checkpoint: {msg}"));
    let mut r = LeReader { bytes: &bytes, pos: 0 };
    if r.take(4) != Some(MAGIC) {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let len = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
    let json = r.take(len).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(&e.to_string()))?;
    if header.meta.normalization.is_none() {
        return Err(corrupt("missing normalization statistics"));
    }
    let layout = NetworkParams::<f32>::layout(&header.config);
    if layout.len() != header.tensors.len()
        || layout.iter().zip(&header.tensors).any(|(a, b)| a.name != b.name || a.shape != b.shape)
    {
        return Err(corrupt("tensor list does not match the network configuration"));
    }
    let mut tensors = Vec::with_capacity(layout.len());
    for info in &layout {
        tensors.push(r.f32s(info.len()).ok_or_else(|| corrupt("truncated tensor data"))?);
    }
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    let params = NetworkParams::from_tensors(&header.config, tensors)?;
    Ok(Checkpoint { config: header.config, params, meta: header.meta })
}
