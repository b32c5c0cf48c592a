// SPDX-License-Identifier: Apache-2.0
//! Binary weight and checkpoint files.
//!
//! Layout, little-endian: `BDSQ`, u32 format version, u32 header length,
//! TOML header, u32 tensor count, then per tensor: u32 name length, name,
//! u32 rank, u32 dims, f32 payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig, ModelError};
use super::tape::ParamStore;
use super::tensor::{Scalar, Tensor};
use super::train::{Adam, TrainConfig, Trainer};

pub const MAGIC: &[u8; 4] = b"BDSQ";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightError {
    #[error("not a weight file of format version {FORMAT_VERSION} ({0})")]
    Version(String),
    #[error("truncated or malformed weight file: {0}")]
    Malformed(String),
    #[error("bad header: {0}")]
    Header(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adam_step: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epoch: Option<usize>,
    /// Caller-provided text, e.g. the run configuration.
    #[serde(default)]
    note: String,
}

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn encode<T: Scalar>(header: &Header, tensors: &[(String, &Tensor<T>)]) -> Vec<u8> {
    let text = toml::to_string(header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, text.len() as u32);
    out.extend_from_slice(text.as_bytes());
    put_u32(&mut out, tensors.len() as u32);
    for (name, t) in tensors {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            put_u32(&mut out, d as u32);
        }
        for x in t.data() {
            out.extend_from_slice(&x.to_f32().unwrap().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| WeightError::Malformed(format!("need {n} bytes at offset {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn decode<T: Scalar>(bytes: &[u8]) -> Result<(Header, Vec<(String, Tensor<T>)>), WeightError> {
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take(4).map_err(|_| WeightError::Version("file too short".into()))?;
    if magic != MAGIC {
        return Err(WeightError::Version("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(WeightError::Version(format!("found version {version}")));
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|e| WeightError::Header(e.to_string()))?;
    let header: Header = toml::from_str(text).map_err(|e| WeightError::Header(e.to_string()))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let nl = r.u32()? as usize;
        let name = String::from_utf8(r.take(nl)?.to_vec()).map_err(|e| WeightError::Malformed(e.to_string()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| WeightError::Malformed("tensor too large".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap())
            .collect();
        tensors.push((name, Tensor::new(shape, data)));
    }
    if r.at != bytes.len() {
        return Err(WeightError::Malformed("trailing bytes".into()));
    }
    Ok((header, tensors))
}

pub fn save_model<T: Scalar>(model: &Model<T>, note: &str) -> Vec<u8> {
    let header = Header {
        model: model.config,
        train: None,
        adam_step: None,
        epoch: None,
        note: note.to_string(),
    };
    let tensors: Vec<(String, &Tensor<T>)> = model.params.iter().map(|(n, t)| (n.to_string(), t)).collect();
    encode(&header, &tensors)
}

/// Returns the model and the note stored with it.
pub fn load_model<T: Scalar>(bytes: &[u8]) -> Result<(Model<T>, String), WeightError> {
    let (header, tensors) = decode::<T>(bytes)?;
    let mut params = ParamStore::default();
    for (name, t) in tensors {
        if !name.starts_with("adam.") {
            params.insert(&name, t);
        }
    }
    let model = Model::from_params(header.model, params)?;
    Ok((model, header.note))
}

/// Model plus optimizer moments, step and epoch.
pub fn save_checkpoint<T: Scalar>(trainer: &Trainer<T>, note: &str) -> Vec<u8> {
    let header = Header {
        model: trainer.model.config,
        train: Some(trainer.config),
        adam_step: Some(trainer.adam.step),
        epoch: Some(trainer.epoch),
        note: note.to_string(),
    };
    let mut tensors: Vec<(String, &Tensor<T>)> = trainer.model.params.iter().map(|(n, t)| (n.to_string(), t)).collect();
    for (i, name) in trainer.model.params.names().iter().enumerate() {
        tensors.push((format!("adam.m.{name}"), &trainer.adam.m[i]));
    }
    for (i, name) in trainer.model.params.names().iter().enumerate() {
        tensors.push((format!("adam.v.{name}"), &trainer.adam.v[i]));
    }
    encode(&header, &tensors)
}

pub fn load_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(Trainer<T>, String), WeightError> {
    let (header, tensors) = decode::<T>(bytes)?;
    let (Some(train), Some(step), Some(epoch)) = (header.train, header.adam_step, header.epoch) else {
        return Err(WeightError::Header("not a checkpoint".into()));
    };
    let mut params = ParamStore::default();
    let mut ms = ParamStore::default();
    let mut vs = ParamStore::default();
    for (name, t) in tensors {
        if let Some(n) = name.strip_prefix("adam.m.") {
            ms.insert(n, t);
        } else if let Some(n) = name.strip_prefix("adam.v.") {
            vs.insert(n, t);
        } else {
            params.insert(&name, t);
        }
    }
    let model = Model::from_params(header.model, params)?;
    let mut adam = Adam::new(train.adam, model.params.iter().map(|(_, t)| t.shape()));
    adam.step = step;
    for (i, name) in model.params.names().iter().enumerate() {
        for (store, slot) in [(&ms, &mut adam.m[i]), (&vs, &mut adam.v[i])] {
            let id = store
                .id(name)
                .ok_or_else(|| WeightError::Malformed(format!("missing optimizer state for {name}")))?;
            if store.by_id(id).shape() != slot.shape() {
                return Err(WeightError::Malformed(format!("optimizer state shape for {name}")));
            }
            *slot = store.by_id(id).clone();
        }
    }
    Ok((
        Trainer {
            model,
            adam,
            config: train,
            epoch,
        },
        header.note,
    ))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), WeightError> {
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, WeightError> {
    Ok(std::fs::read(path)?)
}
