//! Versioned, checksummed parameter files.
//!
//! Layout: `MUSECKPT`, format version (u32 LE), header length (u64 LE), a
//! JSON header, the little-endian `f32` payload, then a SHA-256 digest of
//! everything before it.

use std::fs;
use std::path::Path;

use muse_autodiff::Tensor;
use ndarray::IxDyn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Muse, MuseModel};
use crate::nn::ParamStore;

pub const MAGIC: &[u8; 8] = b"MUSECKPT";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub step: usize,
    pub epoch: usize,
    /// Seed and stream position of the training RNG.
    pub rng_seed: [u8; 32],
    pub rng_word_pos: u128,
    pub params: ParamStore<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    train: Option<TrainConfig>,
    step: usize,
    epoch: usize,
    rng_seed: [u8; 32],
    rng_word_pos: String,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn from_model(model: &MuseModel<f32>) -> Self {
        Self {
            model: model.muse.cfg.clone(),
            train: None,
            step: 0,
            epoch: 0,
            rng_seed: [0; 32],
            rng_word_pos: 0,
            params: model.params.clone(),
        }
    }

    /// Rebuilds the model layout and installs the stored parameters.
    pub fn to_model(&self) -> Result<MuseModel<f32>> {
        let (muse, mut params) = Muse::build::<f32>(&self.model, 0)?;
        if params.len() != self.params.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} tensors stored, model expects {}",
                self.params.len(),
                params.len()
            )));
        }
        for (_, name, value) in self.params.iter() {
            let id = params
                .id(name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("unknown tensor {name}")))?;
            params
                .set(id, value.clone())
                .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        }
        Ok(MuseModel { muse, params })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::with_capacity(self.params.num_scalars() * 4);
        let mut tensors = Vec::with_capacity(self.params.len());
        for (_, name, t) in self.params.iter() {
            tensors.push(TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset: payload.len() / 4,
            });
            for &v in t.as_standard_layout().iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = serde_json::to_vec(&Header {
            model: self.model.clone(),
            train: self.train.clone(),
            step: self.step,
            epoch: self.epoch,
            rng_seed: self.rng_seed,
            rng_word_pos: self.rng_word_pos.to_string(),
            dtype: "f32".into(),
            tensors,
        })?;
        let mut out = Vec::with_capacity(8 + 4 + 8 + header.len() + payload.len() + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < 20 + DIGEST_LEN {
            return Err(corrupt("file is truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch (truncated or modified file)"));
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let header_end = 20usize
            .checked_add(header_len)
            .filter(|&e| e <= body.len())
            .ok_or_else(|| corrupt("header length out of range"))?;
        let header: Header = serde_json::from_slice(&body[20..header_end])
            .map_err(|e| Error::CorruptCheckpoint(format!("bad header: {e}")))?;
        if header.dtype != "f32" {
            return Err(Error::CorruptCheckpoint(format!("unsupported dtype {}", header.dtype)));
        }
        let payload = &body[header_end..];
        let mut params = ParamStore::new();
        for t in &header.tensors {
            let n: usize = t.shape.iter().product();
            let start = t.offset * 4;
            let end = start + n * 4;
            if end > payload.len() {
                return Err(corrupt("payload shorter than the tensor index"));
            }
            let values: Vec<f32> = payload[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.add(t.name.clone(), Tensor::from_shape_vec(IxDyn(&t.shape), values).unwrap());
        }
        Ok(Self {
            model: header.model,
            train: header.train,
            step: header.step,
            epoch: header.epoch,
            rng_seed: header.rng_seed,
            rng_word_pos: header
                .rng_word_pos
                .parse()
                .map_err(|_| corrupt("bad RNG position"))?,
            params,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
