//! Checkpoint layout: `KWS1` magic, u16 LE version, u32 LE header length, a
//! JSON header, then every parameter tensor as raw f32 LE in layer order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ModelError, ModelGraph, Result};
use crate::corpus::LabelMap;
use crate::fsutil::write_atomic;
use crate::nn::{Layer, LayerSpec, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"KWS1";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingMetadata {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelGraph<f32>,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    frame_len: usize,
    label_map: LabelMap,
    layers: Vec<LayerSpec>,
    param_count: usize,
    metadata: TrainingMetadata,
}

fn corrupt(offset: usize, msg: impl Into<String>) -> ModelError {
    ModelError::CorruptCheckpoint {
        offset,
        msg: msg.into(),
    }
}

pub fn encode_checkpoint(model: &ModelGraph<f32>, metadata: &TrainingMetadata) -> Vec<u8> {
    let header = Header {
        architecture: model.architecture,
        frame_len: model.frame_len,
        label_map: model.label_map.clone(),
        layers: model.specs(),
        param_count: model.param_count(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(10 + json.len() + 4 * header.param_count);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(truncated(self.bytes.len(), what)),
        }
    }
}

fn truncated(offset: usize, what: &str) -> ModelError {
    corrupt(offset, format!("truncated while reading {what}"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(corrupt(0, "bad magic"));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::IncompatibleCheckpoint(format!(
            "format version {version}, this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = u32::from_le_bytes(r.take(4, "header length")?.try_into().unwrap()) as usize;
    let header_at = r.pos;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| corrupt(header_at, format!("invalid header: {e}")))?;
    let expected: usize = header.layers.iter().map(LayerSpec::param_count).sum();
    if expected != header.param_count {
        return Err(corrupt(header_at, "parameter count disagrees with layer specs"));
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    for spec in header.layers {
        let mut params = Vec::new();
        for shape in spec.param_shapes() {
            let n: usize = shape.iter().product();
            let raw = r.take(4 * n, spec.name())?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.push(Tensor::new(&shape, data)?);
        }
        layers.push(Layer::with_params(spec, params)?);
    }
    if r.pos != bytes.len() {
        return Err(corrupt(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let model = ModelGraph::new(header.architecture, header.frame_len, header.label_map, layers)?;
    Ok(Checkpoint {
        model,
        metadata: header.metadata,
    })
}

pub fn save_checkpoint(path: &Path, model: &ModelGraph<f32>, metadata: &TrainingMetadata) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model, metadata)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}
