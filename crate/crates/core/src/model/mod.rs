//! Keyword-spotting architectures built from [`crate::nn`] layers, inference
//! and checkpoints.

mod arch;
mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::FixedClip;
use crate::corpus::LabelMap;
use crate::error::ErrorClass;
use crate::nn::{self, Cache, Layer, LayerSpec, Mode, NnError, Scalar, Tensor};

pub use arch::{build_dense_baseline, build_kws_cnn, ConvStage, DENSE_BASELINE_WIDTHS, KWS_CNN_HIDDEN, KWS_CNN_STAGES};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, TrainingMetadata,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("layer shapes do not compose: {0}")]
    ShapeCompose(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("corrupt checkpoint at byte offset {offset}: {msg}")]
    CorruptCheckpoint { offset: usize, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ModelError::Nn(e) => e.class(),
            ModelError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    KwsCnn,
    DenseBaseline,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::KwsCnn => "kws-cnn",
            Architecture::DenseBaseline => "dense-baseline",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kws-cnn" => Ok(Architecture::KwsCnn),
            "dense-baseline" | "dense" => Ok(Architecture::DenseBaseline),
            other => Err(format!(
                "unknown architecture `{other}` (expected kws-cnn or dense-baseline)"
            )),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-example output shape after each layer, starting from `input`
/// (`[channels, length]`).
pub fn compose_shapes(specs: &[LayerSpec], input: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shape = input.to_vec();
    let mut out = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        shape = spec
            .output_shape(&shape)
            .map_err(|e| ModelError::ShapeCompose(format!("layer {i} ({}): {e}", spec.name())))?;
        out.push(shape.clone());
    }
    Ok(out)
}

/// A layer sequence mapping a `(batch, 1, frame_len)` waveform batch to
/// `(batch, K)` logits. Softmax is applied outside the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph<T = f32> {
    pub architecture: Architecture,
    pub frame_len: usize,
    pub label_map: LabelMap,
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> ModelGraph<T> {
    /// Validates that the layers compose from `(1, frame_len)` to `K` logits.
    pub fn new(
        architecture: Architecture,
        frame_len: usize,
        label_map: LabelMap,
        layers: Vec<Layer<T>>,
    ) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec.clone()).collect();
        let shapes = compose_shapes(&specs, &[1, frame_len])?;
        match shapes.last().map(Vec::as_slice) {
            Some(&[k]) if k == label_map.len() => {}
            other => {
                return Err(ModelError::ShapeCompose(format!(
                    "final shape {other:?} does not match {} labels",
                    label_map.len()
                )))
            }
        }
        Ok(Self {
            architecture,
            frame_len,
            label_map,
            layers,
        })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        compose_shapes(&self.specs(), &[1, self.frame_len])
    }

    pub fn num_classes(&self) -> usize {
        self.label_map.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Layer count under this crate's convention: every conv, pooling and
    /// dense layer, plus the output softmax. Activations, dropout and flatten
    /// are not counted. The 1D-CNN counts 5 + 5 + 3 + 1 = 14.
    pub fn counted_layers(&self) -> usize {
        let weighted = self
            .layers
            .iter()
            .filter(|l| {
                matches!(
                    l.spec,
                    LayerSpec::Conv1d { .. } | LayerSpec::MaxPool1d { .. } | LayerSpec::Dense { .. }
                )
            })
            .count();
        weighted + 1
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.params.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut()).collect()
    }

    pub fn cast<U: Scalar>(&self) -> ModelGraph<U> {
        ModelGraph {
            architecture: self.architecture,
            frame_len: self.frame_len,
            label_map: self.label_map.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec.clone(),
                    params: l.params.iter().map(Tensor::cast).collect(),
                })
                .collect(),
        }
    }

    /// Packs frames into a `(batch, 1, frame_len)` tensor.
    pub fn batch_input(&self, frames: &[&[f64]]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(frames.len() * self.frame_len);
        for (i, f) in frames.iter().enumerate() {
            if f.len() != self.frame_len {
                return Err(NnError::Shape(format!(
                    "frame {i} has {} samples, model expects {}",
                    f.len(),
                    self.frame_len
                ))
                .into());
            }
            data.extend(f.iter().map(|&v| T::of(v)));
        }
        Ok(Tensor::new(&[frames.len(), 1, self.frame_len], data)?)
    }

    /// Forward pass returning logits and the per-layer caches for backward.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&x, mode, rng)?;
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Parameter gradients in [`ModelGraph::params`] order.
    pub fn backward(&self, caches: &[Cache<T>], grad_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        if caches.len() != self.layers.len() {
            return Err(NnError::Argument("cache count does not match layers".into()).into());
        }
        // no input gradient is needed at or below the first parameterised layer
        let first = self.layers.iter().position(|l| !l.params.is_empty()).unwrap_or(0);
        let mut per_layer: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        let mut grad = grad_logits.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            if i < first {
                break;
            }
            let (gin, gparams) = layer.backward(cache, &grad, i > first)?;
            per_layer.push(gparams);
            if let Some(g) = gin {
                grad = g;
            }
        }
        Ok(per_layer.into_iter().rev().flatten().collect())
    }

    /// Inference-mode logits for a batch of frames.
    pub fn logits(&self, frames: &[&[f64]]) -> Result<Tensor<T>> {
        let input = self.batch_input(frames)?;
        // inference never draws from the generator
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        Ok(self.forward(&input, Mode::Infer, &mut rng)?.0)
    }

    /// Class probabilities per frame, normalised in 64-bit.
    pub fn predict_batch(&self, frames: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.logits(frames)?.cast::<f64>();
        let probs = nn::softmax(&logits)?;
        Ok(probs.data().chunks(self.num_classes()).map(<[f64]>::to_vec).collect())
    }

    pub fn predict(&self, clip: &FixedClip) -> Result<Vec<f64>> {
        Ok(self.predict_batch(&[clip.samples()])?.remove(0))
    }
}

/// Index of the largest probability (earliest on ties).
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
