use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Architecture, ModelGraph, Result};
use crate::corpus::LabelMap;
use crate::nn::{Layer, LayerSpec, Scalar};

/// One convolution + ReLU + max-pool block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStage {
    pub kernel: usize,
    pub channels: usize,
    pub pool: usize,
}

/// Conv blocks of the 1D-CNN. With 8000-sample frames the feature map ends at
/// 128 channels × 4 positions.
pub const KWS_CNN_STAGES: [ConvStage; 5] = [
    ConvStage {
        kernel: 13,
        channels: 8,
        pool: 4,
    },
    ConvStage {
        kernel: 11,
        channels: 16,
        pool: 4,
    },
    ConvStage {
        kernel: 9,
        channels: 32,
        pool: 4,
    },
    ConvStage {
        kernel: 7,
        channels: 64,
        pool: 5,
    },
    ConvStage {
        kernel: 5,
        channels: 128,
        pool: 4,
    },
];

/// Hidden dense widths of the 1D-CNN head, each followed by dropout.
pub const KWS_CNN_HIDDEN: [usize; 2] = [256, 128];

pub const KWS_CNN_DROPOUT: f64 = 0.5;

/// Hidden widths of the dense baseline.
pub const DENSE_BASELINE_WIDTHS: [usize; 4] = [512, 256, 128, 64];

enum Init {
    He,
    Glorot,
}

fn init_layer<T: Scalar>(spec: LayerSpec, init: Init, rng: &mut ChaCha8Rng) -> Layer<T> {
    let (fan_in, fan_out) = match spec {
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel,
            ..
        } => (in_channels * kernel, out_channels * kernel),
        LayerSpec::Dense {
            in_features,
            out_features,
        } => (in_features, out_features),
        _ => return Layer::zeros(spec),
    };
    let mut layer = Layer::<T>::zeros(spec);
    let weights = layer.params[0].data_mut();
    match init {
        Init::He => {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            for w in weights.iter_mut() {
                *w = T::of(normal.sample(rng));
            }
        }
        Init::Glorot => {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in weights.iter_mut() {
                *w = T::of(rng.gen_range(-limit..limit));
            }
        }
    }
    layer
}

fn dense_spec(in_features: usize, out_features: usize) -> LayerSpec {
    LayerSpec::Dense {
        in_features,
        out_features,
    }
}

/// The 14-layer 1D-CNN: five conv/ReLU/pool blocks, flatten, two hidden dense
/// layers with ReLU and dropout 0.5, and a `K`-way output layer. He-normal
/// weights for ReLU layers, Glorot-uniform for the output, zero biases.
pub fn build_kws_cnn<T: Scalar>(frame_len: usize, label_map: &LabelMap, seed: u64) -> Result<ModelGraph<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::new();
    let mut channels = 1;
    for st in KWS_CNN_STAGES {
        specs.push(LayerSpec::Conv1d {
            in_channels: channels,
            out_channels: st.channels,
            kernel: st.kernel,
            stride: 1,
        });
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::MaxPool1d {
            width: st.pool,
            stride: st.pool,
        });
        channels = st.channels;
    }
    specs.push(LayerSpec::Flatten);
    // flatten width depends on the frame length
    let flat = match super::compose_shapes(&specs, &[1, frame_len])?
        .last()
        .map(Vec::as_slice)
    {
        Some(&[f]) => f,
        _ => unreachable!("flatten yields rank 1"),
    };
    let mut width = flat;
    for h in KWS_CNN_HIDDEN {
        specs.push(dense_spec(width, h));
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::Dropout { rate: KWS_CNN_DROPOUT });
        width = h;
    }
    specs.push(dense_spec(width, label_map.len()));
    let last = specs.len() - 1;
    let layers = specs
        .into_iter()
        .enumerate()
        .map(|(i, s)| init_layer(s, if i == last { Init::Glorot } else { Init::He }, &mut rng))
        .collect();
    ModelGraph::new(Architecture::KwsCnn, frame_len, label_map.clone(), layers)
}

/// The dense baseline: flatten, four ReLU dense layers (512-256-128-64), and
/// a `K`-way output layer.
pub fn build_dense_baseline<T: Scalar>(frame_len: usize, label_map: &LabelMap, seed: u64) -> Result<ModelGraph<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = vec![Layer::zeros(LayerSpec::Flatten)];
    let mut width = frame_len;
    for h in DENSE_BASELINE_WIDTHS {
        layers.push(init_layer(dense_spec(width, h), Init::He, &mut rng));
        layers.push(Layer::zeros(LayerSpec::Relu));
        width = h;
    }
    layers.push(init_layer(dense_spec(width, label_map.len()), Init::Glorot, &mut rng));
    ModelGraph::new(Architecture::DenseBaseline, frame_len, label_map.clone(), layers)
}
