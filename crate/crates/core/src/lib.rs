//! Keyword spotting on raw 8 kHz waveforms.
//!
//! The crate is organised as a pipeline:
//!
//! - [`audio`]: WAV decoding, band-limited resampling, peak normalisation and
//!   fixed-length framing.
//! - [`corpus`]: keyword corpus, utterance manifests, dataset splits and a
//!   synthetic tone-burst dataset used for desk-scale experiments.
//! - [`nn`]: a small layer engine (conv1d, max-pool, dense, ReLU, dropout,
//!   softmax cross-entropy, Adam) with finite-difference gradient checking.
//! - [`model`]: the 1D-CNN keyword spotter, the dense baseline and checkpoints.
//! - [`training`]: mini-batch training with early stopping, and evaluation.
//! - [`detector`]: sliding-window spotting over long recordings and
//!   per-keyword frequency reports.

pub mod audio;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod fsutil;
pub mod model;
pub mod nn;
pub mod training;

pub use audio::{AudioClip, FixedClip, PIPELINE_RATE};
pub use corpus::{KeywordCorpus, KeywordEntry, LabelMap, UtteranceRecord};
pub use detector::{DetectionEvent, FrequencyReport, SpotConfig};
pub use error::ErrorClass;
pub use model::{Architecture, ModelGraph};
pub use nn::{Scalar, Tensor};
pub use training::{EvalReport, TrainConfig, TrainHistory};
