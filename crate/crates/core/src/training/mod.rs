//! Mini-batch Adam training with early stopping, plus evaluation metrics.

mod early_stop;
mod metrics;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{load_wav, prepare_frame, AudioClip, AudioError};
use crate::corpus::{LabelMap, UtteranceRecord};
use crate::error::ErrorClass;
use crate::model::{argmax, ModelError, ModelGraph};
use crate::nn::{adam_step, softmax_cross_entropy, AdamConfig, AdamState, Mode, NnError, Scalar, Tensor};

pub use early_stop::{simulate_early_stopping, EarlyStopping, StopDecision};
pub use metrics::{ClassMetrics, EvalReport};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite {what} in epoch {epoch}")]
    NonFinite { epoch: usize, what: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot load {path}: {source}")]
    Audio {
        path: String,
        #[source]
        source: AudioError,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TrainError {
    pub fn class(&self) -> ErrorClass {
        match self {
            TrainError::Argument(_) => ErrorClass::Argument,
            TrainError::NonFinite { .. } => ErrorClass::Numeric,
            TrainError::Model(e) => e.class(),
            TrainError::Audio { source, .. } => source.class(),
            TrainError::Io { .. } => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::Argument(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch.checked_sub(1)?).map(|r| r.val_loss)
    }

    /// `epoch,train_loss,train_acc,val_loss,val_acc`, one row per epoch, with
    /// shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_csv().as_bytes()).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Fixed-length frames with integer labels, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    frame_len: usize,
    samples: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(frame_len: usize) -> Self {
        Self {
            frame_len,
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Adds a frame that is already preprocessed to `frame_len` samples.
    pub fn push(&mut self, frame: &[f64], label: usize) -> Result<()> {
        if frame.len() != self.frame_len {
            return Err(TrainError::Argument(format!(
                "frame has {} samples, expected {}",
                frame.len(),
                self.frame_len
            )));
        }
        if let Some(i) = frame.iter().position(|v| !v.is_finite()) {
            return Err(TrainError::Argument(format!("non-finite sample at index {i}")));
        }
        self.samples.extend_from_slice(frame);
        self.labels.push(label);
        Ok(())
    }

    /// Resamples, peak-normalises and pads/trims `clip`, then adds it.
    pub fn push_clip(&mut self, clip: &AudioClip, label: usize) -> Result<()> {
        let frame = prepare_frame(clip, self.frame_len).map_err(|source| TrainError::Audio {
            path: clip.source_id.clone().unwrap_or_default(),
            source,
        })?;
        self.push(frame.samples(), label)
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.samples[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.frame_len.max(1)).take(self.len())
    }

    fn batch<T: Scalar>(&self, idx: &[usize]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(idx.len() * self.frame_len);
        for &i in idx {
            data.extend(self.frame(i).iter().map(|&v| T::of(v)));
        }
        Tensor::new(&[idx.len(), 1, self.frame_len], data).map_err(|e| TrainError::Model(e.into()))
    }
}

/// Loads every record's audio (paths relative to `base_dir`) into a dataset
/// labelled by `label_map`.
pub fn load_dataset(
    records: &[UtteranceRecord],
    base_dir: &Path,
    label_map: &LabelMap,
    frame_len: usize,
) -> Result<Dataset> {
    let mut data = Dataset::new(frame_len);
    for rec in records {
        let label = label_map.index_of(&rec.keyword).ok_or_else(|| {
            TrainError::Argument(format!(
                "keyword `{}` of {} is not in the label map",
                rec.keyword, rec.path
            ))
        })?;
        let path = base_dir.join(&rec.path);
        let clip = load_wav(&path).map_err(|source| TrainError::Audio {
            path: path.display().to_string(),
            source,
        })?;
        data.push_clip(&clip, label)?;
    }
    Ok(data)
}

fn check_labels<T: Scalar>(model: &ModelGraph<T>, data: &Dataset) -> Result<()> {
    if data.frame_len() != model.frame_len {
        return Err(TrainError::Argument(format!(
            "dataset frames have {} samples, model expects {}",
            data.frame_len(),
            model.frame_len
        )));
    }
    if let Some(&l) = data.labels().iter().find(|&&l| l >= model.num_classes()) {
        return Err(TrainError::Argument(format!(
            "label {l} outside the {}-class map",
            model.num_classes()
        )));
    }
    Ok(())
}

fn numeric_in(epoch: usize) -> impl Fn(ModelError) -> TrainError {
    move |e| match e {
        ModelError::Nn(NnError::NonFinite(what)) => TrainError::NonFinite { epoch, what },
        other => TrainError::Model(other),
    }
}

const EVAL_BATCH: usize = 64;

/// Mean cross-entropy and accuracy in inference mode.
pub fn dataset_loss<T: Scalar>(model: &ModelGraph<T>, data: &Dataset) -> Result<(f64, f64)> {
    check_labels(model, data)?;
    if data.is_empty() {
        return Err(TrainError::Argument("empty dataset".into()));
    }
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let mut total = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let x = data.batch::<T>(chunk)?;
        let (logits, _) = model.forward(&x, Mode::Infer, &mut rng)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
        let (loss, _) = softmax_cross_entropy(&logits, &labels).map_err(ModelError::from)?;
        total += loss.as_f64() * chunk.len() as f64;
        correct += count_correct(&logits, &labels);
    }
    Ok((total / data.len() as f64, correct as f64 / data.len() as f64))
}

fn count_correct<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &l)| {
            let row: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            argmax(&row) == l
        })
        .count()
}

/// Trains `model` in place in the configured precision and returns the
/// per-epoch history. The parameters with the lowest validation loss are
/// restored before returning.
pub fn train(
    model: &mut ModelGraph<f32>,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    match config.precision {
        Precision::F32 => train_in(model, train_set, val_set, config),
        Precision::F64 => {
            let mut wide = model.cast::<f64>();
            let history = train_in(&mut wide, train_set, val_set, config)?;
            *model = wide.cast();
            Ok(history)
        }
    }
}

/// Precision-generic training loop behind [`train`].
pub fn train_in<T: Scalar>(
    model: &mut ModelGraph<T>,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::Argument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    check_labels(model, train_set)?;
    check_labels(model, val_set)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(config.adam(), model.params());
    let mut stopper = EarlyStopping::new(config.patience)?;
    let mut best: Vec<Tensor<T>> = model.params().into_iter().cloned().collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let fail = numeric_in(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let x = train_set.batch::<T>(chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set.labels()[i]).collect();
            let (logits, caches) = model.forward(&x, Mode::Train, &mut rng).map_err(&fail)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels).map_err(|e| fail(e.into()))?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    what: "training loss".into(),
                });
            }
            loss_sum += loss.as_f64() * chunk.len() as f64;
            correct += count_correct(&logits, &labels);
            let grads = model.backward(&caches, &grad).map_err(&fail)?;
            adam_step(&mut model.params_mut(), &grads, &mut adam).map_err(|e| fail(e.into()))?;
        }
        let (val_loss, val_acc) = dataset_loss(model, val_set).map_err(|e| match e {
            TrainError::Model(m) => fail(m),
            other => other,
        })?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                what: "validation loss".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
        };
        log::info!(
            "epoch {epoch}: train_loss {:.5} train_acc {:.4} val_loss {:.5} val_acc {:.4}",
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        epochs.push(record);
        let decision = stopper.update(val_loss)?;
        if stopper.improved() {
            best = model.params().into_iter().cloned().collect();
        }
        if decision == StopDecision::Stop {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    for (p, b) in model.params_mut().into_iter().zip(best) {
        *p = b;
    }
    Ok(TrainHistory {
        epochs,
        best_epoch: stopper.best_epoch(),
        stop_reason,
    })
}

/// Argmax predictions for every frame, in order.
pub fn predict_labels<T: Scalar>(model: &ModelGraph<T>, data: &Dataset) -> Result<Vec<usize>> {
    check_labels(model, data)?;
    let frames: Vec<&[f64]> = data.frames().collect();
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(EVAL_BATCH) {
        let logits = model.logits(chunk)?;
        let k = model.num_classes();
        out.extend(logits.data().chunks(k).map(|row| {
            let row: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            argmax(&row)
        }));
    }
    Ok(out)
}

/// Confusion matrix and accuracy/precision/recall/F1 on `data`.
pub fn evaluate<T: Scalar>(model: &ModelGraph<T>, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(TrainError::Argument("cannot evaluate an empty set".into()));
    }
    let predicted = predict_labels(model, data)?;
    EvalReport::from_predictions(model.label_map.keywords(), data.labels(), &predicted)
}
