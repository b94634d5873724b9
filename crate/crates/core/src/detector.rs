//! Sliding-window keyword detection over long recordings, debouncing and
//! per-recording frequency reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{normalize_amplitude, resample, AudioClip, AudioError, PIPELINE_RATE};
use crate::error::ErrorClass;
use crate::model::{argmax, ModelError, ModelGraph};
use crate::nn::Scalar;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("malformed events CSV {path}: {msg}")]
    Csv { path: String, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DetectError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DetectError::Argument(_) => ErrorClass::Argument,
            DetectError::Model(e) => e.class(),
            DetectError::Audio(e) => e.class(),
            DetectError::Csv { .. } => ErrorClass::Data,
            DetectError::Io { .. } => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, DetectError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpotConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub threshold: f64,
    pub min_gap_s: f64,
    /// Label that never produces events (a trained "no keyword" class).
    pub background_label: Option<String>,
}

impl Default for SpotConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            hop_s: 0.25,
            threshold: 0.7,
            min_gap_s: 0.5,
            background_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub keyword: String,
    /// Window start, in seconds from the start of the recording.
    #[serde(rename = "t")]
    pub start_time: f64,
    #[serde(rename = "conf")]
    pub confidence: f64,
    pub window_index: usize,
}

fn seconds_to_samples(s: f64) -> usize {
    (s * PIPELINE_RATE as f64).round() as usize
}

/// Number of window positions needed to cover `len` samples: windows start
/// every `hop` samples and the last one reaches the end of the clip.
pub fn window_count(len: usize, window: usize, hop: usize) -> usize {
    if len <= window {
        1
    } else {
        (len - window).div_ceil(hop) + 1
    }
}

/// Runs the classifier over every window of `clip` and emits an event when
/// the top class reaches `threshold`. Each window is peak-normalised like a
/// training frame; the tail window is zero-padded. Events come out in window
/// order. Clips not at the pipeline rate are resampled first.
pub fn spot<T: Scalar>(model: &ModelGraph<T>, clip: &AudioClip, config: &SpotConfig) -> Result<Vec<DetectionEvent>> {
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(DetectError::Argument(format!(
            "threshold {} not in (0, 1)",
            config.threshold
        )));
    }
    let window = seconds_to_samples(config.window_s);
    let hop = seconds_to_samples(config.hop_s);
    if window != model.frame_len {
        return Err(DetectError::Argument(format!(
            "window of {window} samples does not match the model frame of {}",
            model.frame_len
        )));
    }
    if !(config.hop_s > 0.0 && hop >= 1 && hop <= window) {
        return Err(DetectError::Argument(format!(
            "hop {} s must be in (0, window]",
            config.hop_s
        )));
    }
    let background =
        match &config.background_label {
            Some(b) => Some(model.label_map.index_of(b).ok_or_else(|| {
                DetectError::Argument(format!("background label `{b}` is not in the model's label map"))
            })?),
            None => None,
        };
    let clip = if clip.sample_rate() == PIPELINE_RATE {
        clip.clone()
    } else {
        resample(clip, PIPELINE_RATE)?
    };
    let samples = clip.samples();
    if samples.len() < hop {
        return Ok(Vec::new());
    }

    const BATCH: usize = 32;
    let n = window_count(samples.len(), window, hop);
    let mut events = Vec::new();
    let mut frames = Vec::with_capacity(BATCH);
    for start_idx in (0..n).step_by(BATCH) {
        frames.clear();
        for w in start_idx..(start_idx + BATCH).min(n) {
            let begin = w * hop;
            let end = (begin + window).min(samples.len());
            let mut frame = samples[begin..end].to_vec();
            frame.resize(window, 0.0);
            frames.push(normalize_amplitude(&AudioClip::new(frame, PIPELINE_RATE)?).into_samples());
        }
        let refs: Vec<&[f64]> = frames.iter().map(Vec::as_slice).collect();
        for (offset, p) in model.predict_batch(&refs)?.into_iter().enumerate() {
            let k = argmax(&p);
            if p[k] >= config.threshold && Some(k) != background {
                let w = start_idx + offset;
                events.push(DetectionEvent {
                    keyword: model.label_map.keyword(k).expect("argmax within map").to_string(),
                    start_time: (w * hop) as f64 / PIPELINE_RATE as f64,
                    confidence: p[k],
                    window_index: w,
                });
            }
        }
    }
    Ok(events)
}

/// Merges runs of same-keyword events whose consecutive start times are less
/// than `min_gap_s` apart. A merged event keeps the earliest start (and its
/// window index) and the highest confidence. Events of different keywords
/// never merge, even when interleaved.
pub fn debounce(events: &[DetectionEvent], min_gap_s: f64) -> Result<Vec<DetectionEvent>> {
    if min_gap_s.is_nan() || min_gap_s < 0.0 {
        return Err(DetectError::Argument(format!(
            "min_gap {min_gap_s} must be non-negative"
        )));
    }
    if events.windows(2).any(|w| w[1].start_time < w[0].start_time) {
        return Err(DetectError::Argument("events are not sorted by start time".into()));
    }
    let mut out: Vec<DetectionEvent> = Vec::new();
    // per keyword: (index in `out` of the open merged event, latest member start)
    let mut open: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for e in events {
        match open.get_mut(e.keyword.as_str()) {
            Some((i, last)) if e.start_time - *last < min_gap_s => {
                *last = e.start_time;
                let merged = &mut out[*i];
                if e.confidence > merged.confidence {
                    merged.confidence = e.confidence;
                }
            }
            _ => {
                open.insert(&e.keyword, (out.len(), e.start_time));
                out.push(e.clone());
            }
        }
    }
    Ok(out)
}

/// [`spot`] followed by [`debounce`] with the configured gap.
pub fn detect<T: Scalar>(model: &ModelGraph<T>, clip: &AudioClip, config: &SpotConfig) -> Result<Vec<DetectionEvent>> {
    debounce(&spot(model, clip, config)?, config.min_gap_s)
}

/// Per-recording keyword counts with the events behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub recording: String,
    pub counts: BTreeMap<String, usize>,
    pub events: Vec<DetectionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SpotConfig>,
}

impl FrequencyReport {
    pub fn events_for<'a>(&'a self, keyword: &'a str) -> impl Iterator<Item = &'a DetectionEvent> + 'a {
        self.events.iter().filter(move |e| e.keyword == keyword)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// `keyword,count`, keywords in lexicographic order.
    pub fn counts_csv(&self) -> String {
        let mut out = String::from("keyword,count\n");
        for (k, n) in &self.counts {
            out.push_str(&format!("{k},{n}\n"));
        }
        out
    }
}

/// Counts events per keyword. Keywords without events are absent.
pub fn frequency_report(recording: &str, events: &[DetectionEvent]) -> FrequencyReport {
    let mut counts = BTreeMap::new();
    for e in events {
        *counts.entry(e.keyword.clone()).or_insert(0) += 1;
    }
    FrequencyReport {
        recording: recording.to_string(),
        counts,
        events: events.to_vec(),
        config: None,
    }
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    keyword: String,
    start_s: f64,
    confidence: f64,
}

/// `keyword,start_s,confidence`, one row per event.
pub fn events_csv(events: &[DetectionEvent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in events {
        w.serialize(EventRow {
            keyword: e.keyword.clone(),
            start_s: e.start_time,
            confidence: e.confidence,
        })
        .expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8 CSV")
}

/// Reads an events CSV written by [`events_csv`]. Window indices are not
/// stored, so they are recovered as the row order.
pub fn read_events_csv(path: &Path) -> Result<Vec<DetectionEvent>> {
    let text = std::fs::read_to_string(path).map_err(|source| DetectError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<EventRow>().enumerate() {
        let row = row.map_err(|e| DetectError::Csv {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        if !(row.start_s >= 0.0 && (0.0..=1.0).contains(&row.confidence)) {
            return Err(DetectError::Csv {
                path: path.display().to_string(),
                msg: format!("row {}: start or confidence out of range", i + 1),
            });
        }
        out.push(DetectionEvent {
            keyword: row.keyword,
            start_time: row.start_s,
            confidence: row.confidence,
            window_index: i,
        });
    }
    Ok(out)
}
