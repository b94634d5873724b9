//! Synthetic keyword dataset: class `k` is a tone burst at `300 + 150·k` Hz.
//!
//! Each utterance is one frame with a 0.5 s raised-cosine-edged burst placed
//! at the frame centre, shifted by a uniform onset jitter of ±50 ms, with
//! amplitude `0.5 · (1 ± 20%)`, a random phase, and white Gaussian noise at
//! the configured SNR (relative to the burst RMS at nominal amplitude).

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    aggregate_keywords, manifest::manifest_csv_bytes, CorpusError, KeywordCorpus, KeywordRow, LabelMap, Language,
    Result, UtteranceRecord,
};
use crate::audio::{encode_wav, AudioClip, SampleFormat, PIPELINE_RATE};

/// Label of the optional noise-only class.
pub const BACKGROUND_KEYWORD: &str = "_background_";

const BASE_HZ: f64 = 300.0;
const STEP_HZ: f64 = 150.0;
const NOMINAL_AMPLITUDE: f64 = 0.5;
const AMPLITUDE_JITTER: f64 = 0.2;
const ONSET_JITTER_S: f64 = 0.05;
const BURST_S: f64 = 0.5;
const RAMP_S: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub frame_len: usize,
    /// Signal-to-noise ratio in dB; `None` means no noise at all.
    pub snr_db: Option<f64>,
    /// Number of distinct synthetic speaker ids, assigned round-robin.
    pub speakers: usize,
    /// Adds a noise-only class labelled [`BACKGROUND_KEYWORD`].
    pub background: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            per_class: 100,
            frame_len: crate::audio::DEFAULT_FRAME_LEN,
            snr_db: Some(20.0),
            speakers: 10,
            background: false,
        }
    }
}

impl SynthSpec {
    pub fn tone_hz(class: usize) -> f64 {
        BASE_HZ + STEP_HZ * class as f64
    }

    pub fn keyword(class: usize) -> String {
        format!("tone{class:02}")
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(CorpusError::Argument("need at least 2 classes".into()));
        }
        if self.per_class == 0 {
            return Err(CorpusError::Argument("need at least 1 utterance per class".into()));
        }
        if self.speakers == 0 {
            return Err(CorpusError::Argument("need at least 1 speaker".into()));
        }
        let top = Self::tone_hz(self.classes - 1);
        if top >= PIPELINE_RATE as f64 / 2.0 {
            return Err(CorpusError::Argument(format!(
                "{} classes put the top tone at {top} Hz, at or above the {} Hz Nyquist limit",
                self.classes,
                PIPELINE_RATE / 2
            )));
        }
        let burst = (BURST_S * PIPELINE_RATE as f64) as usize;
        if self.frame_len < burst + 2 * (ONSET_JITTER_S * PIPELINE_RATE as f64) as usize {
            return Err(CorpusError::Argument(format!(
                "frame length {} too short for a burst",
                self.frame_len
            )));
        }
        Ok(())
    }

    fn noise_sigma(&self) -> f64 {
        match self.snr_db {
            Some(db) => NOMINAL_AMPLITUDE / 2f64.sqrt() / 10f64.powf(db / 20.0),
            None => 0.0,
        }
    }

    /// Keywords in label order (background last when enabled).
    pub fn keywords(&self) -> Vec<String> {
        let mut k: Vec<String> = (0..self.classes).map(Self::keyword).collect();
        if self.background {
            k.push(BACKGROUND_KEYWORD.to_string());
        }
        k
    }

    pub fn corpus(&self) -> KeywordCorpus {
        let rows = self
            .keywords()
            .iter()
            .map(|k| KeywordRow::new(k, "english", "general"))
            .collect();
        aggregate_keywords(&[rows]).expect("synthetic rows are valid").corpus
    }

    pub fn label_map(&self) -> LabelMap {
        LabelMap::new(self.keywords()).expect("synthetic keywords are distinct")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub samples: Vec<f64>,
    pub label: usize,
    pub speaker_id: String,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct SynthSet {
    pub label_map: LabelMap,
    pub corpus: KeywordCorpus,
    pub clips: Vec<SynthClip>,
}

impl SynthSet {
    pub fn records(&self) -> Vec<UtteranceRecord> {
        self.clips
            .iter()
            .map(|c| {
                let kw = self.label_map.keyword(c.label).expect("label in map");
                UtteranceRecord {
                    path: format!("{kw}/{}_{}.wav", c.speaker_id, c.index),
                    keyword: kw.to_string(),
                    speaker_id: c.speaker_id.clone(),
                    language: Language::English,
                    split: None,
                }
            })
            .collect()
    }
}

/// Adds one burst of `class` into `out`, centred then jittered.
fn add_burst(out: &mut [f64], class: usize, rng: &mut ChaCha8Rng) {
    let rate = PIPELINE_RATE as f64;
    let burst = (BURST_S * rate) as usize;
    let ramp = (RAMP_S * rate) as usize;
    let jitter_max = (ONSET_JITTER_S * rate) as i64;
    let jitter = rng.gen_range(-jitter_max..=jitter_max);
    let amp = NOMINAL_AMPLITUDE * (1.0 + rng.gen_range(-AMPLITUDE_JITTER..=AMPLITUDE_JITTER));
    let phase = rng.gen_range(0.0..2.0 * PI);
    let omega = 2.0 * PI * SynthSpec::tone_hz(class) / rate;
    let onset = ((out.len() - burst) / 2) as i64 + jitter;
    for i in 0..burst {
        let Some(slot) = out.get_mut((onset + i as i64) as usize) else {
            continue;
        };
        let edge = i.min(burst - 1 - i);
        let env = if edge < ramp {
            0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        *slot += amp * env * (omega * i as f64 + phase).sin();
    }
}

fn add_noise(out: &mut [f64], sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        for s in out.iter_mut() {
            *s += normal.sample(rng);
        }
    }
}

/// Generates the dataset in memory. Class-major order; deterministic in `seed`.
pub fn synth_clips(spec: &SynthSpec, seed: u64) -> Result<SynthSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = spec.noise_sigma();
    let n_labels = spec.classes + spec.background as usize;
    let mut clips = Vec::with_capacity(n_labels * spec.per_class);
    for label in 0..n_labels {
        for index in 0..spec.per_class {
            let mut samples = vec![0.0; spec.frame_len];
            if label < spec.classes {
                add_burst(&mut samples, label, &mut rng);
            }
            add_noise(&mut samples, sigma, &mut rng);
            clips.push(SynthClip {
                samples,
                label,
                speaker_id: format!("spk{:02}", index % spec.speakers),
                index,
            });
        }
    }
    Ok(SynthSet {
        label_map: spec.label_map(),
        corpus: spec.corpus(),
        clips,
    })
}

/// Writes the dataset as 16-bit WAVs under `out_dir/<keyword>/<speaker>_<n>.wav`
/// plus `out_dir/manifest.csv`, and returns the manifest rows.
pub fn synth_dataset(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<Vec<UtteranceRecord>> {
    let set = synth_clips(spec, seed)?;
    let records = set.records();
    for (clip, rec) in set.clips.iter().zip(&records) {
        let path = out_dir.join(&rec.path);
        let bytes = encode_wav(&clip.samples, PIPELINE_RATE, SampleFormat::Pcm16);
        crate::fsutil::write_atomic(&path, &bytes).map_err(|e| CorpusError::io(&path, e))?;
    }
    let manifest = out_dir.join(super::manifest::SIDECAR_NAME);
    crate::fsutil::write_atomic(&manifest, &manifest_csv_bytes(&records)).map_err(|e| CorpusError::io(&manifest, e))?;
    Ok(records)
}

/// A planted utterance: the frame starting at `start_s` carries a burst of `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedUtterance {
    pub label: usize,
    pub keyword: String,
    pub start_s: f64,
}

/// Long recording of background noise (same noise level as the dataset) with
/// one synthetic utterance frame added at each `(class, start_s)`.
pub fn synth_stream(
    spec: &SynthSpec,
    duration_s: f64,
    plants: &[(usize, f64)],
    seed: u64,
) -> Result<(AudioClip, Vec<PlantedUtterance>)> {
    spec.validate()?;
    let rate = PIPELINE_RATE as f64;
    let len = (duration_s * rate).round() as usize;
    if len == 0 {
        return Err(CorpusError::Argument("stream duration must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0.0; len];
    add_noise(&mut samples, spec.noise_sigma(), &mut rng);
    let mut truth = Vec::with_capacity(plants.len());
    for &(class, start_s) in plants {
        if class >= spec.classes {
            return Err(CorpusError::Argument(format!("planted class {class} out of range")));
        }
        let start = (start_s * rate).round() as usize;
        if start + spec.frame_len > len {
            return Err(CorpusError::Argument(format!("plant at {start_s} s runs past the end")));
        }
        add_burst(&mut samples[start..start + spec.frame_len], class, &mut rng);
        truth.push(PlantedUtterance {
            label: class,
            keyword: SynthSpec::keyword(class),
            start_s,
        });
    }
    let clip = AudioClip::new(samples, PIPELINE_RATE).map_err(CorpusError::from)?;
    Ok((clip, truth))
}
