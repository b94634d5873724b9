//! Audio ingest: WAV decoding, resampling to the pipeline rate, peak
//! normalisation and fixed-length framing.

mod resample;
mod wav;

use std::path::Path;
use std::process::Command;

use thiserror::Error;

use crate::error::ErrorClass;

pub use resample::{resample, ResamplerParams};
pub use wav::{decode_wav, encode_wav, SampleFormat};

/// Sample rate every clip is normalised to before it reaches a model.
pub const PIPELINE_RATE: u32 = 8000;

/// Default model frame: one second at the pipeline rate.
pub const DEFAULT_FRAME_LEN: usize = 8000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV at byte offset {offset}: {msg}")]
    Decode { offset: usize, msg: String },
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("external decoder failed for {path}: {msg}")]
    Decoder { path: String, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl AudioError {
    pub fn class(&self) -> ErrorClass {
        match self {
            AudioError::Argument(_) => ErrorClass::Argument,
            AudioError::Io { .. } | AudioError::Decoder { .. } => ErrorClass::Io,
            AudioError::NonFinite(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        AudioError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// A mono clip at an arbitrary sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    pub source_id: Option<String>,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::Argument("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: None,
        })
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Exactly `frame_len` samples at [`PIPELINE_RATE`]; the model input unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedClip {
    samples: Vec<f64>,
}

impl FixedClip {
    /// Wraps samples that are already at the pipeline rate.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        PIPELINE_RATE
    }
}

/// Scales the clip so its peak magnitude is exactly 1. All-zero clips pass
/// through unchanged.
pub fn normalize_amplitude(clip: &AudioClip) -> AudioClip {
    let peak = clip.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return clip.clone();
    }
    AudioClip {
        samples: clip.samples.iter().map(|s| s / peak).collect(),
        sample_rate: clip.sample_rate,
        source_id: clip.source_id.clone(),
    }
}

/// Centre-crops or symmetrically zero-pads to `n` samples. An odd padding
/// deficit puts the extra zero on the right.
pub fn fix_length(clip: &AudioClip, n: usize) -> Result<FixedClip> {
    if n == 0 {
        return Err(AudioError::Argument("frame length must be positive".into()));
    }
    if clip.sample_rate != PIPELINE_RATE {
        return Err(AudioError::Argument(format!(
            "fix_length expects {PIPELINE_RATE} Hz input, got {} Hz",
            clip.sample_rate
        )));
    }
    Ok(FixedClip {
        samples: fit_to(&clip.samples, n),
    })
}

pub(crate) fn fit_to(samples: &[f64], n: usize) -> Vec<f64> {
    let len = samples.len();
    if len >= n {
        let start = (len - n) / 2;
        samples[start..start + n].to_vec()
    } else {
        let left = (n - len) / 2;
        let mut out = vec![0.0; n];
        out[left..left + len].copy_from_slice(samples);
        out
    }
}

/// Full preprocessing chain for one utterance: resample to the pipeline
/// rate, peak-normalise, then fix the length.
pub fn prepare_frame(clip: &AudioClip, frame_len: usize) -> Result<FixedClip> {
    let at_rate = resample(clip, PIPELINE_RATE)?;
    fix_length(&normalize_amplitude(&at_rate), frame_len)
}

pub fn load_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| AudioError::io(path, e))?;
    Ok(decode_wav(&bytes)?.with_source(path.display().to_string()))
}

/// Writes the clip as WAV through a temp file and rename.
pub fn save_wav(path: &Path, clip: &AudioClip, format: SampleFormat) -> Result<()> {
    let bytes = encode_wav(clip.samples(), clip.sample_rate(), format);
    crate::fsutil::write_atomic(path, &bytes).map_err(|e| AudioError::io(path, e))
}

/// Runs `<cmd...> <input> <output>` to convert a non-WAV container (e.g. Ogg
/// Vorbis) into WAV. `cmd` is split on whitespace so leading arguments can be
/// supplied, e.g. `"ffmpeg -loglevel error -y -i"`.
pub fn decode_external(cmd: &str, input: &Path, output: &Path) -> Result<()> {
    let mut parts = cmd.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| AudioError::Argument("empty decoder command".into()))?;
    let status = Command::new(program)
        .args(parts)
        .arg(input)
        .arg(output)
        .output()
        .map_err(|e| AudioError::Decoder {
            path: input.display().to_string(),
            msg: format!("cannot run `{program}`: {e}"),
        })?;
    if !status.status.success() {
        let stderr = String::from_utf8_lossy(&status.stderr);
        return Err(AudioError::Decoder {
            path: input.display().to_string(),
            msg: format!("{} {}", status.status, stderr.trim()),
        });
    }
    if !output.exists() {
        return Err(AudioError::Decoder {
            path: input.display().to_string(),
            msg: "decoder produced no output".into(),
        });
    }
    Ok(())
}
