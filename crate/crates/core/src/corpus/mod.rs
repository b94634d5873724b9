//! Keyword corpus, utterance manifests, label maps, dataset splits and the
//! synthetic tone-burst dataset.

mod ingest;
mod keywords;
mod labels;
mod manifest;
mod split;
mod synth;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioError;
use crate::error::ErrorClass;

pub use ingest::{ingest_audio, INGEST_AUDIO_DIR};
pub use keywords::{
    aggregate_keywords, read_corpus_csv, read_keyword_rows, write_corpus_csv, Aggregation, CategoryConflict,
    KeywordCorpus, KeywordEntry, KeywordRow, RowIssue,
};
pub use labels::{make_label_map, LabelMap};
pub use manifest::{
    build_manifest, manifest_csv_bytes, read_manifest_csv, write_manifest_csv, Exclusion, ManifestScan, UtteranceRecord,
};
pub use split::{split_manifest, SplitMode};
pub use synth::{
    synth_clips, synth_dataset, synth_stream, PlantedUtterance, SynthClip, SynthSet, SynthSpec, BACKGROUND_KEYWORD,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("duplicate keyword `{0}`")]
    DuplicateKeyword(String),
    #[error("no usable audio files found ({} excluded)", excluded.len())]
    EmptyManifest { excluded: Vec<Exclusion> },
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("malformed CSV {path}: {msg}")]
    Csv { path: String, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

impl CorpusError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CorpusError::Argument(_) | CorpusError::UnknownKeyword(_) | CorpusError::DuplicateKeyword(_) => {
                ErrorClass::Argument
            }
            CorpusError::Io { .. } => ErrorClass::Io,
            CorpusError::Audio(e) => e.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, msg: impl fmt::Display) -> Self {
        CorpusError::Csv {
            path: path.display().to_string(),
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Luganda,
    English,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Crop,
    Disease,
    Fertilizer,
    Herbicide,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }
}

macro_rules! text_enum {
    ($ty:ty, $($variant:ident => $text:literal),+) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim().to_lowercase().as_str() {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!("`{other}` is not a valid {}", stringify!($ty).to_lowercase())),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

text_enum!(Language, Luganda => "luganda", English => "english");
text_enum!(Category, Crop => "crop", Disease => "disease", Fertilizer => "fertilizer", Herbicide => "herbicide", General => "general");
text_enum!(Split, Train => "train", Val => "val", Test => "test");

pub(crate) fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}
