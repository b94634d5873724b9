//! Flat `key = value` pipeline configuration. `#` starts a comment line.
//! Command-line flags take precedence over file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;

use crate::UsageError;

/// Every key the configuration file may contain.
pub const KNOWN_KEYS: &[&str] = &[
    // paths
    "corpus",
    "manifest",
    "audio_dir",
    "checkpoint",
    "out",
    "decoder_cmd",
    // training
    "arch",
    "frame_len",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "patience",
    "precision",
    "split",
    "split_mode",
    "keywords",
    // detection
    "window_s",
    "hop_s",
    "threshold",
    "min_gap_s",
    "background_label",
    "jobs",
    // synthetic data
    "classes",
    "per_class",
    "snr_db",
    "speakers",
    "background",
    "seed",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    values: BTreeMap<String, String>,
    source: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(UsageError(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(UsageError(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { values, source: None })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text)?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        self.values.get(key).map(String::as_str)
    }

    /// Typed lookup; an unparsable value is a usage error naming the key.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| UsageError(format!("config key `{key}`: invalid value `{v}`: {e}")))
            })
            .transpose()
    }

    /// Flag value if given, else the config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Path values from the file are resolved against the file's directory.
    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| {
            let v = PathBuf::from(self.raw(key)?);
            Some(match (&self.source, v.is_relative()) {
                (Some(src), true) => src.parent().unwrap_or(Path::new(".")).join(v),
                _ => v,
            })
        })
    }

    pub fn require_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf, UsageError> {
        self.path(flag, key).ok_or_else(|| {
            UsageError(format!(
                "missing --{} (or `{key}` in the config file)",
                key.replace('_', "-")
            ))
        })
    }
}

/// Parses `a,b,c` into three ratios.
pub fn parse_ratios(s: &str) -> Result<[f64; 3], UsageError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || UsageError(format!("split `{s}` must be three comma-separated numbers"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(String::from)
        .collect()
}
