use std::path::{Path, PathBuf};

use super::manifest::{is_wav, scan_layout, write_manifest_csv, SIDECAR_NAME};
use super::{read_manifest_csv, CorpusError, Exclusion, KeywordCorpus, ManifestScan, Result, UtteranceRecord};
use crate::audio::{decode_external, load_wav, resample, save_wav, AudioClip, SampleFormat, PIPELINE_RATE};

/// Subdirectory of the ingest output holding the canonical WAVs.
pub const INGEST_AUDIO_DIR: &str = "audio";

fn visible(path: &Path) -> bool {
    !path
        .file_name()
        .map(|n| n.to_string_lossy().starts_with('.'))
        .unwrap_or(true)
}

fn decode_any(path: &Path, decoder_cmd: Option<&str>, scratch: &Path) -> std::result::Result<AudioClip, String> {
    if is_wav(path) {
        return load_wav(path).map_err(|e| e.to_string());
    }
    let cmd = decoder_cmd.ok_or_else(|| "non-WAV input and no decoder command configured".to_string())?;
    let tmp = scratch.join("decoded.wav");
    let _ = std::fs::remove_file(&tmp);
    decode_external(cmd, path, &tmp).map_err(|e| e.to_string())?;
    load_wav(&tmp).map_err(|e| e.to_string())
}

/// Converts every utterance under `audio_dir` (the `<keyword>/<speaker>_<n>.*`
/// layout, or the rows of its `manifest.csv`) into a 16-bit WAV at the
/// pipeline rate under `out_dir/audio/`, and writes `out_dir/manifest.csv`.
///
/// Non-WAV files go through `decoder_cmd` first. Files that fail to decode,
/// and files whose keyword is not in the corpus, are skipped and listed in
/// the returned exclusions.
pub fn ingest_audio(
    audio_dir: &Path,
    corpus: &KeywordCorpus,
    out_dir: &Path,
    decoder_cmd: Option<&str>,
) -> Result<ManifestScan> {
    let sidecar = audio_dir.join(SIDECAR_NAME);
    let candidates = if sidecar.is_file() {
        read_manifest_csv(&sidecar)?
    } else {
        scan_layout(audio_dir, visible)?
    };
    let scratch = tempfile::tempdir().map_err(|e| CorpusError::io(out_dir, e))?;
    let mut records: Vec<UtteranceRecord> = Vec::new();
    let mut excluded = Vec::new();
    for rec in candidates {
        let Some(entry) = corpus.lookup(&rec.keyword) else {
            excluded.push(Exclusion {
                reason: format!("keyword `{}` not in corpus", rec.keyword),
                path: rec.path,
            });
            continue;
        };
        let source = audio_dir.join(&rec.path);
        let clip = match decode_any(&source, decoder_cmd, scratch.path()).and_then(|c| {
            if c.sample_rate() == PIPELINE_RATE {
                Ok(c)
            } else {
                resample(&c, PIPELINE_RATE).map_err(|e| e.to_string())
            }
        }) {
            Ok(c) => c,
            Err(reason) => {
                excluded.push(Exclusion { path: rec.path, reason });
                continue;
            }
        };
        let rel: PathBuf = Path::new(INGEST_AUDIO_DIR).join(Path::new(&rec.path).with_extension("wav"));
        save_wav(&out_dir.join(&rel), &clip, SampleFormat::Pcm16)?;
        records.push(UtteranceRecord {
            path: rel.to_string_lossy().replace('\\', "/"),
            keyword: entry.keyword.clone(),
            language: entry.language,
            ..rec
        });
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    excluded.sort_by(|a, b| a.path.cmp(&b.path));
    if records.is_empty() {
        return Err(CorpusError::EmptyManifest { excluded });
    }
    write_manifest_csv(&out_dir.join(SIDECAR_NAME), &records)?;
    Ok(ManifestScan { records, excluded })
}
