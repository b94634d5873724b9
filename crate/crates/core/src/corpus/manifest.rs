use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, KeywordCorpus, Language, Result, Split};

/// One labelled recording. `path` is relative to the manifest's directory
/// (or absolute).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub path: String,
    pub keyword: String,
    pub speaker_id: String,
    pub language: Language,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestScan {
    pub records: Vec<UtteranceRecord>,
    pub excluded: Vec<Exclusion>,
}

/// Sidecar manifest that takes precedence over the directory layout.
pub const SIDECAR_NAME: &str = "manifest.csv";

/// Scans `<audio_dir>/<keyword>/<speaker>_<n>.wav`, or reads
/// `<audio_dir>/manifest.csv` when present. Records are sorted by path; files
/// whose keyword is not in the corpus are excluded and reported.
pub fn build_manifest(audio_dir: &Path, corpus: &KeywordCorpus) -> Result<ManifestScan> {
    let sidecar = audio_dir.join(SIDECAR_NAME);
    let (candidates, mut excluded) = if sidecar.is_file() {
        (read_manifest_csv(&sidecar)?, Vec::new())
    } else {
        (scan_layout(audio_dir, is_wav)?, Vec::new())
    };

    let mut records = Vec::new();
    for mut rec in candidates {
        match corpus.lookup(&rec.keyword) {
            Some(entry) => {
                rec.keyword = entry.keyword.clone();
                rec.language = entry.language;
                records.push(rec);
            }
            None => excluded.push(Exclusion {
                reason: format!("keyword `{}` not in corpus", rec.keyword),
                path: rec.path,
            }),
        }
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    excluded.sort_by(|a, b| a.path.cmp(&b.path));
    if records.is_empty() {
        return Err(CorpusError::EmptyManifest { excluded });
    }
    Ok(ManifestScan { records, excluded })
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::fs::DirEntry>> {
    let mut v = std::fs::read_dir(dir)
        .map_err(|e| CorpusError::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| CorpusError::io(dir, e))?;
    v.sort_by_key(|e| e.file_name());
    Ok(v)
}

pub(crate) fn is_wav(path: &Path) -> bool {
    path.extension().map(|e| e.eq_ignore_ascii_case("wav")).unwrap_or(false)
}

/// Lists `<audio_dir>/<keyword>/<speaker>_<n>.<ext>` files accepted by `accept`,
/// in lexicographic order.
pub(crate) fn scan_layout(audio_dir: &Path, accept: fn(&Path) -> bool) -> Result<Vec<UtteranceRecord>> {
    let mut records = Vec::new();
    for kw_dir in sorted_entries(audio_dir)? {
        if !kw_dir
            .file_type()
            .map_err(|e| CorpusError::io(&kw_dir.path(), e))?
            .is_dir()
        {
            continue;
        }
        let keyword = kw_dir.file_name().to_string_lossy().into_owned();
        for file in sorted_entries(&kw_dir.path())? {
            let path = file.path();
            if !accept(&path) || !path.is_file() {
                continue;
            }
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let speaker = stem.rsplit_once('_').map(|(s, _)| s.to_string()).unwrap_or(stem);
            records.push(UtteranceRecord {
                path: format!("{keyword}/{}", file.file_name().to_string_lossy()),
                keyword: keyword.clone(),
                speaker_id: speaker,
                // resolved against the corpus by the caller
                language: Language::Luganda,
                split: None,
            });
        }
    }
    Ok(records)
}

const MANIFEST_HEADER: [&str; 5] = ["path", "keyword", "speaker_id", "language", "split"];

pub fn read_manifest_csv(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::io(path, io),
        other => CorpusError::csv(path, format!("{other:?}")),
    })?;
    let headers = rdr.headers().map_err(|e| CorpusError::csv(path, e))?;
    if headers.iter().map(str::trim).ne(MANIFEST_HEADER) {
        return Err(CorpusError::csv(
            path,
            format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CorpusError::csv(path, e))?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("").trim();
        let bad = |what: String| CorpusError::csv(path, format!("line {line}: {what}"));
        if field(0).is_empty() || field(1).is_empty() {
            return Err(bad("empty path or keyword".into()));
        }
        let language = field(3).parse::<Language>().map_err(bad)?;
        let split = match field(4) {
            "" => None,
            s => Some(s.parse::<Split>().map_err(bad)?),
        };
        out.push(UtteranceRecord {
            path: field(0).to_string(),
            keyword: field(1).to_string(),
            speaker_id: field(2).to_string(),
            language,
            split,
        });
    }
    Ok(out)
}

pub fn manifest_csv_bytes(records: &[UtteranceRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.path.as_str(),
            r.keyword.as_str(),
            r.speaker_id.as_str(),
            r.language.as_str(),
            r.split.map(|s| s.as_str()).unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn write_manifest_csv(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    crate::fsutil::write_atomic(path, &manifest_csv_bytes(records)).map_err(|e| CorpusError::io(path, e))
}
