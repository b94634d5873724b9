use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fold, Category, CorpusError, Language, Result};

/// One raw row from a keyword list, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordRow {
    pub keyword: Option<String>,
    pub language: Option<String>,
    pub translation: Option<String>,
    pub category: Option<String>,
    pub stem: Option<String>,
    /// `|`-separated alternative spellings.
    pub variants: Option<String>,
}

impl KeywordRow {
    pub fn new(keyword: &str, language: &str, category: &str) -> Self {
        Self {
            keyword: Some(keyword.into()),
            language: Some(language.into()),
            category: Some(category.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub keyword: String,
    pub language: Language,
    pub translation: Option<String>,
    pub category: Category,
    pub stem: Option<String>,
    pub variants: Vec<String>,
}

impl KeywordEntry {
    fn to_row(&self) -> KeywordRow {
        KeywordRow {
            keyword: Some(self.keyword.clone()),
            language: Some(self.language.to_string()),
            translation: self.translation.clone(),
            category: Some(self.category.to_string()),
            stem: self.stem.clone(),
            variants: (!self.variants.is_empty()).then(|| self.variants.join("|")),
        }
    }

    fn add_variant(&mut self, v: &str) {
        let v = fold(v);
        if !v.is_empty() && v != self.keyword && !self.variants.contains(&v) {
            self.variants.push(v);
        }
    }
}

/// Entries unique by `(keyword, language)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordCorpus {
    entries: Vec<KeywordEntry>,
}

impl KeywordCorpus {
    pub fn entries(&self) -> &[KeywordEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Finds the entry whose keyword or spelling variant matches `word`
    /// (case-insensitive). Luganda entries are preferred when a word exists in
    /// both languages.
    pub fn lookup(&self, word: &str) -> Option<&KeywordEntry> {
        let w = fold(word);
        let mut hits = self
            .entries
            .iter()
            .filter(|e| e.keyword == w || e.variants.contains(&w));
        let first = hits.next()?;
        Some(
            std::iter::once(first)
                .chain(hits)
                .find(|e| e.language == Language::Luganda)
                .unwrap_or(first),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    pub fn to_rows(&self) -> Vec<KeywordRow> {
        self.entries.iter().map(KeywordEntry::to_row).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryConflict {
    pub keyword: String,
    pub language: Language,
    pub kept: Category,
    pub discarded: Category,
    pub source: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub source: usize,
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub corpus: KeywordCorpus,
    pub conflicts: Vec<CategoryConflict>,
    pub rejected: Vec<RowIssue>,
}

fn non_empty(s: &Option<String>) -> Option<String> {
    s.as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

/// Merges keyword lists into one corpus.
///
/// Rows are deduplicated case-insensitively on `(keyword, language)`; the
/// first source in list order wins category disagreements, and each
/// disagreement is reported. A row whose stem equals the stem of an existing
/// entry in the same language is treated as a spelling variant of that entry.
/// Invalid rows are skipped and reported.
pub fn aggregate_keywords(sources: &[Vec<KeywordRow>]) -> Result<Aggregation> {
    if sources.is_empty() {
        return Err(CorpusError::Argument("no keyword sources given".into()));
    }
    let mut entries: Vec<KeywordEntry> = Vec::new();
    let mut by_word: HashMap<(String, Language), usize> = HashMap::new();
    let mut by_stem: HashMap<(String, Language), usize> = HashMap::new();
    let mut conflicts = Vec::new();
    let mut rejected = Vec::new();

    for (si, source) in sources.iter().enumerate() {
        for (ri, row) in source.iter().enumerate() {
            let reject = |reason: String| RowIssue {
                source: si,
                row: ri,
                reason,
            };
            let Some(keyword) = non_empty(&row.keyword).map(|k| fold(&k)) else {
                rejected.push(reject("missing keyword".into()));
                continue;
            };
            let language = match non_empty(&row.language).map(|l| l.parse::<Language>()) {
                Some(Ok(l)) => l,
                Some(Err(e)) => {
                    rejected.push(reject(e));
                    continue;
                }
                None => {
                    rejected.push(reject("missing language".into()));
                    continue;
                }
            };
            let category = match non_empty(&row.category).map(|c| c.parse::<Category>()) {
                Some(Ok(c)) => c,
                Some(Err(e)) => {
                    rejected.push(reject(e));
                    continue;
                }
                None => Category::General,
            };
            let stem = non_empty(&row.stem).map(|s| fold(&s));
            let variants: Vec<String> = non_empty(&row.variants)
                .map(|v| v.split('|').map(fold).filter(|v| !v.is_empty()).collect())
                .unwrap_or_default();

            let existing = by_word
                .get(&(keyword.clone(), language))
                .or_else(|| stem.as_ref().and_then(|s| by_stem.get(&(s.clone(), language))))
                .copied();

            match existing {
                Some(idx) => {
                    let entry = &mut entries[idx];
                    if entry.category != category {
                        conflicts.push(CategoryConflict {
                            keyword: entry.keyword.clone(),
                            language,
                            kept: entry.category,
                            discarded: category,
                            source: si,
                            row: ri,
                        });
                    }
                    if entry.translation.is_none() {
                        entry.translation = non_empty(&row.translation);
                    }
                    if let (None, Some(s)) = (&entry.stem, &stem) {
                        if let std::collections::hash_map::Entry::Vacant(slot) = by_stem.entry((s.clone(), language)) {
                            entry.stem = Some(s.clone());
                            slot.insert(idx);
                        }
                    }
                    for v in std::iter::once(&keyword).chain(&variants) {
                        claim_variant(&mut entries[idx], idx, v, &mut by_word);
                    }
                }
                None => {
                    let idx = entries.len();
                    let mut entry = KeywordEntry {
                        keyword: keyword.clone(),
                        language,
                        translation: non_empty(&row.translation),
                        category,
                        stem: stem.clone(),
                        variants: Vec::new(),
                    };
                    by_word.insert((keyword.clone(), language), idx);
                    for v in &variants {
                        claim_variant(&mut entry, idx, v, &mut by_word);
                    }
                    if let Some(s) = stem {
                        by_stem.entry((s, language)).or_insert(idx);
                    }
                    entries.push(entry);
                }
            }
        }
    }
    Ok(Aggregation {
        corpus: KeywordCorpus { entries },
        conflicts,
        rejected,
    })
}

// A spelling already owned by another entry of the same language stays with
// that entry.
fn claim_variant(entry: &mut KeywordEntry, idx: usize, word: &str, by_word: &mut HashMap<(String, Language), usize>) {
    let w = fold(word);
    match by_word.get(&(w.clone(), entry.language)) {
        Some(&owner) if owner != idx => {}
        _ => {
            entry.add_variant(&w);
            by_word.insert((w, entry.language), idx);
        }
    }
}

const CORPUS_HEADER: [&str; 6] = ["keyword", "language", "translation", "category", "stem", "variants"];

/// Reads a keyword CSV (`keyword,language,translation,category,stem,variants`)
/// into raw rows. Missing trailing columns are allowed.
pub fn read_keyword_rows(path: &Path) -> Result<Vec<KeywordRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CorpusError::io(path, io),
            other => CorpusError::csv(path, format!("{other:?}")),
        })?;
    let headers = rdr.headers().map_err(|e| CorpusError::csv(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let cols: Vec<Option<usize>> = CORPUS_HEADER.iter().map(|h| col(h)).collect();
    if cols[0].is_none() || cols[1].is_none() {
        return Err(CorpusError::csv(path, "header must include `keyword` and `language`"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CorpusError::csv(path, e))?;
        let get = |i: usize| cols[i].and_then(|c| rec.get(c)).map(str::to_string);
        rows.push(KeywordRow {
            keyword: get(0),
            language: get(1),
            translation: get(2),
            category: get(3),
            stem: get(4),
            variants: get(5),
        });
    }
    Ok(rows)
}

/// Reads one or more keyword CSVs and aggregates them, in argument order.
pub fn read_corpus_csv(paths: &[&Path]) -> Result<Aggregation> {
    let sources = paths.iter().map(|p| read_keyword_rows(p)).collect::<Result<Vec<_>>>()?;
    aggregate_keywords(&sources)
}

pub fn write_corpus_csv(path: &Path, corpus: &KeywordCorpus) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CORPUS_HEADER).map_err(|e| CorpusError::csv(path, e))?;
    for r in corpus.to_rows() {
        let field = |v: &Option<String>| v.clone().unwrap_or_default();
        w.write_record([
            field(&r.keyword),
            field(&r.language),
            field(&r.translation),
            field(&r.category),
            field(&r.stem),
            field(&r.variants),
        ])
        .map_err(|e| CorpusError::csv(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CorpusError::csv(path, e))?;
    crate::fsutil::write_atomic(path, &bytes).map_err(|e| CorpusError::io(path, e))
}
