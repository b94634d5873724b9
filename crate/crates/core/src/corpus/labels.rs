use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{fold, CorpusError, KeywordCorpus, Result};

/// Ordered target keywords; class index `i` is `keywords()[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelMap {
    keywords: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl LabelMap {
    /// Builds a map without consulting a corpus. Needs at least two distinct
    /// keywords.
    pub fn new(keywords: Vec<String>) -> Result<Self> {
        if keywords.len() < 2 {
            return Err(CorpusError::Argument(format!(
                "a label map needs at least 2 keywords, got {}",
                keywords.len()
            )));
        }
        let mut index = HashMap::with_capacity(keywords.len());
        for (i, k) in keywords.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(CorpusError::DuplicateKeyword(k.clone()));
            }
        }
        Ok(Self { keywords, index })
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn index_of(&self, keyword: &str) -> Option<usize> {
        self.index.get(keyword).copied()
    }

    pub fn keyword(&self, index: usize) -> Option<&str> {
        self.keywords.get(index).map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for LabelMap {
    type Error = CorpusError;

    fn try_from(v: Vec<String>) -> Result<Self> {
        LabelMap::new(v)
    }
}

impl From<LabelMap> for Vec<String> {
    fn from(m: LabelMap) -> Self {
        m.keywords
    }
}

/// Selects `K >= 2` target keywords from the corpus, in the given order.
/// Spelling variants resolve to their canonical keyword.
pub fn make_label_map(corpus: &KeywordCorpus, selected: &[&str]) -> Result<LabelMap> {
    let canonical = selected
        .iter()
        .map(|s| {
            corpus
                .lookup(s)
                .map(|e| e.keyword.clone())
                .ok_or_else(|| CorpusError::UnknownKeyword(fold(s)))
        })
        .collect::<Result<Vec<_>>>()?;
    LabelMap::new(canonical)
}
