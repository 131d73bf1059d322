use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Split::Train),
            1 => Ok(Split::Test),
            other => Err(Error::Malformed(format!("split code {other}"))),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Malformed(format!("unknown split {other:?}"))),
        }
    }
}

/// One labeled, language-tagged embedding. `language` indexes the owning
/// store's language table; `label` is 0 (non-abusive) or 1 (abusive).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub language: u8,
    pub split: Split,
    pub label: u8,
    pub vector: Vec<f32>,
}

/// Fixed-dimension, immutable collection of embedding records.
#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    dim: usize,
    languages: Vec<String>,
    records: Vec<EmbeddingRecord>,
    prompts: BTreeMap<u8, String>,
    metadata: BTreeMap<String, String>,
    index: HashMap<String, usize>,
}

impl PartialEq for EmbeddingStore {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.languages == other.languages
            && self.prompts == other.prompts
            && self.metadata == other.metadata
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.id == b.id
                    && a.language == b.language
                    && a.split == b.split
                    && a.label == b.label
                    && a.vector.iter().map(|x| x.to_bits()).eq(b.vector.iter().map(|x| x.to_bits()))
            })
    }
}

impl EmbeddingStore {
    pub fn new(dim: usize, languages: Vec<String>, records: Vec<EmbeddingRecord>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("store dimension must be positive".into()));
        }
        if languages.len() > 256 {
            return Err(Error::Malformed(format!("{} languages exceeds 256", languages.len())));
        }
        for (i, l) in languages.iter().enumerate() {
            if languages[..i].contains(l) {
                return Err(Error::Malformed(format!("duplicate language {l:?}")));
            }
        }
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.vector.len(),
                });
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("record {:?}", r.id)));
            }
            if r.label > 1 {
                return Err(Error::Malformed(format!("record {:?} has label {}", r.id, r.label)));
            }
            if r.language as usize >= languages.len() {
                return Err(Error::Malformed(format!(
                    "record {:?} has language index {} outside the table",
                    r.id, r.language
                )));
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            dim,
            languages,
            records,
            prompts: BTreeMap::new(),
            metadata: BTreeMap::new(),
            index,
        })
    }

    pub fn with_prompts(mut self, prompts: BTreeMap<u8, String>) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub(crate) fn set_metadata(&mut self, metadata: BTreeMap<String, String>) {
        self.metadata = metadata;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn prompts(&self) -> &BTreeMap<u8, String> {
        &self.prompts
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn language_name(&self, record: &EmbeddingRecord) -> &str {
        &self.languages[record.language as usize]
    }

    pub fn language_index(&self, name: &str) -> Result<u8> {
        self.languages
            .iter()
            .position(|l| l == name)
            .map(|i| i as u8)
            .ok_or_else(|| Error::UnknownLanguage(name.to_string()))
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Applies `f` to every vector, producing a new store of dimension
    /// `new_dim` with ids, labels, languages and splits preserved.
    pub fn map_vectors<F>(&self, new_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f32]) -> Result<Vec<f32>>,
    {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(EmbeddingRecord {
                    vector: f(&r.vector)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(new_dim, self.languages.clone(), records)?;
        out.prompts = self.prompts.clone();
        out.metadata = self.metadata.clone();
        Ok(out)
    }

    /// True when `other` carries the same ids, labels, languages and splits
    /// in the same order.
    pub fn same_layout(&self, other: &EmbeddingStore) -> bool {
        self.languages == other.languages
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.id == b.id && a.language == b.language && a.split == b.split && a.label == b.label
            })
    }
}
