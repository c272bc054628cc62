//! Hashed TF-IDF features and externally computed dense embeddings.
//!
//! Tokens are hashed with seeded xxh3: the low bits pick the bucket, the top
//! bit picks a ±1 sign so that colliding terms tend to cancel instead of
//! piling up. Document frequencies are kept per bucket.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

pub const DEFAULT_DIMENSION: usize = 1 << 18;
pub const DEFAULT_HASH_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    TfIdf,
    /// Raw term counts; the IDF table is ignored.
    TermCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub dimension: usize,
    pub hash_seed: u64,
    pub weighting: Weighting,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dimension: DEFAULT_DIMENSION,
            hash_seed: DEFAULT_HASH_SEED,
            weighting: Weighting::TfIdf,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 || !self.dimension.is_power_of_two() || self.dimension > 1 << 31 {
            return Err(Error::InvalidDimension(self.dimension));
        }
        Ok(())
    }

    /// Bucket index and sign for one token.
    pub fn bucket(&self, token: &str) -> (u32, f64) {
        let h = xxh3_64_with_seed(token.as_bytes(), self.hash_seed);
        let index = (h & (self.dimension as u64 - 1)) as u32;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        (index, sign)
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dimension: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn zeros(dimension: usize) -> Self {
        FeatureVector {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from arbitrary `(index, value)` pairs; duplicates are summed.
    pub fn from_entries(dimension: usize, entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (index, value) in entries {
            if index as usize >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: index as usize + 1,
                });
            }
            *acc.entry(index).or_insert(0.0) += value;
        }
        Ok(FeatureVector {
            dimension,
            entries: acc.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Unit-L2 copy; the zero vector stays zero.
    pub fn normalized(&self) -> FeatureVector {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        FeatureVector {
            dimension: self.dimension,
            entries: self.entries.iter().map(|&(i, v)| (i, v / norm)).collect(),
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i as usize]).sum()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Per-bucket document frequencies, fitted once on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    config: FeatureConfig,
    document_count: usize,
    document_frequency: BTreeMap<u32, usize>,
}

impl IdfTable {
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>], config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut document_frequency: BTreeMap<u32, usize> = BTreeMap::new();
        for doc in corpus {
            let buckets: BTreeSet<u32> = doc.iter().map(|t| config.bucket(t.as_ref()).0).collect();
            for b in buckets {
                *document_frequency.entry(b).or_insert(0) += 1;
            }
        }
        Ok(IdfTable {
            config,
            document_count: corpus.len(),
            document_frequency,
        })
    }

    /// Rebuilds a table from stored counts, checking every df ≤ N.
    pub fn from_parts(
        config: FeatureConfig,
        document_count: usize,
        document_frequency: BTreeMap<u32, usize>,
    ) -> Result<Self> {
        config.validate()?;
        if document_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        if let Some((&bucket, &df)) = document_frequency
            .iter()
            .find(|(&b, &df)| df > document_count || df == 0 || b as usize >= config.dimension)
        {
            return Err(Error::InvalidModelFile {
                line: 0,
                message: format!("bucket {bucket} has invalid document frequency {df}"),
            });
        }
        Ok(IdfTable {
            config,
            document_count,
            document_frequency,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn document_frequencies(&self) -> &BTreeMap<u32, usize> {
        &self.document_frequency
    }

    pub fn df(&self, bucket: u32) -> usize {
        self.document_frequency.get(&bucket).copied().unwrap_or(0)
    }

    /// `ln((1 + N) / (1 + df)) + 1`; unseen buckets use df = 0.
    pub fn idf(&self, bucket: u32) -> f64 {
        let n = self.document_count as f64;
        ((1.0 + n) / (1.0 + self.df(bucket) as f64)).ln() + 1.0
    }

    /// Hashed, weighted, L2-normalized vector for one document.
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for token in tokens {
            let (bucket, sign) = self.config.bucket(token.as_ref());
            *counts.entry(bucket).or_insert(0.0) += sign;
        }
        let weighted = counts.into_iter().filter(|(_, v)| *v != 0.0).map(|(b, v)| match self.config.weighting {
            Weighting::TfIdf => (b, v * self.idf(b)),
            Weighting::TermCount => (b, v),
        });
        FeatureVector {
            dimension: self.config.dimension,
            entries: weighted.collect(),
        }
        .normalized()
    }
}

pub fn vectorize<S: AsRef<str>>(tokens: &[S], idf: &IdfTable) -> FeatureVector {
    idf.vectorize(tokens)
}

/// Dense vectors keyed by record id, as produced by an external encoder.
///
/// File format: first line `record_count dimension`, then one line per
/// record: the id followed by `dimension` whitespace-separated decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, record_id: &str) -> Option<&[f64]> {
        self.vectors.get(record_id).map(Vec::as_slice)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::InvalidEmbeddingTable { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (header_idx, header) = lines.next().ok_or_else(|| bad(1, "missing header".to_string()))?;
        let header_line = header_idx + 1;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(bad(header_line, "header must be `record_count dimension`".to_string()));
        }
        let count: usize = fields[0]
            .parse()
            .map_err(|_| bad(header_line, format!("bad record count `{}`", fields[0])))?;
        let dimension: usize = fields[1]
            .parse()
            .map_err(|_| bad(header_line, format!("bad dimension `{}`", fields[1])))?;
        if dimension == 0 {
            return Err(bad(header_line, "dimension must be positive".to_string()));
        }
        let mut vectors = HashMap::with_capacity(count);
        let mut last_line = header_line;
        for (idx, line) in lines {
            let line_no = idx + 1;
            last_line = line_no;
            let mut parts = line.split_whitespace();
            let id = parts.next().expect("non-blank line has a field").to_string();
            let values = parts
                .map(|v| v.parse::<f64>().map_err(|_| bad(line_no, format!("bad float `{v}`"))))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != dimension {
                return Err(bad(line_no, format!("expected {dimension} values, found {}", values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(bad(line_no, "non-finite value".to_string()));
            }
            if vectors.insert(id.clone(), values).is_some() {
                return Err(bad(line_no, format!("duplicate record id `{id}`")));
            }
        }
        if vectors.len() != count {
            return Err(bad(last_line, format!("header declares {count} records, found {}", vectors.len())));
        }
        Ok(EmbeddingTable { dimension, vectors })
    }
}

pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text)
}
