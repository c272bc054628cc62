//! Dataset-pair similarity: content (embedding centroids), hate-word overlap
//! and survey-based definition similarity, plus upper-triangular matrices of
//! any of the three.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, DatasetId};
use crate::error::{Error, Result};
use crate::features::{tokenize, EmbeddingTable, FeatureConfig, IdfTable};
use crate::lexicon::{extract_hate_words, Lexicon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Content,
    HateWord,
    Definition,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Content => "content",
            Measure::HateWord => "hate_word",
            Measure::Definition => "definition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub pair: (DatasetId, DatasetId),
    pub measure: Measure,
    /// `None` where the measure is undefined (definition cells of datasets
    /// without a codebook, and the definition diagonal).
    pub value: Option<f64>,
}

/// Source of record vectors for content similarity.
#[derive(Debug, Clone, Copy)]
pub enum Embedder<'a> {
    /// Hashed TF-IDF with the IDF fitted on the two datasets being compared.
    Hashed(FeatureConfig),
    /// Precomputed dense vectors keyed by record id.
    Table(&'a EmbeddingTable),
}

enum Centroid {
    Sparse(BTreeMap<u32, f64>),
    Dense(Vec<f64>),
}

impl Centroid {
    fn norm(&self) -> f64 {
        match self {
            Centroid::Sparse(m) => m.values().map(|v| v * v).sum::<f64>().sqrt(),
            Centroid::Dense(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    fn dot(&self, other: &Centroid) -> f64 {
        match (self, other) {
            (Centroid::Sparse(a), Centroid::Sparse(b)) => {
                let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
                // iterate in index order so the sum does not depend on argument order
                let mut terms: Vec<(u32, f64)> = small
                    .iter()
                    .filter_map(|(k, v)| large.get(k).map(|w| (*k, v * w)))
                    .collect();
                terms.sort_by_key(|(k, _)| *k);
                terms.into_iter().map(|(_, p)| p).sum()
            }
            (Centroid::Dense(a), Centroid::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => unreachable!("centroids come from the same embedder"),
        }
    }
}

fn cosine(a: &Centroid, b: &Centroid) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0)
}

fn hashed_centroid(dataset: &Dataset, idf: &IdfTable) -> Result<Centroid> {
    let mut sum: BTreeMap<u32, f64> = BTreeMap::new();
    for record in &dataset.records {
        let v = idf.vectorize(&tokenize(&record.clean_text));
        for &(i, x) in v.entries() {
            *sum.entry(i).or_insert(0.0) += x;
        }
    }
    let n = dataset.records.len() as f64;
    sum.values_mut().for_each(|v| *v /= n);
    sum.retain(|_, v| *v != 0.0);
    if sum.is_empty() {
        return Err(Error::ZeroCentroid(dataset.id().to_string()));
    }
    Ok(Centroid::Sparse(sum))
}

fn table_centroid(dataset: &Dataset, table: &EmbeddingTable) -> Result<Centroid> {
    let mut sum = vec![0.0; table.dimension()];
    for record in &dataset.records {
        let v = table
            .get(&record.record_id)
            .ok_or_else(|| Error::MissingEmbedding(record.record_id.clone()))?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x / norm);
        }
    }
    let n = dataset.records.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    if sum.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroCentroid(dataset.id().to_string()));
    }
    Ok(Centroid::Dense(sum))
}

fn ensure_nonempty(d: &Dataset) -> Result<()> {
    if d.is_empty() {
        Err(Error::EmptyDataset(d.id().to_string()))
    } else {
        Ok(())
    }
}

fn fit_pair_idf(a: &Dataset, b: &Dataset, config: FeatureConfig) -> Result<IdfTable> {
    let docs: Vec<Vec<String>> = a
        .records
        .iter()
        .chain(&b.records)
        .map(|r| tokenize(&r.clean_text))
        .collect();
    IdfTable::fit(&docs, config)
}

/// Cosine between the mean unit-normalized record vectors of two datasets.
pub fn content_similarity(a: &Dataset, b: &Dataset, embedder: Embedder<'_>) -> Result<f64> {
    ensure_nonempty(a)?;
    ensure_nonempty(b)?;
    let (ca, cb) = match embedder {
        Embedder::Hashed(config) => {
            let idf = fit_pair_idf(a, b, config)?;
            (hashed_centroid(a, &idf)?, hashed_centroid(b, &idf)?)
        }
        Embedder::Table(table) => (table_centroid(a, table)?, table_centroid(b, table)?),
    };
    Ok(cosine(&ca, &cb))
}

/// How the shared-term count is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// |A ∩ B| / |A ∪ B|
    #[default]
    Union,
    /// |A ∩ B| / (|A| + |B|)
    Sum,
}

/// Overlap ratio of two term sets; 0 when both are empty.
pub fn overlap_ratio(a: &BTreeSet<String>, b: &BTreeSet<String>, mode: OverlapMode) -> f64 {
    let shared = a.intersection(b).count();
    let total = match mode {
        OverlapMode::Union => a.len() + b.len() - shared,
        OverlapMode::Sum => a.len() + b.len(),
    };
    if total == 0 {
        log::warn!("both hate-word sets are empty; similarity defined as 0");
        return 0.0;
    }
    shared as f64 / total as f64
}

pub fn hate_word_similarity(a: &Dataset, b: &Dataset, lexicon: &Lexicon, mode: OverlapMode) -> Result<f64> {
    if a.meta.language != b.meta.language {
        return Err(Error::LanguageMismatch {
            expected: a.meta.language.to_string(),
            found: b.meta.language.to_string(),
        });
    }
    let ha = extract_hate_words(a, lexicon)?;
    let hb = extract_hate_words(b, lexicon)?;
    Ok(overlap_ratio(&ha, &hb, mode))
}

/// One respondent's 1–10 rating of how similar two codebook definitions are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyVote {
    pub respondent_id: String,
    pub pair: (DatasetId, DatasetId),
    pub rating: u8,
    pub response_seconds: f64,
}

impl SurveyVote {
    pub fn new(
        respondent_id: impl Into<String>,
        pair: (DatasetId, DatasetId),
        rating: i64,
        response_seconds: f64,
    ) -> Result<Self> {
        if !(1..=10).contains(&rating) {
            return Err(Error::InvalidRating(rating));
        }
        if !(response_seconds.is_finite() && response_seconds >= 0.0) {
            return Err(Error::InvalidSpec(format!("response time {response_seconds} must be a nonnegative number")));
        }
        Ok(SurveyVote {
            respondent_id: respondent_id.into(),
            pair,
            rating: rating as u8,
            response_seconds,
        })
    }

    /// Whether the vote concerns the unordered pair {a, b}.
    pub fn is_for(&self, a: &DatasetId, b: &DatasetId) -> bool {
        (&self.pair.0 == a && &self.pair.1 == b) || (&self.pair.0 == b && &self.pair.1 == a)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VoteRow {
    respondent_id: String,
    dataset_a: String,
    dataset_b: String,
    rating: i64,
    response_seconds: f64,
}

/// Reads `respondent_id,dataset_a,dataset_b,rating,response_seconds` rows.
pub fn parse_votes(bytes: &[u8], source: &Path) -> Result<Vec<SurveyVote>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut votes = Vec::new();
    for row in reader.deserialize::<VoteRow>() {
        let malformed = |line: u64, message: String| Error::MalformedRow {
            path: source.to_path_buf(),
            line,
            message,
        };
        let row = row.map_err(|e| malformed(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = votes.len() as u64 + 2;
        let pair = (
            DatasetId::new(&row.dataset_a).map_err(|e| malformed(line, e.to_string()))?,
            DatasetId::new(&row.dataset_b).map_err(|e| malformed(line, e.to_string()))?,
        );
        let vote = SurveyVote::new(row.respondent_id, pair, row.rating, row.response_seconds)
            .map_err(|e| malformed(line, e.to_string()))?;
        votes.push(vote);
    }
    Ok(votes)
}

pub fn load_votes(path: &Path) -> Result<Vec<SurveyVote>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_votes(&bytes, path)
}

/// Votes whose response time is at least `min_response_seconds`.
pub fn surviving_votes(votes: &[SurveyVote], min_response_seconds: f64) -> Vec<&SurveyVote> {
    votes
        .iter()
        .filter(|v| v.response_seconds >= min_response_seconds)
        .collect()
}

/// `(n - 1) / 9` where `n` is the mean surviving rating.
pub fn definition_similarity(votes: &[SurveyVote], min_response_seconds: f64) -> Result<f64> {
    let kept = surviving_votes(votes, min_response_seconds);
    if kept.is_empty() {
        return Err(Error::NoSurvivingVotes);
    }
    let total: u64 = kept.iter().map(|v| u64::from(v.rating)).sum();
    let mean = total as f64 / kept.len() as f64;
    Ok((mean - 1.0) / 9.0)
}

/// Extra inputs each measure needs.
#[derive(Debug, Clone, Copy)]
pub enum MeasureInputs<'a> {
    Content(Embedder<'a>),
    HateWord {
        lexicon: &'a Lexicon,
        mode: OverlapMode,
    },
    Definition {
        votes: &'a [SurveyVote],
        min_response_seconds: f64,
    },
}

impl MeasureInputs<'_> {
    pub fn measure(&self) -> Measure {
        match self {
            MeasureInputs::Content(_) => Measure::Content,
            MeasureInputs::HateWord { .. } => Measure::HateWord,
            MeasureInputs::Definition { .. } => Measure::Definition,
        }
    }
}

/// Upper triangle (diagonal included) of pairwise scores, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub measure: Measure,
    pub ids: Vec<DatasetId>,
    pub scores: Vec<SimilarityScore>,
}

impl SimilarityMatrix {
    /// Score for cells `i`, `j` in either order.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = self.ids.len();
        // rows 0..i hold k, k-1, ... cells
        let row_start = i * k - i * i.saturating_sub(1) / 2;
        self.scores[row_start + (j - i)].value
    }
}

pub fn similarity_matrix(datasets: &[&Dataset], inputs: MeasureInputs<'_>) -> Result<SimilarityMatrix> {
    if datasets.len() < 2 {
        return Err(Error::TooFewDatasets(datasets.len()));
    }
    let mut seen = BTreeSet::new();
    for d in datasets {
        if !seen.insert(d.id()) {
            return Err(Error::DuplicateDataset(d.id().to_string()));
        }
    }
    let k = datasets.len();
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let measure = inputs.measure();

    let values: Vec<Option<f64>> = match inputs {
        MeasureInputs::Content(embedder) => {
            datasets.iter().try_for_each(|d| ensure_nonempty(d))?;
            let table_centroids = match embedder {
                Embedder::Table(table) => Some(
                    datasets
                        .par_iter()
                        .map(|d| table_centroid(d, table))
                        .collect::<Result<Vec<_>>>()?,
                ),
                Embedder::Hashed(_) => None,
            };
            cells
                .par_iter()
                .map(|&(i, j)| {
                    if i == j {
                        return Ok(Some(1.0));
                    }
                    let value = match (&table_centroids, embedder) {
                        (Some(c), _) => cosine(&c[i], &c[j]),
                        (None, e) => content_similarity(datasets[i], datasets[j], e)?,
                    };
                    Ok(Some(value))
                })
                .collect::<Result<_>>()?
        }
        MeasureInputs::HateWord { lexicon, mode } => {
            let sets: Vec<BTreeSet<String>> = datasets
                .par_iter()
                .map(|d| extract_hate_words(d, lexicon))
                .collect::<Result<_>>()?;
            cells
                .iter()
                .map(|&(i, j)| Some(if i == j { 1.0 } else { overlap_ratio(&sets[i], &sets[j], mode) }))
                .collect()
        }
        MeasureInputs::Definition {
            votes,
            min_response_seconds,
        } => cells
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (datasets[i], datasets[j]);
                if i == j || a.meta.codebook_text.is_none() || b.meta.codebook_text.is_none() {
                    return Ok(None);
                }
                let pair_votes: Vec<SurveyVote> =
                    votes.iter().filter(|v| v.is_for(a.id(), b.id())).cloned().collect();
                definition_similarity(&pair_votes, min_response_seconds).map(Some)
            })
            .collect::<Result<_>>()?,
    };

    let scores = cells
        .iter()
        .zip(values)
        .map(|(&(i, j), value)| SimilarityScore {
            pair: (datasets[i].id().clone(), datasets[j].id().clone()),
            measure,
            value,
        })
        .collect();
    Ok(SimilarityMatrix {
        measure,
        ids: datasets.iter().map(|d| d.id().clone()).collect(),
        scores,
    })
}
