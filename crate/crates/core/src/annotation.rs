//! Annotator sheets, majority-vote adjudication and Cohen's kappa.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Labels (and optionally marked hate words) from one annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSheet {
    pub annotator_id: String,
    labels: BTreeMap<String, Label>,
    hate_word_marks: BTreeMap<String, Vec<String>>,
}

impl AnnotationSheet {
    pub fn new(
        annotator_id: impl Into<String>,
        labels: BTreeMap<String, Label>,
        hate_word_marks: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let annotator_id = annotator_id.into();
        if let Some(record_id) = hate_word_marks.keys().find(|id| !labels.contains_key(*id)) {
            return Err(Error::MarksWithoutLabel {
                annotator: annotator_id,
                record_id: record_id.clone(),
            });
        }
        Ok(AnnotationSheet {
            annotator_id,
            labels,
            hate_word_marks,
        })
    }

    /// A sheet without hate-word marks.
    pub fn from_labels<I, S>(annotator_id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = (S, Label)>,
        S: Into<String>,
    {
        AnnotationSheet {
            annotator_id: annotator_id.into(),
            labels: labels.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            hate_word_marks: BTreeMap::new(),
        }
    }

    pub fn labels(&self) -> &BTreeMap<String, Label> {
        &self.labels
    }

    pub fn hate_word_marks(&self) -> &BTreeMap<String, Vec<String>> {
        &self.hate_word_marks
    }

    /// Reads a sheet file: header `record_id,label[,hate_words]`, hate words
    /// separated by `;`. The annotator id is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let annotator = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "annotator".to_string());
        Self::parse(annotator, &bytes, path)
    }

    pub fn parse(annotator_id: String, bytes: &[u8], source: &Path) -> Result<Self> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(Error::EmptyFile {
                path: source.to_path_buf(),
            });
        }
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
        let malformed = |line: u64, message: String| Error::MalformedRow {
            path: source.to_path_buf(),
            line,
            message,
        };
        let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let missing = |name: &str| Error::MissingColumn {
            path: source.to_path_buf(),
            column: name.to_string(),
        };
        let id_idx = col("record_id").ok_or_else(|| missing("record_id"))?;
        let label_idx = col("label").ok_or_else(|| missing("label"))?;
        let words_idx = col("hate_words");

        let mut labels = BTreeMap::new();
        let mut marks = BTreeMap::new();
        for result in reader.records() {
            let row = result.map_err(|e| malformed(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let record_id = row.get(id_idx).map(str::trim).unwrap_or("");
            if record_id.is_empty() {
                return Err(malformed(line, "empty record_id".to_string()));
            }
            let raw_label = row.get(label_idx).unwrap_or("");
            let label: Label = raw_label.parse().map_err(|msg: String| malformed(line, msg))?;
            if labels.insert(record_id.to_string(), label).is_some() {
                return Err(malformed(line, format!("duplicate record_id `{record_id}`")));
            }
            if let Some(cell) = words_idx.and_then(|i| row.get(i)) {
                let words: Vec<String> = cell
                    .split(';')
                    .map(str::trim)
                    .filter(|w| !w.is_empty())
                    .map(str::to_string)
                    .collect();
                if !words.is_empty() {
                    marks.insert(record_id.to_string(), words);
                }
            }
        }
        Self::new(annotator_id, labels, marks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteCount {
    pub hate: usize,
    pub non_hate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicatedLabels {
    pub labels: BTreeMap<String, Label>,
    pub vote_counts: BTreeMap<String, VoteCount>,
}

impl AdjudicatedLabels {
    /// `record_id,label,hate_votes,nonhate_votes` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["record_id", "label", "hate_votes", "nonhate_votes"])
            .expect("in-memory write");
        for (id, label) in &self.labels {
            let votes = self.vote_counts[id];
            let label = match label {
                Label::Hate => "hate",
                Label::NonHate => "non_hate",
            };
            writer
                .write_record([id.as_str(), label, &votes.hate.to_string(), &votes.non_hate.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Strict-majority adjudication over all records covered by any sheet.
///
/// Every record must be covered by an odd number of sheets, and by at least
/// three. Ties are refused rather than broken.
pub fn majority_vote(sheets: &[AnnotationSheet]) -> Result<AdjudicatedLabels> {
    if sheets.len() < 3 {
        return Err(Error::TooFewSheets(sheets.len()));
    }
    let mut counts: BTreeMap<String, VoteCount> = BTreeMap::new();
    for sheet in sheets {
        for (id, label) in &sheet.labels {
            let entry = counts
                .entry(id.clone())
                .or_insert(VoteCount { hate: 0, non_hate: 0 });
            match label {
                Label::Hate => entry.hate += 1,
                Label::NonHate => entry.non_hate += 1,
            }
        }
    }
    let under: Vec<String> = counts
        .iter()
        .filter(|(_, c)| c.hate + c.non_hate < 3)
        .map(|(id, _)| id.clone())
        .collect();
    if !under.is_empty() {
        return Err(Error::InsufficientCoverage(under));
    }
    let even: Vec<String> = counts
        .iter()
        .filter(|(_, c)| (c.hate + c.non_hate) % 2 == 0)
        .map(|(id, _)| id.clone())
        .collect();
    if !even.is_empty() {
        return Err(Error::EvenCoverage(even));
    }
    let labels = counts
        .iter()
        .map(|(id, c)| {
            let label = if c.hate > c.non_hate { Label::Hate } else { Label::NonHate };
            (id.clone(), label)
        })
        .collect();
    Ok(AdjudicatedLabels {
        labels,
        vote_counts: counts,
    })
}

/// Cohen's kappa over the records both sheets cover.
///
/// Returns 1 when chance agreement is 1 (both annotators constant and equal).
pub fn cohen_kappa(a: &AnnotationSheet, b: &AnnotationSheet) -> Result<f64> {
    let mut n = 0u64;
    let mut agree = 0u64;
    let (mut a_hate, mut b_hate) = (0u64, 0u64);
    for (id, la) in &a.labels {
        let Some(lb) = b.labels.get(id) else { continue };
        n += 1;
        agree += u64::from(la == lb);
        a_hate += u64::from(la.is_hate());
        b_hate += u64::from(lb.is_hate());
    }
    if n == 0 {
        return Err(Error::NoSharedRecords(a.annotator_id.clone(), b.annotator_id.clone()));
    }
    // work in counts: p_o = agree/n, p_e = expected/n^2
    let expected = a_hate * b_hate + (n - a_hate) * (n - b_hate);
    let n_sq = n * n;
    if expected == n_sq {
        return Ok(1.0);
    }
    let numerator = (n * agree) as f64 - expected as f64;
    let denominator = n_sq as f64 - expected as f64;
    Ok(numerator / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaAggregate {
    #[default]
    Mean,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySummary {
    pub annotators: Vec<String>,
    /// Symmetric, unit diagonal.
    pub pairwise: Vec<Vec<f64>>,
    pub aggregate: f64,
    pub method: KappaAggregate,
}

/// All pairwise kappas plus their mean (or minimum).
pub fn reliability_summary(
    sheets: &[AnnotationSheet],
    method: KappaAggregate,
) -> Result<ReliabilitySummary> {
    if sheets.len() < 2 {
        return Err(Error::TooFewSheetsForReliability(sheets.len()));
    }
    let k = sheets.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let kappas: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| cohen_kappa(&sheets[i], &sheets[j]))
        .collect::<Result<_>>()?;
    let mut pairwise = vec![vec![1.0; k]; k];
    for (&(i, j), &kappa) in pairs.iter().zip(&kappas) {
        pairwise[i][j] = kappa;
        pairwise[j][i] = kappa;
    }
    let aggregate = match method {
        KappaAggregate::Mean => kappas.iter().sum::<f64>() / kappas.len() as f64,
        KappaAggregate::Min => kappas.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok(ReliabilitySummary {
        annotators: sheets.iter().map(|s| s.annotator_id.clone()).collect(),
        pairwise,
        aggregate,
        method,
    })
}

/// Union of all marked hate words, trimmed and lowercased.
pub fn collect_hate_word_marks(sheets: &[AnnotationSheet]) -> BTreeSet<String> {
    sheets
        .iter()
        .flat_map(|s| s.hate_word_marks.values().flatten())
        .map(|w| w.trim().to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}
