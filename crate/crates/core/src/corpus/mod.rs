//! Canonical comment records, datasets and the dataset registry.
//!
//! Every dataset file, whatever its source shape, is parsed into a
//! [`Dataset`]: a [`DatasetMeta`] row plus an ordered list of
//! [`CommentRecord`]s. The canonical on-disk form is line-delimited JSON with
//! one header line carrying the metadata, followed by one line per record.

pub(crate) mod clean;
mod ingest;
pub mod langid;
mod registry;

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean_text, is_email, is_url};
pub use ingest::{parse_dataset_file, parse_dataset_reader, FileFormat, Mapping};
pub use langid::{detect_language, Detection, LanguageIdentifier, LanguageProfile};
pub use registry::Registry;

/// Dataset identifier: language letter, platform letter, positive integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DatasetId {
    raw: String,
    number: u64,
}

impl DatasetId {
    pub fn new(raw: &str) -> Result<Self> {
        let bad = || Error::InvalidDatasetId(raw.to_string());
        let mut chars = raw.chars();
        let lang = chars.next().ok_or_else(bad)?;
        let platform = chars.next().ok_or_else(bad)?;
        if !lang.is_ascii_uppercase() || !platform.is_ascii_uppercase() {
            return Err(bad());
        }
        let digits = &raw[2..];
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0')
        {
            return Err(bad());
        }
        let number = digits.parse::<u64>().map_err(|_| bad())?;
        Ok(DatasetId {
            raw: raw.to_string(),
            number,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn language_letter(&self) -> char {
        self.raw.as_bytes()[0] as char
    }

    pub fn platform_letter(&self) -> char {
        self.raw.as_bytes()[1] as char
    }
}

impl Ord for DatasetId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.raw[..2]
            .cmp(&other.raw[..2])
            .then(self.number.cmp(&other.number))
    }
}

impl PartialOrd for DatasetId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TryFrom<String> for DatasetId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        DatasetId::new(&value)
    }
}

impl From<DatasetId> for String {
    fn from(id: DatasetId) -> String {
        id.raw
    }
}

impl FromStr for DatasetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DatasetId::new(s)
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// ISO-639-1 language code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: &str) -> Result<Self> {
        if code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(LanguageCode(code.to_string()))
        } else {
            Err(Error::InvalidLanguage(code.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        LanguageCode::new(&value)
    }
}

impl From<LanguageCode> for String {
    fn from(code: LanguageCode) -> String {
        code.0
    }
}

impl FromStr for LanguageCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LanguageCode::new(s)
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    YouTube,
    Twitter,
    Wikipedia,
    Gab,
    Other,
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Platform::YouTube => "YouTube",
            Platform::Twitter => "Twitter",
            Platform::Wikipedia => "Wikipedia",
            Platform::Gab => "Gab",
            Platform::Other => "Other",
        })
    }
}

/// Binary gold or predicted label. `Hate` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Hate,
    NonHate,
}

impl Label {
    pub fn is_hate(self) -> bool {
        self == Label::Hate
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Hate => "Hate",
            Label::NonHate => "NonHate",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    /// Accepts `hate`/`1` and `nonhate`/`non_hate`/`non-hate`/`0`, case-insensitively.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hate" | "1" => Ok(Label::Hate),
            "nonhate" | "non_hate" | "non-hate" | "0" => Ok(Label::NonHate),
            other => Err(format!("unrecognised label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Availability {
    Open,
    Partial,
}

impl fmt::Display for Availability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Availability::Open => "Open",
            Availability::Partial => "Partial",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentRecord {
    pub record_id: String,
    pub dataset_id: DatasetId,
    pub platform: Platform,
    pub language: LanguageCode,
    pub raw_text: String,
    pub clean_text: String,
    pub label: Option<Label>,
    #[serde(default)]
    pub annotated_hate_words: Vec<String>,
}

impl CommentRecord {
    /// Builds a record, deriving `record_id` and `clean_text`.
    pub fn new(
        dataset_id: DatasetId,
        platform: Platform,
        language: LanguageCode,
        row_index: u64,
        raw_text: String,
        label: Option<Label>,
        annotated_hate_words: Vec<String>,
    ) -> Self {
        let record_id = crate::hashing::record_id(dataset_id.as_str(), row_index, &raw_text);
        let clean_text = clean_text(&raw_text);
        CommentRecord {
            record_id,
            dataset_id,
            platform,
            language,
            raw_text,
            clean_text,
            label,
            annotated_hate_words,
        }
    }
}

/// One row of the dataset overview table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub dataset_id: DatasetId,
    pub language: LanguageCode,
    pub platform: Platform,
    pub size: usize,
    pub hate_fraction: f64,
    pub availability: Availability,
    pub codebook_text: Option<String>,
}

impl DatasetMeta {
    /// Labeled hate / labeled records; 0 when nothing is labeled.
    pub fn hate_fraction_of(records: &[CommentRecord]) -> f64 {
        let (hate, labeled) = records.iter().fold((0usize, 0usize), |(h, l), r| match r.label {
            Some(Label::Hate) => (h + 1, l + 1),
            Some(Label::NonHate) => (h, l + 1),
            None => (h, l),
        });
        if labeled == 0 {
            0.0
        } else {
            hate as f64 / labeled as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<CommentRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    crossplat_dataset: u32,
    meta: DatasetMeta,
}

const DATASET_FORMAT_VERSION: u32 = 1;

impl Dataset {
    /// Assembles a dataset and computes `size` and `hate_fraction` from the records.
    pub fn from_records(
        dataset_id: DatasetId,
        language: LanguageCode,
        platform: Platform,
        availability: Availability,
        codebook_text: Option<String>,
        records: Vec<CommentRecord>,
    ) -> Self {
        let meta = DatasetMeta {
            dataset_id,
            language,
            platform,
            size: records.len(),
            hate_fraction: DatasetMeta::hate_fraction_of(&records),
            availability,
            codebook_text,
        };
        Dataset { meta, records }
    }

    pub fn id(&self) -> &DatasetId {
        &self.meta.dataset_id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Replaces the records and recomputes size and hate fraction.
    pub fn with_records(&self, records: Vec<CommentRecord>) -> Dataset {
        let mut meta = self.meta.clone();
        meta.size = records.len();
        meta.hate_fraction = DatasetMeta::hate_fraction_of(&records);
        Dataset { meta, records }
    }

    /// Keeps the records whose detected language is `language`.
    ///
    /// Detection runs on `raw_text`; records with no detectable text are
    /// dropped. Each kept record's `language` is set to the detected code.
    pub fn filter_language(
        &self,
        language: &LanguageCode,
        identifier: &LanguageIdentifier,
    ) -> Dataset {
        let kept: Vec<CommentRecord> = self
            .records
            .iter()
            .filter_map(|r| match identifier.detect(&r.raw_text) {
                Ok(d) if &d.language == language => {
                    let mut r = r.clone();
                    r.language = d.language;
                    Some(r)
                }
                _ => None,
            })
            .collect();
        if kept.is_empty() {
            log::warn!(
                "language filter `{}` left dataset {} empty",
                language,
                self.meta.dataset_id
            );
        }
        let mut out = self.with_records(kept);
        out.meta.language = language.clone();
        out
    }

    /// Canonical line-delimited serialization: header line, then one record per line.
    pub fn to_canonical_string(&self) -> String {
        let header = DatasetHeader {
            crossplat_dataset: DATASET_FORMAT_VERSION,
            meta: self.meta.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("dataset header serializes");
        out.push('\n');
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_canonical(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_canonical_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_canonical(path: &Path) -> Result<Dataset> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_canonical_from(BufReader::new(file), path)
    }

    pub fn read_canonical_from<R: BufRead>(reader: R, path: &Path) -> Result<Dataset> {
        let malformed = |line: usize, message: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line: line as u64,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let header: DatasetHeader = loop {
            match lines.next() {
                None => return Err(Error::EmptyFile { path: path.to_path_buf() }),
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line).map_err(|e| malformed(i + 1, e.to_string()))?;
                }
            }
        };
        if header.crossplat_dataset != DATASET_FORMAT_VERSION {
            return Err(malformed(
                1,
                format!("unsupported dataset format version {}", header.crossplat_dataset),
            ));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CommentRecord =
                serde_json::from_str(&line).map_err(|e| malformed(i + 1, e.to_string()))?;
            records.push(record);
        }
        let dataset = Dataset {
            meta: header.meta,
            records,
        };
        if dataset.meta.size != dataset.records.len() {
            return Err(malformed(
                1,
                format!(
                    "header declares {} records, file holds {}",
                    dataset.meta.size,
                    dataset.records.len()
                ),
            ));
        }
        Ok(dataset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_id_parsing() {
        for ok in ["EY1", "GT2", "EW1", "ET10"] {
            assert_eq!(DatasetId::new(ok).unwrap().as_str(), ok);
        }
        for bad in ["", "E", "EY", "EY0", "ey1", "E1Y", "EY01", "EYA", "EY-1"] {
            assert!(DatasetId::new(bad).is_err(), "{bad}");
        }
        let id = DatasetId::new("GY1").unwrap();
        assert_eq!(id.language_letter(), 'G');
        assert_eq!(id.platform_letter(), 'Y');
    }

    fn mixed_language_dataset() -> Dataset {
        let id = DatasetId::new("EY1").unwrap();
        let en = LanguageCode::new("en").unwrap();
        let texts = [
            "This video is great and I completely agree with you",
            "Das ist ein sehr gutes Video und ich stimme zu",
            "Thanks for sharing, the explanation was really helpful",
            "Ich habe mich sehr über diesen Beitrag gefreut",
            "What a wonderful story about the people in this town",
        ];
        let records = texts
            .iter()
            .enumerate()
            .map(|(i, t)| CommentRecord::new(id.clone(), Platform::YouTube, en.clone(), i as u64, t.to_string(), None, vec![]))
            .collect();
        Dataset::from_records(id, en, Platform::YouTube, Availability::Open, None, records)
    }

    #[test]
    fn filter_language_keeps_matching_records() {
        let d = mixed_language_dataset();
        let de = LanguageCode::new("de").unwrap();
        let only_de = d.filter_language(&de, LanguageIdentifier::builtin());
        assert_eq!(only_de.meta.size, 2);
        assert_eq!(only_de.meta.language, de);
        assert!(only_de.records.iter().all(|r| r.language == de));
        assert_eq!(only_de.records[0].record_id, d.records[1].record_id);
        assert_eq!(only_de.records[1].record_id, d.records[3].record_id);
    }

    #[test]
    fn filter_language_identity_and_empty() {
        let d = mixed_language_dataset();
        let en = LanguageCode::new("en").unwrap();
        let english = d.filter_language(&en, LanguageIdentifier::builtin());
        assert_eq!(english.len(), 3);
        let again = english.filter_language(&en, LanguageIdentifier::builtin());
        assert_eq!(again, english);
        let fr = LanguageCode::new("fr").unwrap();
        let none = d.filter_language(&fr, LanguageIdentifier::builtin());
        assert!(none.is_empty());
        assert_eq!(none.meta.size, 0);
    }

    #[test]
    fn dataset_id_orders_numerically() {
        let mut ids: Vec<DatasetId> = ["ET10", "ET2", "EG1", "ET1"]
            .iter()
            .map(|s| DatasetId::new(s).unwrap())
            .collect();
        ids.sort();
        let got: Vec<&str> = ids.iter().map(|i| i.as_str()).collect();
        assert_eq!(got, ["EG1", "ET1", "ET2", "ET10"]);
    }

    #[test]
    fn language_code_validation() {
        assert!(LanguageCode::new("en").is_ok());
        assert!(LanguageCode::new("EN").is_err());
        assert!(LanguageCode::new("eng").is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Hate".parse::<Label>().unwrap(), Label::Hate);
        assert_eq!(" non-hate ".parse::<Label>().unwrap(), Label::NonHate);
        assert_eq!("0".parse::<Label>().unwrap(), Label::NonHate);
        assert!("maybe".parse::<Label>().is_err());
    }

    fn toy() -> Dataset {
        let id = DatasetId::new("EY1").unwrap();
        let en = LanguageCode::new("en").unwrap();
        let records = vec![
            CommentRecord::new(id.clone(), Platform::YouTube, en.clone(), 0, "this video rocks".into(), Some(Label::NonHate), vec![]),
            CommentRecord::new(id.clone(), Platform::YouTube, en.clone(), 1, "you are scum".into(), Some(Label::Hate), vec!["scum".into()]),
            CommentRecord::new(id.clone(), Platform::YouTube, en.clone(), 2, "no label here".into(), None, vec![]),
        ];
        Dataset::from_records(id, en, Platform::YouTube, Availability::Partial, None, records)
    }

    #[test]
    fn hate_fraction_ignores_unlabeled() {
        let d = toy();
        assert_eq!(d.meta.size, 3);
        assert!((d.meta.hate_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn canonical_round_trip_is_byte_stable() {
        let d = toy();
        let text = d.to_canonical_string();
        let back = Dataset::read_canonical_from(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_canonical_string(), text);
    }

    #[test]
    fn canonical_reader_rejects_size_mismatch() {
        let d = toy();
        let text = d.to_canonical_string();
        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(Dataset::read_canonical_from(truncated.as_bytes(), Path::new("mem")).is_err());
    }
}
