use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file is empty")]
    EmptyFile { path: PathBuf },

    #[error("{path}: missing mapped column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: label value `{value}` is not in the label map")]
    UnmappableLabel {
        path: PathBuf,
        line: u64,
        value: String,
    },

    #[error("invalid dataset id `{0}`: expected language letter, platform letter, positive integer (e.g. EY1)")]
    InvalidDatasetId(String),

    #[error("invalid language code `{0}`: expected two lowercase ASCII letters")]
    InvalidLanguage(String),

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("language detection needs non-empty text")]
    EmptyText,

    #[error("no language profiles loaded")]
    NoProfiles,

    #[error("invalid language profile {path}:{line}: {message}")]
    InvalidProfile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("registry is empty")]
    EmptyRegistry,

    #[error("dataset `{0}` is already registered")]
    DuplicateDataset(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("majority vote needs at least 3 sheets, got {0}")]
    TooFewSheets(usize),

    #[error("records covered by fewer than 3 sheets: {}", .0.join(", "))]
    InsufficientCoverage(Vec<String>),

    #[error("records covered by an even number of sheets (tie possible): {}", .0.join(", "))]
    EvenCoverage(Vec<String>),

    #[error("annotation sheet `{annotator}` marks hate words for unlabeled record `{record_id}`")]
    MarksWithoutLabel {
        annotator: String,
        record_id: String,
    },

    #[error("sheets `{0}` and `{1}` share no records")]
    NoSharedRecords(String, String),

    #[error("reliability needs at least 2 sheets, got {0}")]
    TooFewSheetsForReliability(usize),

    #[error("language mismatch: expected `{expected}`, found `{found}`")]
    LanguageMismatch { expected: String, found: String },

    #[error("dataset `{0}` has no records")]
    EmptyDataset(String),

    #[error("dataset `{0}` has no non-zero vectors to average")]
    ZeroCentroid(String),

    #[error("embedding table has no vector for record `{0}`")]
    MissingEmbedding(String),

    #[error("invalid embedding table at line {line}: {message}")]
    InvalidEmbeddingTable { line: usize, message: String },

    #[error("rating {0} outside 1..=10")]
    InvalidRating(i64),

    #[error("no survey votes survive the response-time filter")]
    NoSurvivingVotes,

    #[error("similarity matrix needs at least 2 datasets, got {0}")]
    TooFewDatasets(usize),

    #[error("empty training corpus")]
    EmptyCorpus,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature dimension {0} is not a power of two")]
    InvalidDimension(usize),

    #[error("training data contains a single class ({0})")]
    SingleClass(String),

    #[error("vectors and labels differ in length ({vectors} vs {labels})")]
    LengthMismatch { vectors: usize, labels: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    EmptyInput,

    #[error("probability {value} for record `{record_id}` outside [0, 1]")]
    InvalidProbability { record_id: String, value: f64 },

    #[error("duplicate record id `{0}`")]
    DuplicateRecord(String),

    #[error("record `{0}` has no gold label")]
    UnknownRecord(String),

    #[error("invalid model file at line {line}: {message}")]
    InvalidModelFile { line: usize, message: String },

    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),

    #[error("dataset `{dataset}` contains {count} unlabeled records")]
    UnlabeledRecords { dataset: String, count: usize },

    #[error("class {class} has {count} records; at least {needed} required")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("training pool leaks test record `{0}`")]
    Leakage(String),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("empty result list")]
    EmptyResults,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
