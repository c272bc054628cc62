//! Corpus toolkit and experiment harness for cross-platform hate-speech
//! classification.
//!
//! The crate covers the whole pipeline: ingestion of labeled comment
//! datasets into one canonical schema ([`corpus`]), adjudication of annotator
//! sheets ([`annotation`]), hate-term lexicons ([`lexicon`]), three
//! dataset-similarity measures ([`similarity`]), hashed TF-IDF features
//! ([`features`]), a logistic-regression baseline with per-class metrics
//! ([`model`]), the train/augment/evaluate protocol ([`experiments`]) and
//! table rendering ([`report`]).

pub mod annotation;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod features;
pub mod hashing;
pub mod lexicon;
pub mod model;
pub mod report;
pub mod similarity;

pub use error::{Error, Result};
