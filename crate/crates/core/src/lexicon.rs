//! Per-language hate-term lists and extraction of the terms a dataset uses.
//!
//! Matching is whole-token on `clean_text`: single-word terms match a
//! lowercased whitespace token, multi-word terms match a contiguous run of
//! tokens. Since cleaning drops tokens under three characters, a term with
//! such a word can never match; loading warns about those.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{clean::MIN_TOKEN_CHARS, Dataset, LanguageCode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub language: LanguageCode,
    terms: BTreeSet<String>,
}

/// Lowercase, trim, collapse inner whitespace. `None` for blank input.
pub fn normalize_term(term: &str) -> Option<String> {
    let normalized = term
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    (!normalized.is_empty()).then_some(normalized)
}

impl Lexicon {
    pub fn new<I, S>(language: LanguageCode, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            language,
            terms: terms.into_iter().filter_map(|t| normalize_term(t.as_ref())).collect(),
        }
    }

    pub fn terms(&self) -> &BTreeSet<String> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Parses one term per line; `#` starts a comment line.
    pub fn parse(language: LanguageCode, text: &str) -> Self {
        let lexicon = Lexicon::new(
            language,
            text.lines().filter(|l| !l.trim_start().starts_with('#')),
        );
        if lexicon.is_empty() {
            log::warn!("lexicon for `{}` is empty", lexicon.language);
        }
        for term in lexicon.unmatchable_terms() {
            log::warn!("lexicon term `{term}` has a word shorter than {MIN_TOKEN_CHARS} characters and can never match cleaned text");
        }
        lexicon
    }

    pub fn load(path: &Path, language: LanguageCode) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(language, &text))
    }

    /// Terms containing a word too short to survive cleaning.
    pub fn unmatchable_terms(&self) -> impl Iterator<Item = &String> {
        self.terms
            .iter()
            .filter(|t| t.split(' ').any(|w| w.chars().count() < MIN_TOKEN_CHARS))
    }

    pub fn merge(&self, extra: &Lexicon) -> Result<Lexicon> {
        if extra.language != self.language {
            return Err(Error::LanguageMismatch {
                expected: self.language.to_string(),
                found: extra.language.to_string(),
            });
        }
        Ok(self.with_terms(&extra.terms))
    }

    /// Union with a bare set of terms assumed to be in this lexicon's language.
    pub fn with_terms<I, S>(&self, extra: I) -> Lexicon
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut terms = self.terms.clone();
        terms.extend(extra.into_iter().filter_map(|t| normalize_term(t.as_ref())));
        Lexicon {
            language: self.language.clone(),
            terms,
        }
    }

    /// Sorted plain-text export, one term per line.
    pub fn to_text(&self) -> String {
        export_terms(&self.terms)
    }
}

pub fn export_terms(terms: &BTreeSet<String>) -> String {
    terms.iter().map(|t| format!("{t}\n")).collect()
}

/// Lexicon terms that occur in at least one record's `clean_text`.
pub fn extract_hate_words(dataset: &Dataset, lexicon: &Lexicon) -> Result<BTreeSet<String>> {
    if dataset.meta.language != lexicon.language {
        return Err(Error::LanguageMismatch {
            expected: lexicon.language.to_string(),
            found: dataset.meta.language.to_string(),
        });
    }
    let mut by_length: BTreeMap<usize, HashSet<&str>> = BTreeMap::new();
    for term in &lexicon.terms {
        by_length
            .entry(term.split(' ').count())
            .or_default()
            .insert(term.as_str());
    }
    let found = dataset
        .records
        .par_iter()
        .map(|record| {
            let tokens: Vec<String> = record.clean_text.split_whitespace().map(str::to_lowercase).collect();
            let mut hits = BTreeSet::new();
            for (&n, terms) in &by_length {
                for window in tokens.windows(n) {
                    let candidate = window.join(" ");
                    if let Some(term) = terms.get(candidate.as_str()) {
                        hits.insert(term.to_string());
                    }
                }
            }
            hits
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    Ok(found)
}
