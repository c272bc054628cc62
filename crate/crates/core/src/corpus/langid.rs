//! Character n-gram rank-profile language identification.
//!
//! Each language is represented by its 300 most frequent character 1- to
//! 3-grams, ranked by frequency. A text is scored against every profile with
//! the out-of-place distance: for each n-gram of the text, the absolute rank
//! difference to the profile, or the profile length when the profile lacks it.
//! Words are lowercased, split on non-letters and padded with `_` on both
//! sides, so word boundaries show up as n-grams (`_th`, `er_`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use super::LanguageCode;
use crate::error::{Error, Result};

pub const PROFILE_SIZE: usize = 300;
pub const MAX_NGRAM: usize = 3;
const PAD: char = '_';

/// Scale applied to normalized distances before the softmax that produces
/// confidences. Normalized distances lie in [0, 1].
const CONFIDENCE_SHARPNESS: f64 = 20.0;

const EN_SEED: &str = include_str!("../../data/langid/en_seed.txt");
const DE_SEED: &str = include_str!("../../data/langid/de_seed.txt");

/// Counts the padded character 1..=3-grams of `text`.
pub fn ngram_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    let lower = text.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let padded: Vec<char> = std::iter::once(PAD)
            .chain(word.chars())
            .chain(std::iter::once(PAD))
            .collect();
        for n in 1..=MAX_NGRAM {
            for window in padded.windows(n) {
                if n == 1 && window[0] == PAD {
                    continue;
                }
                *counts.entry(window.iter().collect::<String>()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// N-grams sorted by descending count, ties broken lexicographically.
fn ranked(counts: HashMap<String, usize>, limit: usize) -> Vec<String> {
    let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.into_iter().take(limit).map(|(g, _)| g).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageProfile {
    pub language: LanguageCode,
    ranks: HashMap<String, usize>,
}

impl LanguageProfile {
    pub fn train(language: LanguageCode, text: &str) -> Self {
        let ranks = ranked(ngram_counts(text), PROFILE_SIZE)
            .into_iter()
            .enumerate()
            .map(|(rank, gram)| (gram, rank))
            .collect();
        LanguageProfile { language, ranks }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn rank(&self, gram: &str) -> Option<usize> {
        self.ranks.get(gram).copied()
    }

    /// `ngram<TAB>rank` lines, in rank order.
    pub fn to_profile_string(&self) -> String {
        let mut rows: Vec<(&String, &usize)> = self.ranks.iter().collect();
        rows.sort_by_key(|(_, rank)| **rank);
        let mut out = String::new();
        for (gram, rank) in rows {
            let _ = writeln!(out, "{gram}\t{rank}");
        }
        out
    }

    pub fn parse(language: LanguageCode, text: &str, source: &str) -> Result<Self> {
        let mut ranks = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| Error::InvalidProfile {
                path: source.to_string(),
                line: i + 1,
                message: message.to_string(),
            };
            let (gram, rank) = line.split_once('\t').ok_or_else(|| bad("expected ngram<TAB>rank"))?;
            if gram.is_empty() {
                return Err(bad("empty n-gram"));
            }
            let rank: usize = rank.trim().parse().map_err(|_| bad("rank is not an integer"))?;
            if ranks.insert(gram.to_string(), rank).is_some() {
                return Err(bad("duplicate n-gram"));
            }
        }
        Ok(LanguageProfile { language, ranks })
    }

    pub fn load(path: &Path, language: LanguageCode) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(language, &text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_profile_string()).map_err(|e| Error::io(path, e))
    }

    /// Out-of-place distance of a ranked document profile, divided by its
    /// maximum so the result lies in [0, 1].
    fn normalized_distance(&self, document: &[String]) -> f64 {
        let penalty = self.ranks.len().max(1);
        let total: usize = document
            .iter()
            .enumerate()
            .map(|(i, gram)| match self.ranks.get(gram) {
                Some(&rank) => rank.abs_diff(i).min(penalty),
                None => penalty,
            })
            .sum();
        total as f64 / (document.len() * penalty) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub language: LanguageCode,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LanguageIdentifier {
    profiles: Vec<LanguageProfile>,
}

impl LanguageIdentifier {
    pub fn new(profiles: Vec<LanguageProfile>) -> Self {
        let mut id = LanguageIdentifier::default();
        for p in profiles {
            id.add_profile(p);
        }
        id
    }

    /// English and German profiles trained from the bundled seed text.
    pub fn builtin() -> &'static LanguageIdentifier {
        static BUILTIN: OnceLock<LanguageIdentifier> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            LanguageIdentifier::new(vec![
                LanguageProfile::train(LanguageCode::new("en").unwrap(), EN_SEED),
                LanguageProfile::train(LanguageCode::new("de").unwrap(), DE_SEED),
            ])
        })
    }

    /// Adds or replaces the profile for its language.
    pub fn add_profile(&mut self, profile: LanguageProfile) {
        self.profiles.retain(|p| p.language != profile.language);
        self.profiles.push(profile);
        self.profiles.sort_by(|a, b| a.language.cmp(&b.language));
    }

    pub fn profiles(&self) -> &[LanguageProfile] {
        &self.profiles
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageCode> {
        self.profiles.iter().map(|p| &p.language)
    }

    /// Best-matching language with a softmax confidence over all profiles.
    pub fn detect(&self, text: &str) -> Result<Detection> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        if self.profiles.is_empty() {
            return Err(Error::NoProfiles);
        }
        let document = ranked(ngram_counts(text), usize::MAX);
        if document.is_empty() {
            // no letters at all: nothing to compare, every profile is equally far
            let share = 1.0 / self.profiles.len() as f64;
            return Ok(Detection {
                language: self.profiles[0].language.clone(),
                confidence: share,
            });
        }
        let distances: Vec<f64> = self
            .profiles
            .iter()
            .map(|p| p.normalized_distance(&document))
            .collect();
        // profiles are sorted by language, so ties go to the smaller code
        let (best, best_distance) = distances
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        let denom: f64 = distances
            .iter()
            .map(|d| (-CONFIDENCE_SHARPNESS * (d - best_distance)).exp())
            .sum();
        Ok(Detection {
            language: self.profiles[best].language.clone(),
            confidence: 1.0 / denom,
        })
    }
}

/// Detects with the built-in en/de profiles.
pub fn detect_language(text: &str) -> Result<Detection> {
    LanguageIdentifier::builtin().detect(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn german_sentence() {
        let d = detect_language("Das ist ein sehr gutes Video und ich stimme zu").unwrap();
        assert_eq!(d.language.as_str(), "de");
        assert!(d.confidence >= 0.8, "confidence {}", d.confidence);
    }

    #[test]
    fn english_sentence() {
        let d = detect_language("This video is great and I completely agree with you").unwrap();
        assert_eq!(d.language.as_str(), "en");
        assert!(d.confidence >= 0.8, "confidence {}", d.confidence);
    }

    #[test]
    fn empty_text_is_an_error() {
        assert!(matches!(detect_language(""), Err(Error::EmptyText)));
        assert!(matches!(detect_language("   "), Err(Error::EmptyText)));
    }

    #[test]
    fn no_profiles_is_an_error() {
        let id = LanguageIdentifier::default();
        assert!(matches!(id.detect("hello"), Err(Error::NoProfiles)));
    }

    #[test]
    fn ngrams_are_padded() {
        let counts = ngram_counts("Ab");
        let mut grams: Vec<&str> = counts.keys().map(String::as_str).collect();
        grams.sort();
        assert_eq!(grams, ["_a", "_ab", "a", "ab", "ab_", "b", "b_"]);
    }

    #[test]
    fn builtin_profiles_are_full() {
        for p in LanguageIdentifier::builtin().profiles() {
            assert_eq!(p.len(), PROFILE_SIZE);
        }
    }

    #[test]
    fn profile_file_round_trip() {
        let p = LanguageProfile::train(LanguageCode::new("en").unwrap(), EN_SEED);
        let text = p.to_profile_string();
        let back = LanguageProfile::parse(p.language.clone(), &text, "mem").unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn profile_parse_errors_carry_line() {
        let err = LanguageProfile::parse(LanguageCode::new("en").unwrap(), "th\t0\nbroken\n", "p.txt")
            .unwrap_err();
        assert!(matches!(err, Error::InvalidProfile { line: 2, .. }));
    }

    #[test]
    fn detection_is_deterministic() {
        let text = "Ich finde das Video wirklich interessant";
        let a = detect_language(text).unwrap();
        for _ in 0..5 {
            assert_eq!(detect_language(text).unwrap(), a);
        }
    }
}
