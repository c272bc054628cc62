//! Train/test protocol: stratified split with a frozen test set, augmentation
//! of the training split with external datasets, undersampling, and grids of
//! experiments run in parallel with order-independent seeding.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CommentRecord, Dataset, DatasetId, Label, Registry};
use crate::error::{Error, Result};
use crate::features::{tokenize, FeatureConfig};
use crate::hashing::{derive_seed, fingerprint};
use crate::model::{evaluate, Hyperparams, Metrics, TextClassifier};

pub const DEFAULT_SPLIT_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    None,
    Undersample,
}

/// Where undersampling is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStage {
    #[default]
    CombinedPool,
    PerDataset,
}

fn default_ratio() -> f64 {
    DEFAULT_SPLIT_RATIO
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub target: DatasetId,
    #[serde(default)]
    pub augments: Vec<DatasetId>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub sampling_stage: SamplingStage,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

impl ExperimentSpec {
    pub fn new(target: DatasetId, seed: u64) -> Self {
        ExperimentSpec {
            target,
            augments: Vec::new(),
            sampling: Sampling::None,
            sampling_stage: SamplingStage::CombinedPool,
            split_ratio: DEFAULT_SPLIT_RATIO,
            seed,
            features: FeatureConfig::default(),
            hyperparams: Hyperparams::default(),
        }
    }

    pub fn with_augments(mut self, augments: impl IntoIterator<Item = DatasetId>) -> Self {
        self.augments = augments.into_iter().collect();
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    /// Target followed by augments, joined with "+".
    pub fn training_label(&self) -> String {
        std::iter::once(&self.target)
            .chain(&self.augments)
            .map(DatasetId::as_str)
            .collect::<Vec<_>>()
            .join("+")
    }

    fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("spec serializes")
    }

    /// Seed of this experiment's sampling and training stream under `parent`.
    pub fn stream_seed(&self, parent: u64) -> u64 {
        derive_seed(parent, &self.canonical_bytes())
    }

    /// Checks the spec against the registry without running anything.
    pub fn validate(&self, registry: &Registry) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidRatio(self.split_ratio));
        }
        self.features.validate()?;
        self.hyperparams.validate()?;
        let target = registry.get(&self.target)?;
        let mut seen = BTreeSet::new();
        for a in &self.augments {
            if a == &self.target {
                return Err(Error::InvalidSpec(format!("target {a} listed as its own augment")));
            }
            if !seen.insert(a) {
                return Err(Error::InvalidSpec(format!("augment {a} listed twice")));
            }
            let d = registry.get(a)?;
            if d.meta.language != target.meta.language {
                return Err(Error::LanguageMismatch {
                    expected: target.meta.language.to_string(),
                    found: format!("{} ({a})", d.meta.language),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub dataset_id: DatasetId,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub metrics: Metrics,
    pub test_fingerprint: String,
    pub train_size: usize,
    pub test_size: usize,
    pub contributions: Vec<Contribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<CommentRecord>,
    pub test: Vec<CommentRecord>,
}

impl Split {
    pub fn test_fingerprint(&self) -> String {
        fingerprint(self.test.iter().map(|r| r.record_id.as_str()))
    }

    pub fn test_ids(&self) -> BTreeSet<&str> {
        self.test.iter().map(|r| r.record_id.as_str()).collect()
    }
}

fn class_name(label: Label) -> &'static str {
    match label {
        Label::Hate => "Hate",
        Label::NonHate => "NonHate",
    }
}

fn class_indices(records: &[CommentRecord], dataset: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let unlabeled = records.iter().filter(|r| r.label.is_none()).count();
    if unlabeled > 0 {
        return Err(Error::UnlabeledRecords {
            dataset: dataset.to_string(),
            count: unlabeled,
        });
    }
    let (hate, non_hate): (Vec<usize>, Vec<usize>) =
        (0..records.len()).partition(|&i| records[i].label == Some(Label::Hate));
    Ok((hate, non_hate))
}

/// Number of training records for a class of size `n`: `ratio * n` rounded
/// half up, kept within `1..=n-1`.
pub fn train_count(n: usize, ratio: f64) -> usize {
    let raw = (ratio * n as f64 + 0.5 + 1e-9).floor() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Per-class seeded split; both halves keep the dataset's record order.
pub fn stratified_split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    let records = &dataset.records;
    let (hate, non_hate) = class_indices(records, dataset.id().as_str())?;
    let mut in_train = vec![false; records.len()];
    for (label, idx) in [(Label::Hate, hate), (Label::NonHate, non_hate)] {
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: class_name(label).to_string(),
                count: idx.len(),
                needed: 2,
            });
        }
        let mut shuffled = idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, class_name(label).as_bytes()));
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..train_count(idx.len(), ratio)] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = records.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok(Split {
        train: train.into_iter().map(|(r, _)| r).collect(),
        test: test.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Keeps the whole minority class and an equal-size uniform sample of the
/// majority, then shuffles. With equal counts Hate counts as the minority.
pub fn undersample(records: Vec<CommentRecord>, seed: u64) -> Result<Vec<CommentRecord>> {
    let (hate, non_hate) = class_indices(&records, "training pool")?;
    for (label, idx) in [(Label::Hate, &hate), (Label::NonHate, &non_hate)] {
        if idx.is_empty() {
            return Err(Error::ClassTooSmall {
                class: class_name(label).to_string(),
                count: 0,
                needed: 1,
            });
        }
    }
    let (minority, mut majority) = if hate.len() <= non_hate.len() {
        (hate, non_hate)
    } else {
        (non_hate, hate)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority.shuffle(&mut rng);
    majority.truncate(minority.len());
    majority.sort_unstable();
    let mut order: Vec<usize> = minority.into_iter().chain(majority).collect();
    order.shuffle(&mut rng);
    let mut slots: Vec<Option<CommentRecord>> = records.into_iter().map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().expect("index used once")).collect())
}

/// Target training records plus every labeled augment record, sampled as
/// requested. Fails if any pool record belongs to the test set.
pub fn build_training_pool(
    target_train: &[CommentRecord],
    augments: &[&Dataset],
    test_ids: &BTreeSet<&str>,
    sampling: Sampling,
    stage: SamplingStage,
    seed: u64,
) -> Result<Vec<CommentRecord>> {
    let mut parts: Vec<Vec<CommentRecord>> = vec![target_train.to_vec()];
    for d in augments {
        let labeled: Vec<CommentRecord> = d.records.iter().filter(|r| r.label.is_some()).cloned().collect();
        if labeled.len() < d.len() {
            log::warn!("augment {} contributes {} of {} records (rest unlabeled)", d.id(), labeled.len(), d.len());
        }
        parts.push(labeled);
    }
    for part in &parts {
        if let Some(r) = part.iter().find(|r| test_ids.contains(r.record_id.as_str())) {
            return Err(Error::Leakage(r.record_id.clone()));
        }
    }
    let pool = match (sampling, stage) {
        (Sampling::None, _) => parts.concat(),
        (Sampling::Undersample, SamplingStage::CombinedPool) => undersample(parts.concat(), seed)?,
        (Sampling::Undersample, SamplingStage::PerDataset) => {
            let mut out = Vec::new();
            for (k, part) in parts.into_iter().enumerate() {
                out.extend(undersample(part, derive_seed(seed, &(k as u64).to_le_bytes()))?);
            }
            out
        }
    };
    Ok(pool)
}

/// Runs one experiment; sampling and training draw from the spec's own seed.
pub fn run_experiment(spec: &ExperimentSpec, registry: &Registry) -> Result<ExperimentResult> {
    run_with_stream(spec, registry, spec.stream_seed(spec.seed))
}

fn run_with_stream(spec: &ExperimentSpec, registry: &Registry, stream: u64) -> Result<ExperimentResult> {
    spec.validate(registry)?;
    let target = registry.get(&spec.target)?;
    let augments: Vec<&Dataset> = spec.augments.iter().map(|a| registry.get(a)).collect::<Result<_>>()?;

    let split = stratified_split(target, spec.split_ratio, spec.seed)?;
    let test_ids = split.test_ids();
    let pool = build_training_pool(
        &split.train,
        &augments,
        &test_ids,
        spec.sampling,
        spec.sampling_stage,
        derive_seed(stream, b"sample"),
    )?;
    debug_assert!(pool.iter().all(|r| !test_ids.contains(r.record_id.as_str())));

    let docs: Vec<Vec<String>> = pool.iter().map(|r| tokenize(&r.clean_text)).collect();
    let labels: Vec<Label> = pool.iter().map(|r| r.label.expect("pool is labeled")).collect();
    let hyperparams = Hyperparams {
        seed: derive_seed(stream, b"train"),
        ..spec.hyperparams
    };
    let classifier = TextClassifier::train(&docs, &labels, spec.features, hyperparams)?;

    let predicted: Vec<Label> = split
        .test
        .iter()
        .map(|r| classifier.predict_tokens(&tokenize(&r.clean_text)).0)
        .collect();
    let gold: Vec<Label> = split.test.iter().map(|r| r.label.expect("split is labeled")).collect();
    let metrics = evaluate(&predicted, &gold)?;

    let contributions = std::iter::once(&spec.target)
        .chain(&spec.augments)
        .map(|id| Contribution {
            dataset_id: id.clone(),
            records: pool.iter().filter(|r| &r.dataset_id == id).count(),
        })
        .collect();
    Ok(ExperimentResult {
        spec: spec.clone(),
        metrics,
        test_fingerprint: split.test_fingerprint(),
        train_size: pool.len(),
        test_size: split.test.len(),
        contributions,
    })
}

/// Validates every spec, then runs them on `workers` threads. Results follow
/// spec order and do not depend on the worker count.
pub fn run_grid(
    specs: &[ExperimentSpec],
    global_seed: u64,
    registry: &Registry,
    workers: usize,
) -> Result<Vec<ExperimentResult>> {
    if specs.is_empty() {
        log::warn!("experiment grid is empty");
        return Ok(Vec::new());
    }
    if workers == 0 {
        return Err(Error::InvalidSpec("worker count must be positive".into()));
    }
    for spec in specs {
        spec.validate(registry)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidSpec(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        specs
            .par_iter()
            .map(|s| run_with_stream(s, registry, s.stream_seed(global_seed)))
            .collect()
    })
}

/// Grid file entry; omitted fields fall back to grid-level defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub target: DatasetId,
    #[serde(default)]
    pub augments: Vec<DatasetId>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub sampling_stage: SamplingStage,
    pub split_ratio: Option<f64>,
    pub seed: Option<u64>,
    pub features: Option<FeatureConfig>,
    pub hyperparams: Option<Hyperparams>,
}

/// A global seed and a list of experiments, read from TOML:
/// `seed = 7` followed by `[[experiment]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub seed: u64,
    pub split_ratio: Option<f64>,
    pub features: Option<FeatureConfig>,
    pub hyperparams: Option<Hyperparams>,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<GridEntry>,
}

impl Grid {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))
    }

    /// Entry values win over grid values, which win over `defaults`.
    pub fn specs(&self, defaults: &ExperimentSpecDefaults) -> Vec<ExperimentSpec> {
        self.experiments
            .iter()
            .map(|e| ExperimentSpec {
                target: e.target.clone(),
                augments: e.augments.clone(),
                sampling: e.sampling,
                sampling_stage: e.sampling_stage,
                split_ratio: e.split_ratio.or(self.split_ratio).unwrap_or(defaults.split_ratio),
                seed: e.seed.unwrap_or(self.seed),
                features: e.features.or(self.features).unwrap_or(defaults.features),
                hyperparams: e.hyperparams.or(self.hyperparams).unwrap_or(defaults.hyperparams),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpecDefaults {
    pub split_ratio: f64,
    pub features: FeatureConfig,
    pub hyperparams: Hyperparams,
}

impl Default for ExperimentSpecDefaults {
    fn default() -> Self {
        ExperimentSpecDefaults {
            split_ratio: DEFAULT_SPLIT_RATIO,
            features: FeatureConfig::default(),
            hyperparams: Hyperparams::default(),
        }
    }
}

/// Seeded generator of labeled corpora with disjoint class vocabularies.
pub mod synthetic {
    use rand::distributions::{Distribution, WeightedIndex};
    use rand::Rng;

    use super::*;
    use crate::corpus::{Availability, LanguageCode, Platform};

    #[derive(Debug, Clone, PartialEq)]
    pub struct SyntheticSpec {
        pub dataset_id: DatasetId,
        pub documents: usize,
        pub hate_fraction: f64,
        /// Distinct words available to each class.
        pub class_vocabulary: usize,
        pub class_words_per_doc: usize,
        /// Class words are drawn with weight `1 / rank^exponent`; 0 is uniform.
        pub class_zipf_exponent: f64,
        pub neutral_vocabulary: usize,
        pub neutral_words_per_doc: usize,
        pub seed: u64,
    }

    impl SyntheticSpec {
        pub fn new(dataset_id: DatasetId, documents: usize, seed: u64) -> Self {
            SyntheticSpec {
                dataset_id,
                documents,
                hate_fraction: 0.4,
                class_vocabulary: 30,
                class_words_per_doc: 3,
                class_zipf_exponent: 1.25,
                neutral_vocabulary: 300,
                neutral_words_per_doc: 6,
                seed,
            }
        }
    }

    /// Hate documents draw class words `hNNN`, non-hate documents `nNNN`,
    /// both mixed with shared words `wNNN`. Exactly
    /// `round(documents * hate_fraction)` documents are Hate.
    pub fn generate(spec: &SyntheticSpec) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let hate_count = (spec.documents as f64 * spec.hate_fraction).round() as usize;
        let mut labels: Vec<Label> = (0..spec.documents)
            .map(|i| if i < hate_count { Label::Hate } else { Label::NonHate })
            .collect();
        labels.shuffle(&mut rng);
        let class_words = WeightedIndex::new(
            (1..=spec.class_vocabulary).map(|rank| (rank as f64).powf(-spec.class_zipf_exponent)),
        )
        .expect("positive class vocabulary");
        let en = LanguageCode::new("en").expect("valid code");
        let records = labels
            .into_iter()
            .enumerate()
            .map(|(row, label)| {
                let prefix = if label.is_hate() { 'h' } else { 'n' };
                let mut words = Vec::with_capacity(spec.class_words_per_doc + spec.neutral_words_per_doc);
                for _ in 0..spec.class_words_per_doc {
                    words.push(format!("{prefix}{:03}", class_words.sample(&mut rng)));
                }
                for _ in 0..spec.neutral_words_per_doc {
                    words.push(format!("w{:03}", rng.gen_range(0..spec.neutral_vocabulary)));
                }
                words.shuffle(&mut rng);
                CommentRecord::new(
                    spec.dataset_id.clone(),
                    Platform::Other,
                    en.clone(),
                    row as u64,
                    words.join(" "),
                    Some(label),
                    Vec::new(),
                )
            })
            .collect();
        Dataset::from_records(spec.dataset_id.clone(), en, Platform::Other, Availability::Open, None, records)
    }

    /// Same texts under a new id with labels permuted by `seed`.
    pub fn shuffle_labels(dataset: &Dataset, new_id: DatasetId, seed: u64) -> Dataset {
        let mut labels: Vec<Option<Label>> = dataset.records.iter().map(|r| r.label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let records = dataset
            .records
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(row, (r, label))| {
                CommentRecord::new(
                    new_id.clone(),
                    r.platform,
                    r.language.clone(),
                    row as u64,
                    r.raw_text.clone(),
                    label,
                    Vec::new(),
                )
            })
            .collect();
        Dataset::from_records(
            new_id,
            dataset.meta.language.clone(),
            dataset.meta.platform,
            dataset.meta.availability,
            None,
            records,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::synthetic::{generate, shuffle_labels, SyntheticSpec};
    use super::*;
    use crate::corpus::{Availability, LanguageCode, Platform};

    fn id(s: &str) -> DatasetId {
        DatasetId::new(s).unwrap()
    }

    fn labeled(id_str: &str, hate: usize, non_hate: usize) -> Dataset {
        let did = id(id_str);
        let en = LanguageCode::new("en").unwrap();
        let records = (0..hate + non_hate)
            .map(|i| {
                let label = if i < hate { Label::Hate } else { Label::NonHate };
                CommentRecord::new(did.clone(), Platform::Twitter, en.clone(), i as u64, format!("text number {i}"), Some(label), vec![])
            })
            .collect();
        Dataset::from_records(did, en, Platform::Twitter, Availability::Open, None, records)
    }

    fn counts(records: &[CommentRecord]) -> (usize, usize) {
        let h = records.iter().filter(|r| r.label == Some(Label::Hate)).count();
        (h, records.len() - h)
    }

    #[test]
    fn split_counts_and_determinism() {
        let d = labeled("EY1", 100, 100);
        let s = stratified_split(&d, 0.7, 5).unwrap();
        assert_eq!(counts(&s.train), (70, 70));
        assert_eq!(counts(&s.test), (30, 30));
        let again = stratified_split(&d, 0.7, 5).unwrap();
        assert_eq!(s.test_fingerprint(), again.test_fingerprint());
        assert_ne!(s.test_fingerprint(), stratified_split(&d, 0.7, 6).unwrap().test_fingerprint());
    }

    #[test]
    fn split_rounds_half_up() {
        assert_eq!(train_count(15, 0.7), 11);
        assert_eq!(train_count(5, 0.7), 4);
        assert_eq!(train_count(2, 0.7), 1);
        assert_eq!(train_count(3, 0.1), 1);
        assert_eq!(train_count(3, 0.99), 2);
    }

    #[test]
    fn split_errors() {
        let d = labeled("EY1", 10, 10);
        assert!(matches!(stratified_split(&d, 1.0, 0), Err(Error::InvalidRatio(_))));
        assert!(matches!(stratified_split(&d, 0.0, 0), Err(Error::InvalidRatio(_))));
        let small = labeled("EY1", 1, 10);
        assert!(matches!(stratified_split(&small, 0.7, 0), Err(Error::ClassTooSmall { count: 1, .. })));
        let mut unl = labeled("EY1", 5, 5);
        unl.records[0].label = None;
        assert!(matches!(stratified_split(&unl, 0.7, 0), Err(Error::UnlabeledRecords { count: 1, .. })));
    }

    #[test]
    fn undersample_rules() {
        let d = labeled("EY1", 50, 200);
        let out = undersample(d.records.clone(), 1).unwrap();
        assert_eq!(counts(&out), (50, 50));
        let hate_ids: BTreeSet<_> = d.records[..50].iter().map(|r| &r.record_id).collect();
        assert!(out.iter().filter(|r| r.label == Some(Label::Hate)).all(|r| hate_ids.contains(&r.record_id)));

        let bal = labeled("EY1", 30, 30);
        let out = undersample(bal.records.clone(), 2).unwrap();
        let mut a: Vec<_> = out.iter().map(|r| r.record_id.clone()).collect();
        let mut b: Vec<_> = bal.records.iter().map(|r| r.record_id.clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);

        let none = labeled("EY1", 0, 10);
        assert!(matches!(undersample(none.records, 0), Err(Error::ClassTooSmall { count: 0, .. })));
    }

    #[test]
    fn pool_rules() {
        let target = labeled("EY1", 50, 50);
        let aug = labeled("ET1", 100, 100);
        let empty = BTreeSet::new();
        let pool = build_training_pool(&target.records, &[&aug], &empty, Sampling::None, SamplingStage::CombinedPool, 0).unwrap();
        assert_eq!(pool.len(), 300);

        let t = labeled("EY1", 40, 60);
        let a = labeled("ET1", 40, 160);
        let pool = build_training_pool(&t.records, &[&a], &empty, Sampling::Undersample, SamplingStage::CombinedPool, 0).unwrap();
        assert_eq!(counts(&pool), (80, 80));
        let per = build_training_pool(&t.records, &[&a], &empty, Sampling::Undersample, SamplingStage::PerDataset, 0).unwrap();
        assert_eq!(counts(&per), (80, 80));

        let leak: BTreeSet<&str> = [a.records[3].record_id.as_str()].into();
        assert!(matches!(
            build_training_pool(&t.records, &[&a], &leak, Sampling::None, SamplingStage::CombinedPool, 0),
            Err(Error::Leakage(_))
        ));
    }

    fn small_spec(target: &str, seed: u64) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(id(target), seed);
        s.features.dimension = 1 << 12;
        s
    }

    fn synthetic_registry() -> Registry {
        let mut reg = Registry::new();
        reg.register(generate(&SyntheticSpec::new(id("EY1"), 200, 1))).unwrap();
        let aug = generate(&SyntheticSpec::new(id("ET1"), 200, 2));
        reg.register(shuffle_labels(&aug, id("ET2"), 3)).unwrap();
        reg.register(aug).unwrap();
        reg
    }

    #[test]
    fn fingerprint_independent_of_augments() {
        let reg = synthetic_registry();
        let base = run_experiment(&small_spec("EY1", 4), &reg).unwrap();
        let aug = run_experiment(&small_spec("EY1", 4).with_augments([id("ET1")]).with_sampling(Sampling::Undersample), &reg).unwrap();
        assert_eq!(base.test_fingerprint, aug.test_fingerprint);
        assert_eq!(base.test_size, aug.test_size);
        assert_eq!(aug.contributions.len(), 2);
        assert_eq!(aug.contributions.iter().map(|c| c.records).sum::<usize>(), aug.train_size);
    }

    #[test]
    fn experiment_errors() {
        let reg = synthetic_registry();
        assert!(matches!(run_experiment(&small_spec("EY9", 0), &reg), Err(Error::UnknownDataset(_))));
        let self_aug = small_spec("EY1", 0).with_augments([id("EY1")]);
        assert!(matches!(run_experiment(&self_aug, &reg), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn grid_validates_first_and_is_worker_independent() {
        let reg = synthetic_registry();
        let specs = vec![
            small_spec("EY1", 0),
            small_spec("EY1", 0).with_augments([id("ET1")]),
            small_spec("EY1", 0).with_augments([id("ET2")]).with_sampling(Sampling::Undersample),
        ];
        let one = run_grid(&specs, 11, &reg, 1).unwrap();
        let four = run_grid(&specs, 11, &reg, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.len(), 3);
        let mut bad = specs.clone();
        bad.push(small_spec("GY1", 0));
        assert!(matches!(run_grid(&bad, 11, &reg, 2), Err(Error::UnknownDataset(_))));
        assert!(run_grid(&[], 11, &reg, 2).unwrap().is_empty());
    }

    #[test]
    fn grid_file_defaults() {
        let text = r#"
            seed = 7
            split_ratio = 0.8

            [[experiment]]
            target = "EY1"

            [[experiment]]
            target = "EY1"
            augments = ["ET4", "EG1"]
            sampling = "undersample"
            seed = 3
        "#;
        let grid = Grid::from_toml(text).unwrap();
        let specs = grid.specs(&ExperimentSpecDefaults::default());
        assert_eq!(specs.len(), 2);
        assert_eq!((specs[0].seed, specs[0].split_ratio), (7, 0.8));
        assert_eq!(specs[1].seed, 3);
        assert_eq!(specs[1].training_label(), "EY1+ET4+EG1");
        assert!(Grid::from_toml("seed = 1\nbogus = 2\n").is_err());
    }

    #[test]
    fn synthetic_generator_shape() {
        let d = generate(&SyntheticSpec::new(id("EY1"), 500, 9));
        assert_eq!(d.len(), 500);
        assert_eq!(counts(&d.records), (200, 300));
        assert_eq!(d, generate(&SyntheticSpec::new(id("EY1"), 500, 9)));
        let s = shuffle_labels(&d, id("EY2"), 1);
        assert_eq!(counts(&s.records), (200, 300));
        assert!(s.records.iter().all(|r| r.dataset_id == id("EY2")));
    }

    #[test]
    fn training_objective_nonincreasing() {
        let d = generate(&SyntheticSpec::new(id("EY1"), 500, 21));
        let docs: Vec<Vec<String>> = d.records.iter().map(|r| tokenize(&r.clean_text)).collect();
        let labels: Vec<Label> = d.records.iter().map(|r| r.label.unwrap()).collect();
        let idf = crate::features::IdfTable::fit(&docs, FeatureConfig::default()).unwrap();
        let xs: Vec<_> = docs.iter().map(|t| idf.vectorize(t)).collect();
        let (_, history) = crate::model::train_with_history(&xs, &labels, Hyperparams::default()).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-3, "{history:?}");
        }
    }
}
