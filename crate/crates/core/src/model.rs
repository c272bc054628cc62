//! Native logistic-regression classifier, binary metrics with Hate as the
//! positive class, and import of externally produced predictions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector, IdfTable, Weighting};

/// Probability at or above which a prediction is Hate.
pub const DECISION_THRESHOLD: f64 = 0.5;

const MODEL_HEADER: &str = "crossplat-model 1";
const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            epochs: 10,
            l2_penalty: 1e-5,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && self.l2_penalty.is_finite()
            && self.l2_penalty >= 0.0
            && self.learning_rate * self.l2_penalty < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "hyperparameters need learning_rate > 0, l2_penalty >= 0 and learning_rate * l2_penalty < 1 (got {} and {})",
                self.learning_rate, self.l2_penalty
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn target(label: Label) -> f64 {
    if label.is_hate() {
        1.0
    } else {
        0.0
    }
}

fn check_dimension(expected: usize, v: &FeatureVector) -> Result<()> {
    if v.dimension() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.dimension(),
        });
    }
    Ok(())
}

impl LinearModel {
    pub fn zeros(dimension: usize, hyperparams: Hyperparams) -> Self {
        LinearModel {
            weights: vec![0.0; dimension],
            bias: 0.0,
            hyperparams,
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_value(&self, x: &FeatureVector) -> Result<f64> {
        check_dimension(self.dimension(), x)?;
        Ok(x.dot_dense(&self.weights) + self.bias)
    }

    /// Label and Hate probability; Hate iff p >= 0.5.
    pub fn predict(&self, x: &FeatureVector) -> Result<(Label, f64)> {
        let p = sigmoid(self.decision_value(x)?);
        Ok((label_for(p), p))
    }

    /// Mean logistic loss plus (l2/2)·‖w‖², and its gradient.
    pub fn loss_and_gradient(&self, batch: &[(FeatureVector, Label)]) -> Result<(f64, Gradient)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len() as f64;
        let l2 = self.hyperparams.l2_penalty;
        let mut loss = 0.0;
        let mut grad = Gradient {
            weights: vec![0.0; self.dimension()],
            bias: 0.0,
        };
        for (x, label) in batch {
            let z = self.decision_value(x)?;
            let y = target(*label);
            loss += softplus(z) - y * z;
            let residual = sigmoid(z) - y;
            for &(i, v) in x.entries() {
                grad.weights[i as usize] += residual * v / n;
            }
            grad.bias += residual / n;
        }
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        grad.weights
            .iter_mut()
            .zip(&self.weights)
            .for_each(|(g, w)| *g += l2 * w);
        Ok((loss / n + 0.5 * l2 * sq, grad))
    }

    pub fn to_text(&self, config: &FeatureConfig, idf: Option<&IdfTable>) -> String {
        let hp = &self.hyperparams;
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "dimension {}", self.dimension());
        let _ = writeln!(out, "hash_seed {}", config.hash_seed);
        let _ = writeln!(out, "weighting {}", weighting_name(config.weighting));
        let _ = writeln!(out, "learning_rate {}", hp.learning_rate);
        let _ = writeln!(out, "epochs {}", hp.epochs);
        let _ = writeln!(out, "l2_penalty {}", hp.l2_penalty);
        let _ = writeln!(out, "seed {}", hp.seed);
        match idf {
            Some(t) => {
                let _ = writeln!(out, "document_count {}", t.document_count());
                let _ = writeln!(out, "document_frequencies {}", t.document_frequencies().len());
                for (b, df) in t.document_frequencies() {
                    let _ = writeln!(out, "{b} {df}");
                }
            }
            None => {
                let _ = writeln!(out, "document_count none");
            }
        }
        let _ = writeln!(out, "bias {}", self.bias);
        let _ = writeln!(out, "weights");
        for w in &self.weights {
            let _ = writeln!(out, "{w}");
        }
        out
    }
}

fn label_for(p: f64) -> Label {
    if p >= DECISION_THRESHOLD {
        Label::Hate
    } else {
        Label::NonHate
    }
}

fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::TfIdf => "tf_idf",
        Weighting::TermCount => "term_count",
    }
}

/// Per-example SGD over seeded per-epoch shuffles.
pub fn train(vectors: &[FeatureVector], labels: &[Label], hyperparams: Hyperparams) -> Result<LinearModel> {
    train_with_history(vectors, labels, hyperparams).map(|(m, _)| m)
}

/// Like [`train`], also returning the full-data objective after each epoch.
pub fn train_with_history(
    vectors: &[FeatureVector],
    labels: &[Label],
    hyperparams: Hyperparams,
) -> Result<(LinearModel, Vec<f64>)> {
    hyperparams.validate()?;
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    let first = vectors.first().ok_or(Error::EmptyBatch)?;
    let dimension = first.dimension();
    for v in vectors {
        check_dimension(dimension, v)?;
    }
    let hate = labels.iter().filter(|l| l.is_hate()).count();
    if hate == 0 || hate == labels.len() {
        return Err(Error::SingleClass(labels[0].to_string()));
    }

    let lr = hyperparams.learning_rate;
    let decay = 1.0 - lr * hyperparams.l2_penalty;
    // w = scale * v keeps the L2 shrink O(1) per step
    let mut v = vec![0.0f64; dimension];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let mut history = Vec::with_capacity(hyperparams.epochs);

    for _ in 0..hyperparams.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let x = &vectors[k];
            let z = scale * x.dot_dense(&v) + bias;
            let residual = sigmoid(z) - target(labels[k]);
            scale *= decay;
            let step = lr * residual / scale;
            for &(i, xi) in x.entries() {
                v[i as usize] -= step * xi;
            }
            bias -= lr * residual;
            if scale < MIN_SCALE {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        history.push(objective(vectors, labels, &v, scale, bias, hyperparams.l2_penalty));
    }

    let weights = v.into_iter().map(|w| w * scale).collect();
    Ok((
        LinearModel {
            weights,
            bias,
            hyperparams,
        },
        history,
    ))
}

fn objective(vectors: &[FeatureVector], labels: &[Label], v: &[f64], scale: f64, bias: f64, l2: f64) -> f64 {
    let data: f64 = vectors
        .iter()
        .zip(labels)
        .map(|(x, l)| {
            let z = scale * x.dot_dense(v) + bias;
            softplus(z) - target(*l) * z
        })
        .sum();
    let sq: f64 = v.iter().map(|w| w * w).sum::<f64>() * scale * scale;
    data / vectors.len() as f64 + 0.5 * l2 * sq
}

/// A linear model together with the feature pipeline it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TextClassifier {
    pub idf: IdfTable,
    pub model: LinearModel,
}

impl TextClassifier {
    /// Fits the IDF on `documents` (token lists), vectorizes and trains.
    pub fn train<S: AsRef<str>>(
        documents: &[Vec<S>],
        labels: &[Label],
        config: FeatureConfig,
        hyperparams: Hyperparams,
    ) -> Result<Self> {
        config.validate()?;
        if documents.len() != labels.len() {
            return Err(Error::LengthMismatch {
                vectors: documents.len(),
                labels: labels.len(),
            });
        }
        let idf = IdfTable::fit(documents, config)?;
        let vectors: Vec<FeatureVector> = documents.iter().map(|d| idf.vectorize(d)).collect();
        let model = train(&vectors, labels, hyperparams)?;
        Ok(TextClassifier { idf, model })
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> (Label, f64) {
        self.model
            .predict(&self.idf.vectorize(tokens))
            .expect("idf and model share a dimension")
    }

    pub fn to_text(&self) -> String {
        self.model.to_text(self.idf.config(), Some(&self.idf))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::InvalidModelFile {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let bad = |line: usize, message: String| Error::InvalidModelFile { line, message };

        let (n, header) = next("header")?;
        if header.trim() != MODEL_HEADER {
            return Err(bad(n, format!("expected header `{MODEL_HEADER}`")));
        }
        fn field<'a>(entry: (usize, &'a str), key: &str) -> Result<(usize, &'a str)> {
            let (n, line) = entry;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim())),
                _ => Err(Error::InvalidModelFile {
                    line: n,
                    message: format!("expected `{key} <value>`"),
                }),
            }
        }
        fn value<T: std::str::FromStr>(entry: (usize, &str), key: &str) -> Result<T> {
            let (n, v) = field(entry, key)?;
            v.parse().map_err(|_| Error::InvalidModelFile {
                line: n,
                message: format!("invalid value `{v}` for {key}"),
            })
        }

        let dimension: usize = value(next("dimension")?, "dimension")?;
        let hash_seed: u64 = value(next("hash_seed")?, "hash_seed")?;
        let (wn, w) = field(next("weighting")?, "weighting")?;
        let weighting = match w {
            "tf_idf" => Weighting::TfIdf,
            "term_count" => Weighting::TermCount,
            other => return Err(bad(wn, format!("unknown weighting `{other}`"))),
        };
        let hyperparams = Hyperparams {
            learning_rate: value(next("learning_rate")?, "learning_rate")?,
            epochs: value(next("epochs")?, "epochs")?,
            l2_penalty: value(next("l2_penalty")?, "l2_penalty")?,
            seed: value(next("seed")?, "seed")?,
        };
        let config = FeatureConfig {
            dimension,
            hash_seed,
            weighting,
        };
        config.validate().map_err(|e| bad(2, e.to_string()))?;

        let dc_line = next("document_count")?;
        let (dn, dc) = field(dc_line, "document_count")?;
        if dc == "none" {
            return Err(bad(dn, "model file carries no IDF table".into()));
        }
        let document_count: usize = dc.parse().map_err(|_| bad(dn, format!("invalid document count `{dc}`")))?;
        let entries: usize = value(next("document_frequencies")?, "document_frequencies")?;
        let mut df = BTreeMap::new();
        for _ in 0..entries {
            let (n, line) = next("document frequency entry")?;
            let parsed = line
                .split_once(' ')
                .and_then(|(b, d)| Some((b.parse::<u32>().ok()?, d.parse::<usize>().ok()?)));
            let (b, d) = parsed.ok_or_else(|| bad(n, format!("expected `<bucket> <count>`, got `{line}`")))?;
            if df.insert(b, d).is_some() {
                return Err(bad(n, format!("duplicate bucket {b}")));
            }
        }
        let idf = IdfTable::from_parts(config, document_count, df).map_err(|e| bad(dn, e.to_string()))?;

        let bias: f64 = value(next("bias")?, "bias")?;
        let (n, w) = next("weights")?;
        if w.trim() != "weights" {
            return Err(bad(n, "expected `weights`".into()));
        }
        let mut weights = Vec::with_capacity(dimension);
        for (n, line) in lines.by_ref() {
            let w: f64 = line.trim().parse().map_err(|_| bad(n, format!("invalid weight `{line}`")))?;
            if !w.is_finite() {
                return Err(bad(n, "non-finite weight".into()));
            }
            weights.push(w);
        }
        if weights.len() != dimension {
            return Err(bad(0, format!("expected {dimension} weights, found {}", weights.len())));
        }
        Ok(TextClassifier {
            idf,
            model: LinearModel {
                weights,
                bias,
                hyperparams,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    fn from_counts(correct: usize, predicted: usize, actual: usize) -> Self {
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub hate: ClassMetrics,
    pub non_hate: ClassMetrics,
    pub macro_f1: f64,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let hate = ClassMetrics::from_counts(c.true_pos, c.true_pos + c.false_pos, c.true_pos + c.false_neg);
        let non_hate = ClassMetrics::from_counts(c.true_neg, c.true_neg + c.false_neg, c.true_neg + c.false_pos);
        Metrics {
            confusion: c,
            hate,
            non_hate,
            macro_f1: (hate.f1 + non_hate.f1) / 2.0,
        }
    }
}

pub fn evaluate(predicted: &[Label], gold: &[Label]) -> Result<Metrics> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            vectors: predicted.len(),
            labels: gold.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = Confusion::default();
    for (p, g) in predicted.iter().zip(gold) {
        match (p.is_hate(), g.is_hate()) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(Metrics::from_confusion(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub probability: f64,
    pub label: Label,
}

impl Prediction {
    pub fn new(record_id: impl Into<String>, probability: f64) -> Result<Self> {
        let record_id = record_id.into();
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::InvalidProbability {
                record_id,
                value: probability,
            });
        }
        Ok(Prediction {
            record_id,
            probability,
            label: label_for(probability),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRow {
    record_id: String,
    probability: f64,
}

/// Reads `record_id,probability` rows.
pub fn parse_predictions(bytes: &[u8], source: &Path) -> Result<Vec<Prediction>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in reader.deserialize::<PredictionRow>() {
        let row = row.map_err(|e| Error::MalformedRow {
            path: source.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if !seen.insert(row.record_id.clone()) {
            return Err(Error::DuplicateRecord(row.record_id));
        }
        out.push(Prediction::new(row.record_id, row.probability)?);
    }
    Ok(out)
}

pub fn import_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&bytes, path)
}

pub fn predictions_to_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("record_id,probability\n");
    for p in predictions {
        let _ = writeln!(out, "{},{}", p.record_id, p.probability);
    }
    out
}

/// Metrics of `predictions` against gold labels keyed by record id.
pub fn evaluate_predictions(predictions: &[Prediction], gold: &BTreeMap<String, Label>) -> Result<Metrics> {
    let mut pred = Vec::with_capacity(predictions.len());
    let mut truth = Vec::with_capacity(predictions.len());
    for p in predictions {
        let g = gold
            .get(&p.record_id)
            .ok_or_else(|| Error::UnknownRecord(p.record_id.clone()))?;
        pred.push(p.label);
        truth.push(*g);
    }
    evaluate(&pred, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use Label::{Hate as H, NonHate as N};

    fn vec_of(dim: usize, entries: &[(u32, f64)]) -> FeatureVector {
        FeatureVector::from_entries(dim, entries.iter().copied()).unwrap()
    }

    fn toy() -> (Vec<FeatureVector>, Vec<Label>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            xs.push(vec_of(8, &[(0, 1.0), ((i % 3) as u32 + 4, 0.3)]).normalized());
            ys.push(H);
            xs.push(vec_of(8, &[(1, 1.0), ((i % 3) as u32 + 4, 0.3)]).normalized());
            ys.push(N);
        }
        (xs, ys)
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let m = LinearModel::zeros(4, Hyperparams::default());
        let (loss, _) = m.loss_and_gradient(&[(vec_of(4, &[(1, 0.7)]), H)]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(m.loss_and_gradient(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn duplicate_example_same_gradient() {
        let mut m = LinearModel::zeros(4, Hyperparams::default());
        m.weights = vec![0.3, -0.2, 0.1, 0.5];
        m.bias = -0.1;
        let ex = (vec_of(4, &[(0, 0.6), (3, 0.8)]), H);
        let (l1, g1) = m.loss_and_gradient(std::slice::from_ref(&ex)).unwrap();
        let (l2, g2) = m.loss_and_gradient(&[ex.clone(), ex]).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.weights.iter().zip(&g2.weights) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((g1.bias - g2.bias).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let dim = 8;
            let hp = Hyperparams { l2_penalty: rng.gen_range(0.0..0.1), ..Hyperparams::default() };
            let mut m = LinearModel::zeros(dim, hp);
            m.weights = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.bias = rng.gen_range(-1.0..1.0);
            let batch: Vec<(FeatureVector, Label)> = (0..5)
                .map(|_| {
                    let e: Vec<(u32, f64)> = (0..3).map(|_| (rng.gen_range(0..dim as u32), rng.gen_range(-1.0..1.0))).collect();
                    (vec_of(dim, &e), if rng.gen_bool(0.5) { H } else { N })
                })
                .collect();
            let (_, g) = m.loss_and_gradient(&batch).unwrap();
            for i in 0..=dim {
                let eval = |delta: f64| {
                    let mut p = m.clone();
                    if i == dim { p.bias += delta } else { p.weights[i] += delta }
                    p.loss_and_gradient(&batch).unwrap().0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = if i == dim { g.bias } else { g.weights[i] };
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-7));
            }
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn predict_threshold_and_limits() {
        let m = LinearModel::zeros(4, Hyperparams::default());
        assert_eq!(m.predict(&FeatureVector::zeros(4)).unwrap(), (H, 0.5));
        let mut big = m.clone();
        big.bias = 800.0;
        let (l, p) = big.predict(&FeatureVector::zeros(4)).unwrap();
        assert_eq!((l, p), (H, 1.0));
        big.bias = -800.0;
        assert_eq!(big.predict(&FeatureVector::zeros(4)).unwrap().1, 0.0);
        assert!(matches!(m.predict(&FeatureVector::zeros(8)), Err(Error::DimensionMismatch { expected: 4, found: 8 })));
    }

    #[test]
    fn training_separates_and_is_deterministic() {
        let (xs, ys) = toy();
        let hp = Hyperparams { seed: 3, epochs: 30, learning_rate: 0.5, ..Hyperparams::default() };
        let a = train(&xs, &ys, hp).unwrap();
        let b = train(&xs, &ys, hp).unwrap();
        assert_eq!(a, b);
        let pred: Vec<Label> = xs.iter().map(|x| a.predict(x).unwrap().0).collect();
        assert_eq!(evaluate(&pred, &ys).unwrap().macro_f1, 1.0);
    }

    #[test]
    fn lazy_decay_matches_explicit_sgd() {
        let (xs, ys) = toy();
        let hp = Hyperparams { seed: 1, epochs: 3, l2_penalty: 0.01, learning_rate: 0.2 };
        let lazy = train(&xs, &ys, hp).unwrap();
        let mut w = vec![0.0; 8];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            order.shuffle(&mut rng);
            for &k in &order {
                let r = sigmoid(xs[k].dot_dense(&w) + b) - target(ys[k]);
                let mut g: Vec<f64> = w.iter().map(|wi| hp.l2_penalty * wi).collect();
                for &(i, v) in xs[k].entries() {
                    g[i as usize] += r * v;
                }
                w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= hp.learning_rate * gi);
                b -= hp.learning_rate * r;
            }
        }
        for (a, e) in lazy.weights.iter().zip(&w) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((lazy.bias - b).abs() < 1e-12);
    }

    #[test]
    fn training_errors() {
        let (xs, _) = toy();
        let all_hate = vec![H; xs.len()];
        assert!(matches!(train(&xs, &all_hate, Hyperparams::default()), Err(Error::SingleClass(_))));
        assert!(matches!(train(&xs, &all_hate[..3], Hyperparams::default()), Err(Error::LengthMismatch { .. })));
        let mixed = vec![FeatureVector::zeros(8), FeatureVector::zeros(4)];
        assert!(matches!(train(&mixed, &[H, N], Hyperparams::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn metric_examples() {
        // tp=3 fp=1 fn=1 tn=5
        let pred = [H, H, H, H, N, N, N, N, N, N];
        let gold = [H, H, H, N, H, N, N, N, N, N];
        let m = evaluate(&pred, &gold).unwrap();
        assert_eq!(m.confusion, Confusion { true_pos: 3, false_pos: 1, false_neg: 1, true_neg: 5 });
        assert_eq!((m.hate.precision, m.hate.recall, m.hate.f1), (0.75, 0.75, 0.75));
        let perfect = evaluate(&gold, &gold).unwrap();
        assert_eq!(perfect.macro_f1, 1.0);
        assert!(matches!(evaluate(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(evaluate(&[H], &[H, N]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn constant_classifier_on_balanced_set() {
        let gold = [H, N, H, N];
        let m = evaluate(&[H; 4], &gold).unwrap();
        // hate F1 = 2·0.5·1/1.5 = 2/3, non-hate F1 = 0
        assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn prediction_import() {
        let text = "record_id,probability\na,0.9\nb,0.2\nc,0.5\n";
        let p = parse_predictions(text.as_bytes(), Path::new("p.csv")).unwrap();
        assert_eq!(p.iter().map(|x| x.label).collect::<Vec<_>>(), vec![H, N, H]);
        assert!(matches!(
            parse_predictions(b"record_id,probability\na,1.7\n", Path::new("p.csv")),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(matches!(
            parse_predictions(b"record_id,probability\na,0.1\na,0.2\n", Path::new("p.csv")),
            Err(Error::DuplicateRecord(_))
        ));
        let gold: BTreeMap<String, Label> = [("a".to_string(), H), ("b".to_string(), N)].into();
        match evaluate_predictions(&p, &gold) {
            Err(Error::UnknownRecord(id)) => assert_eq!(id, "c"),
            other => panic!("{other:?}"),
        }
        assert_eq!(evaluate_predictions(&p[..2], &gold).unwrap().macro_f1, 1.0);
        let round = parse_predictions(predictions_to_csv(&p).as_bytes(), Path::new("x")).unwrap();
        assert_eq!(round, p);
    }

    #[test]
    fn model_file_round_trip() {
        let docs: Vec<Vec<&str>> = vec![vec!["vile", "scum"], vec!["lovely", "day"], vec!["scum", "again"], vec!["nice", "day"]];
        let labels = [H, N, H, N];
        let config = FeatureConfig { dimension: 64, ..FeatureConfig::default() };
        let clf = TextClassifier::train(&docs, &labels, config, Hyperparams { seed: 9, ..Hyperparams::default() }).unwrap();
        let back = TextClassifier::parse(&clf.to_text()).unwrap();
        assert_eq!(back, clf);
        assert_eq!(back.to_text(), clf.to_text());
        assert!(matches!(TextClassifier::parse("nope"), Err(Error::InvalidModelFile { line: 1, .. })));
        let truncated: String = clf.to_text().lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(TextClassifier::parse(&truncated).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn labels(n: usize) -> impl Strategy<Value = Vec<Label>> {
            prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { H } else { N }), n)
        }

        proptest! {
            #[test]
            fn evaluate_permutation_invariant(
                (pred, gold) in (1usize..50).prop_flat_map(|n| (labels(n), labels(n))),
                seed in any::<u64>(),
            ) {
                let mut idx: Vec<usize> = (0..pred.len()).collect();
                idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let p2: Vec<Label> = idx.iter().map(|&i| pred[i]).collect();
                let g2: Vec<Label> = idx.iter().map(|&i| gold[i]).collect();
                prop_assert_eq!(evaluate(&pred, &gold).unwrap(), evaluate(&p2, &g2).unwrap());
            }
        }
    }
}
