use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use crossplat_core::annotation::{
    collect_hate_word_marks, majority_vote, reliability_summary, AnnotationSheet, KappaAggregate,
};
use crossplat_core::corpus::{
    parse_dataset_file, Dataset, DatasetId, Label, LanguageCode, LanguageIdentifier, LanguageProfile, Mapping,
    Registry,
};
use crossplat_core::experiments::{
    run_grid, stratified_split, undersample, ExperimentSpecDefaults, Grid,
};
use crossplat_core::features::{load_embedding_table, tokenize, EmbeddingTable, Weighting};
use crossplat_core::lexicon::{export_terms, extract_hate_words, Lexicon};
use crossplat_core::model::{
    evaluate_predictions, import_predictions, predictions_to_csv, Hyperparams, Metrics, Prediction, TextClassifier,
};
use crossplat_core::report::{
    export_results, parse_results, render_results_table, render_similarity_matrix, render_stats_table, Format,
    ReportDocument,
};
use crossplat_core::similarity::{
    content_similarity, definition_similarity, hate_word_similarity, load_votes, similarity_matrix, Embedder,
    MeasureInputs, OverlapMode, SimilarityMatrix, SurveyVote,
};
use crossplat_core::corpus::clean_text;
use crossplat_core::hashing::derive_seed;

use crate::config::Config;
use crate::{
    AdjudicateArgs, Aggregate, Cli, Command, ContentOpts, EvaluateArgs, GridArgs, ImportArgs, IngestArgs,
    LexiconCommand, MeasureArg, OutputFormat, Overlap, PredictArgs, ReportArgs, SimilarityCommand,
    SplitArgs, StatsArgs, TrainArgs,
};

/// Error caused by invocation or configuration rather than by the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

struct Session {
    config: Config,
}

pub fn run(cli: Cli) -> Result<()> {
    let (config, source) = Config::resolve(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    match &source {
        Some(p) => log::info!("config {}:\n{}", p.display(), config.to_toml().trim_end()),
        None => log::info!("config (defaults):\n{}", config.to_toml().trim_end()),
    }
    let ctx = Session { config };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::Adjudicate(a) => adjudicate(a),
        Command::Lexicon(c) => lexicon(&ctx, c),
        Command::Similarity(c) => similarity(&ctx, c),
        Command::Split(a) => split(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::ImportPredictions(a) => import(&ctx, a),
        Command::Grid(a) => grid(&ctx, a),
        Command::Report(a) => report(a),
    }
}

fn format_of(f: OutputFormat) -> Format {
    match f {
        OutputFormat::Markdown => Format::Markdown,
        OutputFormat::Csv => Format::Csv,
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn language(code: &str) -> Result<LanguageCode> {
    LanguageCode::new(code).map_err(|e| usage(e.to_string()))
}

impl Session {
    /// A dataset argument is a file path or an id resolved in the data directory.
    fn dataset(&self, arg: &str) -> Result<Dataset> {
        let path = PathBuf::from(arg);
        if path.exists() {
            return Ok(Dataset::read_canonical(&path)?);
        }
        if let (Ok(id), Some(dir)) = (DatasetId::new(arg), &self.config.data_dir) {
            let p = dir.join(format!("{id}.ds"));
            return Ok(Dataset::read_canonical(&p)?);
        }
        Err(anyhow!("dataset `{arg}` is neither a file nor an id in the data directory"))
    }

    fn identifier(&self) -> Result<LanguageIdentifier> {
        let mut id = LanguageIdentifier::builtin().clone();
        for (lang, path) in &self.config.language_profiles {
            id.add_profile(LanguageProfile::load(path, language(lang)?)?);
        }
        Ok(id)
    }

    fn lexicon(&self, explicit: Option<&Path>, lang: &LanguageCode) -> Result<Lexicon> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => self
                .config
                .lexicons
                .get(lang.as_str())
                .cloned()
                .ok_or_else(|| usage(format!("no --lexicon given and no lexicon configured for `{lang}`")))?,
        };
        Ok(Lexicon::load(&path, lang.clone())?)
    }

    fn min_seconds(&self, flag: Option<f64>) -> f64 {
        flag.unwrap_or(self.config.min_response_seconds)
    }
}

fn ingest(ctx: &Session, a: IngestArgs) -> Result<()> {
    let mapping = Mapping::load(&a.mapping).map_err(|e| usage(e.to_string()))?;
    let mut dataset = parse_dataset_file(&a.input, &mapping)?;
    if let Some(code) = &a.filter_language {
        dataset = dataset.filter_language(&language(code)?, &ctx.identifier()?);
    }
    dataset.write_canonical(&a.out)?;
    println!(
        "{}\t{} records\t{:.4} hate\t{}",
        dataset.id(),
        dataset.meta.size,
        dataset.meta.hate_fraction,
        a.out.display()
    );
    Ok(())
}

fn stats(ctx: &Session, a: StatsArgs) -> Result<()> {
    let registry = if a.datasets.is_empty() {
        let dir = a
            .data_dir
            .or_else(|| ctx.config.data_dir.clone())
            .ok_or_else(|| usage("give dataset files or a data directory"))?;
        Registry::load_dir(&dir)?
    } else {
        let mut r = Registry::new();
        for d in &a.datasets {
            r.register(ctx.dataset(d)?)?;
        }
        r
    };
    print!("{}", render_stats_table(&registry.stats()?, format_of(a.format)));
    Ok(())
}

fn adjudicate(a: AdjudicateArgs) -> Result<()> {
    let sheets: Vec<AnnotationSheet> = a.sheets.iter().map(|p| AnnotationSheet::load(p)).collect::<Result<_, _>>()?;
    let gold = majority_vote(&sheets)?;
    fs::write(&a.out, gold.to_csv()).with_context(|| format!("cannot write {}", a.out.display()))?;
    let method = match a.aggregate {
        Aggregate::Mean => KappaAggregate::Mean,
        Aggregate::Min => KappaAggregate::Min,
    };
    let summary = reliability_summary(&sheets, method)?;
    println!("records\t{}", gold.labels.len());
    for i in 0..summary.annotators.len() {
        for j in i + 1..summary.annotators.len() {
            println!(
                "kappa\t{}\t{}\t{:.4}",
                summary.annotators[i], summary.annotators[j], summary.pairwise[i][j]
            );
        }
    }
    println!("kappa_{}\t{:.4}", if method == KappaAggregate::Mean { "mean" } else { "min" }, summary.aggregate);
    if let Some(path) = a.hate_words {
        let marks = collect_hate_word_marks(&sheets);
        fs::write(&path, export_terms(&marks)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn lexicon(ctx: &Session, c: LexiconCommand) -> Result<()> {
    match c {
        LexiconCommand::Merge {
            language: lang,
            base,
            extra,
            out,
        } => {
            let lang = language(&lang)?;
            let mut lex = Lexicon::load(&base, lang.clone())?;
            for e in &extra {
                lex = lex.merge(&Lexicon::load(e, lang.clone())?)?;
            }
            write_output(out.as_deref(), &lex.to_text())
        }
        LexiconCommand::Extract { dataset, lexicon, out } => {
            let d = ctx.dataset(&dataset)?;
            let lex = ctx.lexicon(lexicon.as_deref(), &d.meta.language)?;
            write_output(out.as_deref(), &export_terms(&extract_hate_words(&d, &lex)?))
        }
    }
}

fn embedder<'a>(ctx: &Session, opts: &ContentOpts, table: &'a Option<EmbeddingTable>) -> Embedder<'a> {
    match table {
        Some(t) => Embedder::Table(t),
        None => {
            let mut cfg = ctx.config.features;
            if opts.term_count {
                cfg.weighting = Weighting::TermCount;
            }
            Embedder::Hashed(cfg)
        }
    }
}

fn overlap_mode(o: Overlap) -> OverlapMode {
    match o {
        Overlap::Union => OverlapMode::Union,
        Overlap::Sum => OverlapMode::Sum,
    }
}

fn pair_votes(votes: &[SurveyVote], a: &DatasetId, b: &DatasetId) -> Vec<SurveyVote> {
    votes.iter().filter(|v| v.is_for(a, b)).cloned().collect()
}

fn similarity(ctx: &Session, c: SimilarityCommand) -> Result<()> {
    match c {
        SimilarityCommand::Content { a, b, opts } => {
            let (da, db) = (ctx.dataset(&a)?, ctx.dataset(&b)?);
            let table = opts.embeddings.as_deref().map(load_embedding_table).transpose()?;
            println!("{:.6}", content_similarity(&da, &db, embedder(ctx, &opts, &table))?);
        }
        SimilarityCommand::Hatewords { a, b, opts } => {
            let (da, db) = (ctx.dataset(&a)?, ctx.dataset(&b)?);
            let lex = ctx.lexicon(opts.lexicon.as_deref(), &da.meta.language)?;
            println!("{:.6}", hate_word_similarity(&da, &db, &lex, overlap_mode(opts.overlap))?);
        }
        SimilarityCommand::Definition {
            votes,
            a,
            b,
            min_seconds,
        } => {
            let ida = DatasetId::new(&a).map_err(|e| usage(e.to_string()))?;
            let idb = DatasetId::new(&b).map_err(|e| usage(e.to_string()))?;
            let all = load_votes(&votes)?;
            let v = pair_votes(&all, &ida, &idb);
            println!("{:.6}", definition_similarity(&v, ctx.min_seconds(min_seconds))?);
        }
        SimilarityCommand::Matrix {
            measure,
            datasets,
            content,
            lexicon,
            votes,
            min_seconds,
            format,
            out,
            json,
        } => {
            let loaded: Vec<Dataset> = datasets.iter().map(|d| ctx.dataset(d)).collect::<Result<_>>()?;
            let refs: Vec<&Dataset> = loaded.iter().collect();
            let table = content.embeddings.as_deref().map(load_embedding_table).transpose()?;
            let lex;
            let vote_list;
            let inputs = match measure {
                MeasureArg::Content => MeasureInputs::Content(embedder(ctx, &content, &table)),
                MeasureArg::Hatewords => {
                    lex = ctx.lexicon(lexicon.lexicon.as_deref(), &loaded[0].meta.language)?;
                    MeasureInputs::HateWord {
                        lexicon: &lex,
                        mode: overlap_mode(lexicon.overlap),
                    }
                }
                MeasureArg::Definition => {
                    let path = votes.ok_or_else(|| usage("--votes is required for the definition measure"))?;
                    vote_list = load_votes(&path)?;
                    MeasureInputs::Definition {
                        votes: &vote_list,
                        min_response_seconds: ctx.min_seconds(min_seconds),
                    }
                }
            };
            let matrix = similarity_matrix(&refs, inputs)?;
            if let Some(p) = json {
                fs::write(&p, serde_json::to_string_pretty(&matrix)? + "\n")
                    .with_context(|| format!("cannot write {}", p.display()))?;
            }
            write_output(out.as_deref(), &render_similarity_matrix(&matrix, format_of(format)))?;
        }
    }
    Ok(())
}

fn split(ctx: &Session, a: SplitArgs) -> Result<()> {
    let d = ctx.dataset(&a.dataset)?;
    let ratio = a.ratio.unwrap_or(ctx.config.split_ratio);
    let s = stratified_split(&d, ratio, a.seed.unwrap_or(ctx.config.seed))?;
    d.with_records(s.train.clone()).write_canonical(&a.train_out)?;
    d.with_records(s.test.clone()).write_canonical(&a.test_out)?;
    println!("train\t{}\ntest\t{}\nfingerprint\t{}", s.train.len(), s.test.len(), s.test_fingerprint());
    Ok(())
}

fn train(ctx: &Session, a: TrainArgs) -> Result<()> {
    let mut records = Vec::new();
    for d in &a.datasets {
        let ds = ctx.dataset(d)?;
        records.extend(ds.records.into_iter().filter(|r| r.label.is_some()));
    }
    if records.is_empty() {
        bail!("no labeled records in the training datasets");
    }
    let seed = a.seed.unwrap_or(ctx.config.seed);
    if a.undersample {
        records = undersample(records, derive_seed(seed, b"sample"))?;
    }
    let docs: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.clean_text)).collect();
    let labels: Vec<Label> = records.iter().map(|r| r.label.expect("filtered")).collect();
    let hp = Hyperparams {
        seed: a.seed.unwrap_or(ctx.config.model.seed),
        ..ctx.config.model
    };
    let clf = TextClassifier::train(&docs, &labels, ctx.config.features, hp)?;
    clf.save(&a.out)?;
    println!("trained on {} records\t{}", records.len(), a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let clf = TextClassifier::load(&a.model)?;
    if let Some(text) = &a.text {
        let (label, p) = clf.predict_tokens(&tokenize(&clean_text(text)));
        return write_output(a.out.as_deref(), &format!("{label}\t{p}\n"));
    }
    let arg = a.dataset.as_deref().expect("clap requires dataset or text");
    let d = Dataset::read_canonical(Path::new(arg))?;
    let predictions: Vec<Prediction> = d
        .records
        .iter()
        .map(|r| Prediction::new(r.record_id.clone(), clf.predict_tokens(&tokenize(&r.clean_text)).1))
        .collect::<Result<_, _>>()?;
    write_output(a.out.as_deref(), &predictions_to_csv(&predictions))
}

/// Gold labels from a dataset (file or id) or a gold CSV with `record_id,label`.
fn gold_labels(ctx: &Session, arg: &str) -> Result<BTreeMap<String, Label>> {
    let path = Path::new(arg);
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if !is_csv {
        let d = ctx.dataset(arg)?;
        return Ok(d
            .records
            .iter()
            .filter_map(|r| r.label.map(|l| (r.record_id.clone(), l)))
            .collect());
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
    };
    let (id_col, label_col) = (col("record_id")?, col("label")?);
    let mut gold = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let label: Label = row[label_col]
            .parse()
            .map_err(|e: String| anyhow!("{}:{}: {e}", path.display(), i + 2))?;
        gold.insert(row[id_col].to_string(), label);
    }
    Ok(gold)
}

fn print_metrics(m: &Metrics) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(m)?);
    Ok(())
}

fn evaluate(ctx: &Session, a: EvaluateArgs) -> Result<()> {
    let predictions = import_predictions(&a.predictions)?;
    let gold = gold_labels(ctx, &a.gold)?;
    print_metrics(&evaluate_predictions(&predictions, &gold)?)
}

fn import(ctx: &Session, a: ImportArgs) -> Result<()> {
    let predictions = import_predictions(&a.input)?;
    let mut text = String::from("record_id,probability,label\n");
    for p in &predictions {
        text.push_str(&format!("{},{},{}\n", p.record_id, p.probability, p.label));
    }
    write_output(a.out.as_deref(), &text)?;
    if let Some(g) = &a.gold {
        let gold = gold_labels(ctx, g)?;
        let metrics = evaluate_predictions(&predictions, &gold)?;
        eprintln!("{}", serde_json::to_string_pretty(&metrics)?);
    }
    Ok(())
}

fn grid(ctx: &Session, a: GridArgs) -> Result<()> {
    let grid = Grid::load(&a.specs).map_err(|e| usage(e.to_string()))?;
    let dir = a
        .data_dir
        .or_else(|| ctx.config.data_dir.clone())
        .ok_or_else(|| usage("grid needs --data-dir or data_dir in the config"))?;
    let registry = Registry::load_dir(&dir)?;
    let defaults = ExperimentSpecDefaults {
        split_ratio: ctx.config.split_ratio,
        features: ctx.config.features,
        hyperparams: ctx.config.model,
    };
    let specs = grid.specs(&defaults);
    let results = run_grid(&specs, grid.seed, &registry, a.workers)?;
    fs::write(&a.out, export_results(&results)).with_context(|| format!("cannot write {}", a.out.display()))?;
    if let Some(p) = &a.report {
        if results.is_empty() {
            log::warn!("no results; report not written");
        } else {
            fs::write(p, render_results_table(&results, format_of(a.format))?)
                .with_context(|| format!("cannot write {}", p.display()))?;
        }
    }
    println!("{} experiments\t{}", results.len(), a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    if a.results.is_none() && a.matrix.is_empty() && a.stats.is_none() {
        return Err(usage("give --results, --matrix or --stats"));
    }
    let mut doc = ReportDocument::new(a.title);
    if let Some(p) = &a.stats {
        let registry = Registry::load_dir(p)?;
        doc.push("Datasets", render_stats_table(&registry.stats()?, Format::Markdown));
        doc.sources.push(p.display().to_string());
    }
    for p in &a.matrix {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        let m: SimilarityMatrix =
            serde_json::from_str(&text).with_context(|| format!("{}: not a similarity matrix", p.display()))?;
        doc.push(format!("{} similarity", m.measure), render_similarity_matrix(&m, Format::Markdown));
        doc.sources.push(p.display().to_string());
    }
    if let Some(p) = &a.results {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        let results = parse_results(&text)?;
        doc.push("Results", render_results_table(&results, Format::Markdown)?);
        doc.sources.push(p.display().to_string());
    }
    write_output(a.out.as_deref(), &doc.render())
}
