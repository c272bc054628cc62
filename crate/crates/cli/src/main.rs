//! `crossplat`: command-line front end for the corpus toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

const FORMATS: &str = "\
FILE FORMATS

Mapping (TOML, for `ingest`):
  dataset_id = \"EY1\"  language = \"en\"  platform = \"youtube\"
  availability = \"open\" | \"partial\"      (default partial)
  format = \"csv\" | \"jsonl\"   delimiter = \",\"   text_column = \"text\"
  label_column = \"label\"                 (optional)
  hate_words_column = \"hate_words\"       (optional; `;`-separated or JSON array)
  codebook = \"definition text\"           (optional)
  [label_map]  \"1\" = \"hate\"  \"0\" = \"non_hate\"   (empty map: 1 hate, 0 non-hate)
  Empty label cells and JSON null leave a record unlabeled.

Canonical dataset (.ds): first line {\"crossplat_dataset\":1,\"meta\":{...}}, then one JSON
  record per line with fields record_id, dataset_id, platform, language, raw_text,
  clean_text, label (\"hate\" | \"non_hate\" | null), annotated_hate_words.

Annotation sheet (CSV, one file per annotator, annotator id = file stem):
  record_id,label[,hate_words]     label: hate|non_hate|1|0; hate_words `;`-separated.

Gold labels (CSV, written by `adjudicate`): record_id,label,hate_votes,nonhate_votes

Lexicon: UTF-8 text, one term per line, lines starting with `#` ignored.

Survey votes (CSV): respondent_id,dataset_a,dataset_b,rating,response_seconds
  rating is an integer 1..10.

Embedding table: first line `<record_count> <dimension>`, then one line per record:
  record_id followed by <dimension> whitespace-separated decimal floats.

Language profile: one `ngram<TAB>rank` per line, ranks 1..N.

Predictions (CSV): record_id,probability   probability in [0,1]; >= 0.5 is hate.

Model file: `crossplat-model 1`, then `dimension`, `hash_seed`, `weighting`,
  `learning_rate`, `epochs`, `l2_penalty`, `seed`, `document_count`,
  `document_frequencies <n>` followed by n `<bucket> <df>` lines, `bias`, and
  `weights` followed by one decimal weight per line.

Grid (TOML): seed = <u64>, optional split_ratio / [features] / [hyperparams] defaults,
  then [[experiment]] tables with target, augments = [..],
  sampling = \"none\" | \"undersample\", sampling_stage = \"combined_pool\" | \"per_dataset\",
  and optional split_ratio, seed, [experiment.features], [experiment.hyperparams].

Results (JSONL): one JSON object per experiment with spec, metrics,
  test_fingerprint, train_size, test_size, contributions.

Config (TOML, --config or CROSSPLAT_CONFIG): data_dir, split_ratio, seed,
  min_response_seconds, [features] dimension/hash_seed/weighting,
  [model] learning_rate/epochs/l2_penalty/seed, [lexicons] <lang> = path,
  [language_profiles] <lang> = path. Unknown keys are rejected.

EXIT STATUS
  0 success, 1 usage or configuration error, 2 data or contract error.";

#[derive(Parser, Debug)]
#[command(name = "crossplat", version, about = "Cross-platform hate-speech corpus toolkit and experiment harness", after_long_help = FORMATS)]
pub struct Cli {
    /// Configuration file (TOML); overrides CROSSPLAT_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Increase log verbosity (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a CSV/JSONL export into a canonical dataset file.
    Ingest(IngestArgs),
    /// Print the dataset overview table.
    Stats(StatsArgs),
    /// Majority-vote annotator sheets into gold labels and report kappa.
    Adjudicate(AdjudicateArgs),
    /// Merge lexicons or extract the hate words present in a dataset.
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Dataset similarity measures.
    #[command(subcommand)]
    Similarity(SimilarityCommand),
    /// Stratified train/test split of a dataset.
    Split(SplitArgs),
    /// Train the logistic-regression baseline on labeled datasets.
    Train(TrainArgs),
    /// Score a dataset or a single text with a trained model.
    Predict(PredictArgs),
    /// Evaluate a predictions file against gold labels.
    Evaluate(EvaluateArgs),
    /// Validate an external predictions file and derive labels.
    ImportPredictions(ImportArgs),
    /// Run an experiment grid.
    Grid(GridArgs),
    /// Render tables from exported results and matrices.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Markdown,
    Csv,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only records detected as this language.
    #[arg(long)]
    pub filter_language: Option<String>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Dataset files or ids; all `.ds` files in the data directory when omitted.
    pub datasets: Vec<String>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: OutputFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Aggregate {
    Mean,
    Min,
}

#[derive(Args, Debug)]
pub struct AdjudicateArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub sheets: Vec<PathBuf>,
    /// Gold label CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: Aggregate,
    /// Write the union of marked hate words here.
    #[arg(long)]
    pub hate_words: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum LexiconCommand {
    /// Union of lexicon files of one language.
    Merge {
        #[arg(long)]
        language: String,
        #[arg(long)]
        base: PathBuf,
        #[arg(long, num_args = 1..)]
        extra: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lexicon terms that occur in a dataset, one per line.
    Extract {
        #[arg(long)]
        dataset: String,
        /// Defaults to the configured lexicon for the dataset's language.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Overlap {
    Union,
    Sum,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Content,
    Hatewords,
    Definition,
}

#[derive(Args, Debug)]
pub struct ContentOpts {
    /// External embedding table instead of the built-in hashed TF-IDF.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Raw term counts instead of TF-IDF weights for the built-in provider.
    #[arg(long)]
    pub term_count: bool,
}

#[derive(Args, Debug)]
pub struct LexiconOpts {
    /// Defaults to the configured lexicon for the datasets' language.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "union")]
    pub overlap: Overlap,
}

#[derive(Subcommand, Debug)]
pub enum SimilarityCommand {
    /// Cosine of the mean record embeddings of two datasets.
    Content {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        opts: ContentOpts,
    },
    /// Overlap of the lexicon terms found in two datasets.
    Hatewords {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        opts: LexiconOpts,
    },
    /// (mean rating - 1) / 9 over the survey votes for one pair.
    Definition {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        min_seconds: Option<f64>,
    },
    /// Upper-triangular matrix over several datasets.
    Matrix {
        #[arg(long, value_enum)]
        measure: MeasureArg,
        #[arg(long, num_args = 2.., required = true)]
        datasets: Vec<String>,
        #[command(flatten)]
        content: ContentOpts,
        #[command(flatten)]
        lexicon: LexiconOpts,
        #[arg(long)]
        votes: Option<PathBuf>,
        #[arg(long)]
        min_seconds: Option<f64>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the matrix as JSON for `report`.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Datasets whose labeled records form the training set.
    #[arg(long, num_args = 1.., required = true)]
    pub datasets: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub undersample: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    pub dataset: Option<String>,
    /// Score one cleaned-on-the-fly text instead of a dataset.
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Dataset file or id, or a gold label CSV.
    #[arg(long)]
    pub gold: String,
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also evaluate against this dataset or gold CSV.
    #[arg(long)]
    pub gold: Option<String>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub specs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: OutputFormat,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Matrix JSON files written by `similarity matrix --json`.
    #[arg(long, num_args = 1..)]
    pub matrix: Vec<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value = "Report")]
    pub title: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(&cli);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
