mod bench;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clonekit::extractor::ReprKind;
use clonekit::Execution;

/// Token-bag overlap and embedding-based clone detection for Scala corpora.
///
/// Every flag can also be set through an environment variable named after it
/// with a CLONEKIT_ prefix, e.g. CLONEKIT_THETA=0.8.
#[derive(Debug, Parser)]
#[command(name = "clonekit", version)]
pub struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true, env = "CLONEKIT_SEQUENTIAL")]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "CLONEKIT_OUT")]
    pub out: PathBuf,

    /// Directory holding input artifacts. Defaults to --out.
    #[arg(long, env = "CLONEKIT_INPUT")]
    pub input: Option<PathBuf>,

    /// Write into <out>/run-<manifest hash> instead of <out>.
    #[arg(long, env = "CLONEKIT_PER_MANIFEST")]
    pub per_manifest: bool,
}

impl OutArgs {
    pub fn input_dir(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| self.out.clone())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a corpus and write methods, token bags and representation sequences.
    Extract(ExtractArgs),
    /// Overlap detection over bags.jsonl.
    Detect(DetectArgs),
    /// Train embeddings and detect by euclidean distance.
    Embed(EmbedArgs),
    /// Select candidate pairs for labeling.
    Filter(FilterArgs),
    /// Serve the labeling API over candidates.jsonl.
    Serve(ServeArgs),
    /// Confusion matrices, precision/recall and clone-type shares.
    Evaluate(EvaluateArgs),
    /// Render report.md from evaluation and timing artifacts.
    Report(ReportArgs),
    /// Time detection over a set of corpora and write timing.csv.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus root directory.
    #[arg(long, env = "CLONEKIT_CORPUS")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub io: OutArgs,
    /// Minimum effective lines for a method to be kept.
    #[arg(long, env = "CLONEKIT_MIN_LINES", default_value_t = clonekit::extractor::DEFAULT_MIN_LINES)]
    pub min_lines: usize,
    /// File extensions to ingest.
    #[arg(long, env = "CLONEKIT_EXT", value_delimiter = ',', default_value = "scala")]
    pub ext: Vec<String>,
    /// Token classes to leave out of bags: keywords, identifiers, literals, operators.
    #[arg(long, env = "CLONEKIT_EXCLUDE", value_delimiter = ',')]
    pub exclude: Vec<String>,
    /// Count punctuation tokens in bags.
    #[arg(long, env = "CLONEKIT_PUNCTUATION")]
    pub punctuation: bool,
    /// Truncate representation sequences beyond this many tokens.
    #[arg(long, env = "CLONEKIT_MAX_SEQUENCE_LEN", default_value_t = 400)]
    pub max_sequence_len: usize,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub io: OutArgs,
    /// Similarity threshold.
    #[arg(long, env = "CLONEKIT_THETA", default_value_t = 0.9)]
    pub theta: f64,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub io: OutArgs,
    /// Representation to embed. Both when omitted, plus their combination.
    #[arg(long, env = "CLONEKIT_REPR")]
    pub repr: Option<ReprKind>,
    /// Fixed distance threshold. Calibrated from --delta-quantile when omitted.
    #[arg(long, env = "CLONEKIT_DELTA")]
    pub delta: Option<f64>,
    /// Fraction of sampled pairs that fall within the calibrated threshold.
    #[arg(long, env = "CLONEKIT_DELTA_QUANTILE", default_value_t = 0.01)]
    pub delta_quantile: f64,
    /// Pairs sampled for calibration.
    #[arg(long, env = "CLONEKIT_DELTA_SAMPLE", default_value_t = 100_000)]
    pub delta_sample: usize,
    /// Only compare methods from the same project (first path component).
    #[arg(long, env = "CLONEKIT_PER_PROJECT")]
    pub per_project: bool,
    #[arg(long, env = "CLONEKIT_DIM", default_value_t = 50)]
    pub dim: usize,
    #[arg(long, env = "CLONEKIT_WORD_EPOCHS", default_value_t = 20)]
    pub word_epochs: usize,
    #[arg(long, env = "CLONEKIT_RAE_EPOCHS", default_value_t = 20)]
    pub rae_epochs: usize,
    #[arg(long, env = "CLONEKIT_LEARNING_RATE", default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, env = "CLONEKIT_MIN_COUNT", default_value_t = 2)]
    pub min_count: usize,
    /// Scale internal autoencoder nodes to unit length.
    #[arg(long, env = "CLONEKIT_NORMALIZE")]
    pub normalize: bool,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub io: OutArgs,
    /// Similarity threshold of the filtering pass.
    #[arg(long, env = "CLONEKIT_THETA", default_value_t = 0.7)]
    pub theta: f64,
    /// Keep a seeded uniform sample of this many candidates.
    #[arg(long, env = "CLONEKIT_SAMPLE")]
    pub sample: Option<usize>,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory for labels.jsonl and skips.jsonl.
    #[command(flatten)]
    pub io: OutArgs,
    #[arg(long, env = "CLONEKIT_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "CLONEKIT_HOST", default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Built UI bundle to serve as static files.
    #[arg(long, env = "CLONEKIT_UI")]
    pub ui: Option<PathBuf>,
    /// Offer pairs that already have one label before fresh ones.
    #[arg(long, env = "CLONEKIT_SECOND_RATER_FIRST")]
    pub second_rater_first: bool,
    /// Accept a strict majority of all raters instead of a plurality.
    #[arg(long, env = "CLONEKIT_MAJORITY")]
    pub majority: bool,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub io: OutArgs,
    /// Ground truth JSONL. Defaults to truth.jsonl, else consensus over labels.jsonl.
    #[arg(long, env = "CLONEKIT_TRUTH")]
    pub truth: Option<PathBuf>,
    /// Score published confusion matrices instead of pair files.
    #[arg(long, env = "CLONEKIT_MATRICES")]
    pub matrices: Option<PathBuf>,
    /// Corpus name used in metrics rows.
    #[arg(long, env = "CLONEKIT_CORPUS_NAME", default_value = "corpus")]
    pub corpus_name: String,
    #[arg(long, env = "CLONEKIT_MAJORITY")]
    pub majority: bool,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub io: OutArgs,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, env = "CLONEKIT_OUT")]
    pub out: PathBuf,
    /// Directory whose subdirectories are corpora.
    #[arg(long, env = "CLONEKIT_CORPORA", conflicts_with = "synthetic")]
    pub corpora: Option<PathBuf>,
    /// Generate synthetic corpora with these method counts.
    #[arg(long, env = "CLONEKIT_SYNTHETIC", value_delimiter = ',')]
    pub synthetic: Vec<usize>,
    #[arg(long, env = "CLONEKIT_THETA", default_value_t = 0.9)]
    pub theta: f64,
    #[arg(long, env = "CLONEKIT_MIN_LINES", default_value_t = clonekit::extractor::DEFAULT_MIN_LINES)]
    pub min_lines: usize,
    /// Timed runs per corpus; the fastest is reported.
    #[arg(long, env = "CLONEKIT_REPEAT", default_value_t = 1)]
    pub repeat: usize,
    /// Also time the embedding pipeline on corpora up to --embed-max-methods.
    #[arg(long, env = "CLONEKIT_EMBED")]
    pub embed: bool,
    #[arg(long, env = "CLONEKIT_EMBED_MAX_METHODS", default_value_t = 1000)]
    pub embed_max_methods: usize,
    #[arg(long, env = "CLONEKIT_WORD_EPOCHS", default_value_t = 20)]
    pub word_epochs: usize,
    #[arg(long, env = "CLONEKIT_RAE_EPOCHS", default_value_t = 20)]
    pub rae_epochs: usize,
    #[arg(long, env = "CLONEKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match cli.command {
        Command::Extract(a) => commands::extract(&a, exec),
        Command::Detect(a) => commands::detect(&a, exec),
        Command::Embed(a) => commands::embed(&a, exec),
        Command::Filter(a) => commands::filter(&a, exec),
        Command::Serve(a) => commands::serve(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Report(a) => commands::report(&a),
        Command::Bench(a) => bench::run(&a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
