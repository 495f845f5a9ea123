//! `shortspam` command line.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 model or
//! schema mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(shortspam::Error),
}

impl From<shortspam::Error> for CliError {
    fn from(e: shortspam::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_schema_error() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "shortspam", version, about = "Short-message spam and abusive sender detection")]
pub struct Cli {
    /// TOML config file (table paths, forest and window parameters, costs, seed).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for folds and forests; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the fingerprint of the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config_fingerprint: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    pub fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Features {
    Mela,
    Ngram,
    Sgram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Extract {
    Mela,
    Domain,
    Mpa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Message,
    Sender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Records,
}

/// Message-model settings shared by training and evaluation.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Feature set.
    #[arg(long, value_enum)]
    pub features: Option<Features>,
    /// Lexical normalization before featurization.
    #[arg(long, value_enum)]
    pub normalize: Option<OnOff>,
    /// Number of trees in the forest.
    #[arg(long)]
    pub trees: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propose substring clusters from a corpus for hand pruning.
    MineClusters {
        corpus: PathBuf,
        /// Label sidecar; when present only spam texts are mined.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Candidate substrings kept after mining.
        #[arg(long, default_value_t = 500)]
        top_k: usize,
        #[arg(long, default_value_t = shortspam::cluster::MIN_SUBSTRING_LEN)]
        min_len: usize,
        /// Number of clusters to propose.
        #[arg(long, default_value_t = shortspam::cluster::DEFAULT_CLUSTER_COUNT)]
        k: usize,
        /// Weight of spelling similarity against co-occurrence.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-check a (pruned) cluster file.
    ValidateClusters {
        clusters: PathBuf,
        /// Pruning edits to apply first.
        #[arg(long)]
        pruning: Option<PathBuf>,
        /// Required number of clusters.
        #[arg(long, default_value_t = shortspam::cluster::DEFAULT_CLUSTER_COUNT)]
        k: usize,
        /// Write the resulting cluster set here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the domain scorer from `domain,label` rows.
    TrainDomain {
        domains: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Train a message model.
    TrainMessage {
        corpus: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a sender model on the first window of every sender.
    TrainSender {
        stream: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score messages; writes one JSON verdict per line.
    Classify {
        /// Corpus JSONL, `-` for standard input.
        corpus: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Misclassification costs `fp,fn`.
        #[arg(long)]
        costs: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score sender windows as they close while reading a message stream.
    ScoreSenders {
        /// Stream JSONL ordered by timestamp; standard input when omitted or `-`.
        stream: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        costs: Option<String>,
        /// Aggregator shards (senders are hashed to shards).
        #[arg(long, default_value_t = 4)]
        shards: usize,
    },
    /// Stratified k-fold evaluation.
    Evaluate {
        corpus: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of folds.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        costs: Option<String>,
        /// Evaluate sender models instead of message models.
        #[arg(long)]
        senders: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Per-bucket metrics of a trained model over time, as CSV.
    Replay {
        corpus: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Level::Message)]
        level: Level,
        /// Bucket length: seconds, or a number with s, m, h, d or w.
        #[arg(long, default_value = "1w")]
        bucket: String,
        /// Report at least this many buckets.
        #[arg(long)]
        n_buckets: Option<usize>,
        /// First bucket start (Unix seconds); the first item when omitted.
        #[arg(long)]
        origin: Option<u64>,
        /// Flag a bucket whose F1 is this far below the trailing mean.
        #[arg(long, default_value_t = 0.05)]
        drift_delta: f64,
        #[arg(long)]
        costs: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic corpus and its label sidecar.
    GenCorpus {
        /// TOML generator config; bundled defaults when omitted.
        genconfig: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Feature matrices as CSV.
    Extract {
        corpus: PathBuf,
        #[arg(long, value_enum)]
        what: Extract,
        #[arg(long, value_enum)]
        normalize: Option<OnOff>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Convert the public `label<TAB>text` collection to JSONL plus labels.
    ImportCollection {
        tsv: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print feature names of the message, domain and sender vectors.
    Schema,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
