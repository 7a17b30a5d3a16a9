//! `hanforge` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 on runtime
//! failure (I/O, non-finite training values).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hanforge::baselines::Scenario;
use hanforge::encoders::Variant;
use hanforge::HanError;

#[derive(Parser, Debug)]
#[command(name = "hanforge", version, about = "Hierarchical attention networks for unreliable-news classification")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a vocabulary file from a labelled dataset.
    BuildVocab(BuildVocabArgs),
    /// Train a model and write the checkpoint, vocabulary and report.
    Train(TrainArgs),
    /// Score a labelled dataset and write metrics JSON plus ROC/PR curves.
    Evaluate(EvaluateArgs),
    /// Write per-article probabilities as JSON lines.
    Predict(PredictArgs),
    /// Run the TF-IDF logistic-regression baseline over title/body scenarios.
    Baseline(BaselineArgs),
    /// Export attention traces and HTML heatmaps.
    Visualize(VisualizeArgs),
    /// Generate a synthetic train/test corpus with planted trigger words.
    Synth(SynthArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct BuildVocabArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset (JSONL, or CSV by extension).
    #[arg(long)]
    pub data: PathBuf,
    /// Maximum number of corpus tokens kept; PAD and UNK come on top.
    #[arg(long)]
    pub max_vocab: Option<usize>,
}

/// Model shape and optimizer flags.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Model variant.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// Articles per mini-batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Training epochs (total, when resuming).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Words kept per sentence.
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Body sentences kept per article.
    #[arg(long)]
    pub max_sentences: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Training dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Validation dataset, used for early stopping.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Vocabulary file; built from the training data when omitted.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Pretrained embeddings (`token v1 ... vd` per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Maximum number of corpus tokens kept when building the vocabulary.
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Output directory of an earlier run to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Where a trained model and its vocabulary live.
#[derive(Args, Debug, Clone)]
pub struct ModelInput {
    /// Model checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary file; defaults to `vocab.txt` next to the model.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: ModelInput,
    /// Labelled dataset to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Decision threshold on the unreliable-class probability.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: ModelInput,
    /// Labelled dataset to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Probability at or above which an article is predicted unreliable.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Test dataset.
    #[arg(long)]
    pub test: PathBuf,
    /// Scenario to run; all four when omitted. May be repeated.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Vec<Scenario>,
    /// Cap on the TF-IDF vocabulary; uncapped when omitted.
    #[arg(long)]
    pub max_vocab: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VisualizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: ModelInput,
    /// Articles to visualize.
    #[arg(long)]
    pub data: PathBuf,
    /// Sentences shown per heatmap.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Only these article uids. May be repeated.
    #[arg(long)]
    pub uid: Vec<String>,
    /// At most this many articles.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training articles.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Test articles; half of `--n` when omitted.
    #[arg(long)]
    pub test: Option<usize>,
    /// Probability that a planted trigger goes into the title.
    #[arg(long, default_value_t = 0.5)]
    pub trigger_rate: f64,
    /// Share of unreliable articles.
    #[arg(long, default_value_t = 0.3)]
    pub unreliable_fraction: f64,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: HanError| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: HanError| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(cli.command, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
