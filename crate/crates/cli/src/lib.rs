//! `blm` command-line front end.
//!
//! Every subcommand takes an optional `--config` JSON document (or a run
//! manifest) whose keys mirror the long flag names; flags override it. Each
//! output file gets a `<output>.manifest.json` recording the resolved
//! configuration, seeds and sha256 digests of inputs and outputs.

mod commands;
mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use manifest::RunManifest;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0:#}")]
    Data(anyhow::Error),
    #[error("numeric: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "blm", version, about = "Analogical sentence-matrix datasets, ablations, training and scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset of Base puzzles as JSON Lines.
    Generate(GenerateArgs),
    /// Split a dataset into train/val/test files.
    Split(SplitArgs),
    /// Rewrite Base puzzles under another structure.
    Ablate(AblateArgs),
    /// Build or import sentence-embedding caches.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Train one model.
    Train(TrainArgs),
    /// Evaluate a trained model.
    Eval(EvalArgs),
    /// Learning curves over training sizes and structures.
    Sweep(SweepArgs),
    /// Write language-model prompts as JSON Lines.
    LlmPrompts(LlmPromptsArgs),
    /// Score language-model responses.
    LlmScore(LlmScoreArgs),
    /// Gradient checks and the distractor-taxonomy property suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
enum EmbedCommand {
    /// Validate an exported cache, check coverage and copy it into place.
    Import(EmbedImportArgs),
    /// Seeded pseudo-embeddings for every sentence in the given datasets.
    Pseudo(EmbedPseudoArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON config or run manifest; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    /// roll | bake
    #[arg(long)]
    phenomenon: Option<String>,
    /// I | II
    #[arg(long = "type")]
    data_type: Option<String>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// strict | relaxed
    #[arg(long)]
    uniqueness: Option<String>,
    /// Lexicon JSON replacing the built-in one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// train,val,test fractions
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving train.jsonl, val.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct AblateArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// base | shuffled | noanalogy | nosoftcue | transposed
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EmbedImportArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    /// Cache written by the exporter.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Datasets whose sentences must all be present.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<PathBuf>>,
    /// Expected vector dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EmbedPseudoArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<PathBuf>>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TrainingFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// cnn | ffnn
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Restructure Base inputs before training.
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    structure_seed: Option<u64>,
    /// Run index; the training seed is base_seed + run.
    #[arg(long)]
    run: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    training: TrainingFlags,
    /// Checkpoint path; history goes to `<stem>.history.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    structure_seed: Option<u64>,
    /// Report JSON; a CSV row goes beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    structures: Option<Vec<String>>,
    #[arg(long)]
    structure_seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    training: TrainingFlags,
    #[arg(long)]
    jobs: Option<usize>,
    /// Sweep JSON; per-run CSV goes beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct LlmPromptsArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// 0, 1 or 5
    #[arg(long)]
    shots: Option<usize>,
    /// Ask for step-by-step reasoning.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    cot: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Solved puzzles used as worked examples.
    #[arg(long)]
    shot_pool: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct LlmScoreArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Model name recorded in the report.
    #[arg(long = "model-name")]
    model_name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SelftestArgs {
    #[command(flatten)]
    #[serde(skip)]
    cfg: ConfigArg,
    /// Instances per phenomenon in the taxonomy suite.
    #[arg(long)]
    count: Option<usize>,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => commands::generate(a),
        Command::Split(a) => commands::split(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Embed(EmbedCommand::Import(a)) => commands::embed_import(a),
        Command::Embed(EmbedCommand::Pseudo(a)) => commands::embed_pseudo(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::LlmPrompts(a) => commands::llm_prompts(a),
        Command::LlmScore(a) => commands::llm_score(a),
        Command::Selftest(a) => commands::selftest(a),
    }
}
