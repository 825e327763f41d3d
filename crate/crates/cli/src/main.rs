mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "toporank", version, about = "Resolve place names in text against a Geonames gazetteer")]
struct Cli {
    /// `key = value` config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random draw (corpus sampling, initialization, shuffling, dropout)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a candidate index from a Geonames TSV dump
    BuildIndex(BuildIndexArgs),
    /// Print the candidates retrieved for a name
    Query(QueryArgs),
    /// Generate a synthetic annotated corpus
    Synth(SynthArgs),
    /// Train a ranker on an annotated corpus
    Train(TrainArgs),
    /// Resolve the toponyms of every document in a corpus
    Parse(ParseArgs),
    /// Score a model (or the population baseline) against gold annotations
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated feature classes to keep, e.g. `A,P`
    #[arg(long)]
    pub classes: Option<String>,
    /// Default number of candidates per query
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Jsonl,
    Table,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Corpus output (JSON lines)
    #[arg(long)]
    pub out: PathBuf,
    /// Number of documents
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub impossible_fraction: Option<f64>,
    /// Sample places from this Geonames dump
    #[arg(long, conflicts_with = "index")]
    pub gazetteer: Option<PathBuf>,
    /// Sample places from the entries of this index
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// When neither a gazetteer nor an index is given, also write the
    /// generated fixture world here as a Geonames TSV
    #[arg(long)]
    pub world_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Held-out corpus for per-epoch accuracy
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Model output path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Context vector dimension
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub gradient_accumulation_steps: Option<usize>,
    #[arg(long)]
    pub multitask_country_weight: Option<f64>,
    /// `sigmoid_softmax` or `logit_softmax`
    #[arg(long)]
    pub score_mode: Option<String>,
    /// Hold the population input at zero
    #[arg(long)]
    pub no_population: bool,
    /// Write the per-epoch history as JSON
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Corpus of documents (JSON lines)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// One JSON line per document with its resolutions
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Find toponyms with the gazetteer dictionary even when spans are given
    #[arg(long)]
    pub extract: bool,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Retrieval depths for the missing@k columns
    #[arg(long, value_delimiter = ',', default_value = "50,500")]
    pub k_values: Vec<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Rank by population instead of a model
    #[arg(long, conflicts_with = "model")]
    pub baseline: bool,
    /// Write the report as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config::override_with(&mut cfg.seed, &cli.seed);
    match cli.command {
        Command::BuildIndex(args) => commands::build_index(cfg, args),
        Command::Query(args) => commands::query(cfg, args),
        Command::Synth(args) => commands::synth(cfg, args),
        Command::Train(args) => commands::train(cfg, args),
        Command::Parse(args) => commands::parse(cfg, args),
        Command::Evaluate(args) => commands::evaluate(cfg, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
