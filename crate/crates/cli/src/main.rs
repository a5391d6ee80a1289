mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use toklab_core::analysis::Method;
use toklab_core::corpus::QualityWarning;
use toklab_core::tok::{Algorithm, ProfileName};

/// Tokenizer training and intrinsic evaluation.
#[derive(Debug, Parser)]
#[command(name = "toklab", version)]
pub struct Cli {
    /// Directory that receives every file a command writes.
    #[arg(long, global = true, env = "TOKLAB_RUN_ROOT", default_value = "runs")]
    pub run_root: PathBuf,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a raw line-delimited source into a stage file.
    Ingest(IngestArgs),
    /// Filter, deduplicate and shuffle a stage file.
    Preprocess(PreprocessArgs),
    /// Train one tokenizer.
    Train(TrainArgs),
    /// Print one id sequence per input line.
    Encode(EncodeArgs),
    /// Content tokens per word of a document set.
    Fertility(FertilityArgs),
    /// Token premium of one language over another on a parallel corpus.
    Parity(ParityArgs),
    /// Pairwise vocabulary overlap of two or more tokenizers.
    Overlap(OverlapArgs),
    /// Training cost per token and per word.
    Cost(CostArgs),
    /// Aggregate downstream scores, correlate metrics, compare table values.
    Analyze(AnalyzeArgs),
    /// Run a full experiment from a config file.
    Run(RunArgs),
    /// Write a deterministic synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub language: String,
    /// Output stage file, relative to the run root.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Stage file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cluster report, relative to the run root.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long)]
    pub dedup_seed: u64,
    #[arg(long)]
    pub shuffle_seed: u64,
    /// Warning labels that drop a document (repeatable).
    #[arg(long = "drop-warning", value_parser = parse_warning)]
    pub drop_warnings: Vec<QualityWarning>,
    #[arg(long, default_value_t = 5.0)]
    pub harmful_threshold: f64,
    #[arg(long)]
    pub drop_missing_harmful: bool,
    #[arg(long, default_value_t = 0.8)]
    pub jaccard: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Text (one document per line) or a `.jsonl` stage file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_algorithm)]
    pub algorithm: Algorithm,
    #[arg(long, value_parser = parse_profile)]
    pub profile: ProfileName,
    #[arg(long)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0.9999)]
    pub character_coverage: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Model file, relative to the run root. A manifest is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Text file; each line is encoded on its own.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct FertilityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Text (one document per line) or a `.jsonl` stage file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Tab-separated, header of language codes.
    #[arg(long)]
    pub parallel: PathBuf,
    #[arg(long)]
    pub lang: String,
    #[arg(long)]
    pub pivot: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long)]
    pub fertility: f64,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    #[arg(long, default_value_t = 2048)]
    pub seq_len: u64,
    #[arg(long, default_value_t = 32)]
    pub layers: u64,
    #[arg(long, default_value_t = 2560)]
    pub hidden: u64,
    #[arg(long, default_value_t = 50_000)]
    pub vocab: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("what").required(true).multiple(true).args(["scores", "ratio"])))]
pub struct AnalyzeArgs {
    /// Downstream scores: model, task, language, accuracy.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Intrinsic metrics to correlate with the scores: metric, model,
    /// language, value.
    #[arg(long, requires = "scores")]
    pub metrics: Option<PathBuf>,
    #[arg(long, value_parser = parse_method, default_value = "spearman")]
    pub method: Method,
    /// Table of values (first column names the row) for a max/min ratio.
    #[arg(long, requires = "column")]
    pub ratio: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory, relative to the run root.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub bytes_per_language: usize,
    #[arg(long, default_value_t = 200)]
    pub parallel_rows: usize,
    #[arg(long)]
    pub seed: u64,
}

fn parse_warning(s: &str) -> Result<QualityWarning, String> {
    s.parse().map_err(|e: toklab_core::Error| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: toklab_core::Error| e.to_string())
}

fn parse_profile(s: &str) -> Result<ProfileName, String> {
    s.parse().map_err(|e: toklab_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: toklab_core::Error| e.to_string())
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match std::panic::catch_unwind(|| commands::dispatch(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
