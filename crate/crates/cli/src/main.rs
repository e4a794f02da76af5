//! Command-line front end: one subcommand per pipeline stage, a single
//! config file with flag overrides, and a JSON provenance manifest next
//! to every artifact.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;

/// Failures are split by exit code: validation problems (bad config,
/// missing prerequisite file) exit 1, failures during the actual work
/// exit 2.
#[derive(Debug)]
pub enum CliError {
    Config { field: String, message: String },
    MissingArtifact(PathBuf),
    Runtime(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError::Config { field: field.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::MissingArtifact(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config { field, message } => {
                write!(f, "config error: `{field}`: {message}")
            }
            CliError::MissingArtifact(path) => {
                write!(f, "missing artifact: {}", path.display())
            }
            CliError::Runtime(message) => write!(f, "error: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! runtime_error_from {
    ($($t:ty),+ $(,)?) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> CliError {
                CliError::Runtime(e.to_string())
            }
        }
    )+};
}

runtime_error_from!(
    pairforge::align::AlignError,
    pairforge::decode::DecodeError,
    pairforge::lm::LmError,
    pairforge::mert::MertError,
    pairforge::metrics::MetricsError,
    pairforge::pipeline::PipelineError,
    pairforge::provider::ProviderError,
    pairforge::synth::SynthError,
    pairforge::text::TextError,
);

#[derive(Parser)]
#[command(
    name = "pairforge",
    version,
    about = "Synthesizes poor/good sentence pairs by degrading a phrase-based translator"
)]
struct Cli {
    /// TOML or JSON config file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Cap the worker thread count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Override the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Override the language-model weight scale used for degradation.
    #[arg(long, global = true, value_name = "F")]
    lm_scale: Option<f64>,

    /// Override the edit-rate filter threshold.
    #[arg(long, global = true, value_name = "F")]
    threshold: Option<f64>,

    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Pipeline stages in dependency order.
#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train the target-side n-gram language model.
    TrainLm,
    /// Word-align the parallel corpus in both directions.
    Align,
    /// Extract the phrase table from saved alignments.
    Phrases,
    /// Tune log-linear weights on the dev set.
    Tune,
    /// Translate input text with the tuned system.
    Decode,
    /// Generate filtered poor/good pairs with the degraded system.
    Synthesize,
    /// Score tuned vs degraded output: BLEU, perplexity, F0.5.
    Evaluate,
    /// Summarize the error profile of a synthesized pair file.
    Profile,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(scale) = cli.lm_scale {
        cfg.lm_scale = scale;
    }
    if let Some(threshold) = cli.threshold {
        cfg.edit_rate_threshold = threshold;
    }
    if let Some(dir) = &cli.out {
        cfg.paths.output_dir = dir.clone();
    }
    cfg.validate()?;

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }

    std::fs::create_dir_all(&cfg.paths.output_dir).map_err(|e| {
        CliError::Runtime(format!("create {}: {e}", cfg.paths.output_dir.display()))
    })?;

    match cli.command {
        Command::TrainLm => commands::train_lm(&cfg),
        Command::Align => commands::align(&cfg),
        Command::Phrases => commands::phrases(&cfg),
        Command::Tune => commands::tune(&cfg),
        Command::Decode => commands::decode(&cfg),
        Command::Synthesize => commands::synthesize(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Profile => commands::profile(&cfg),
    }
}
