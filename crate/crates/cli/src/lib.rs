//! `mmtl`: subcommands for preprocessing, synthetic data, training,
//! decoding, evaluation and model inspection.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mmtl_core::Error;

pub use config::{DataConfig, ExperimentConfig, PRESETS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Worker-thread cap for every parallel section.
pub const THREADS_ENV: &str = "MMTL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_numerical() || matches!(e, Error::GradCheck(_)) => EXIT_NUMERICAL,
            CliError::Core(Error::InvalidArgument(_) | Error::Config(_)) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mmtl", version, about = "Multimodal attentive translation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn BPE merges from normalized text.
    LearnBpe(commands::text::LearnBpeArgs),
    /// Normalize text and segment it with learned merges.
    ApplyBpe(commands::text::ApplyBpeArgs),
    /// Build a vocabulary from tokenized text.
    BuildVocab(commands::text::BuildVocabArgs),
    /// Generate the synthetic grounded-disambiguation corpus.
    Synth(commands::synth::SynthArgs),
    /// Train one model per seed.
    Train(commands::train::TrainArgs),
    /// Beam-search decode with one checkpoint or an ensemble.
    Translate(commands::translate::TranslateArgs),
    /// Score hypotheses: BLEU, METEOR surrogate, optional sense accuracy.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Approximate-randomization test between two systems.
    Significance(commands::evaluate::SignificanceArgs),
    /// Print parameter totals and per-block breakdown.
    CountParams(commands::inspect::CountParamsArgs),
    /// Finite-difference gradient check at toy dimensions.
    GradCheck(commands::inspect::GradCheckArgs),
}

/// Options shared by subcommands that take an experiment config.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shipped preset: ende, enfr or synthetic.
    #[arg(long)]
    pub preset: Option<String>,
}

/// Thread count from `MMTL_THREADS`, if set to a positive integer.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn dispatch(cli: Cli) -> CliResult {
    if let Some(n) = thread_cap()? {
        // Fails only if a pool already exists (repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::LearnBpe(a) => commands::text::learn_bpe(a),
        Command::ApplyBpe(a) => commands::text::apply_bpe(a),
        Command::BuildVocab(a) => commands::text::build_vocab(a),
        Command::Synth(a) => commands::synth::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Translate(a) => commands::translate::run(a),
        Command::Evaluate(a) => commands::evaluate::evaluate(a),
        Command::Significance(a) => commands::evaluate::significance(a),
        Command::CountParams(a) => commands::inspect::count_params(a),
        Command::GradCheck(a) => commands::inspect::grad_check(a),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
