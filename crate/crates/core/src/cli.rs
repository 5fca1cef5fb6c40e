//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config error, 3
//! runtime or training failure. Every run writes a reproducibility
//! stamp (argv, seed, config snapshot, schema versions) into the output
//! directory, and never mutates its input corpus.

mod commands;
mod kv;
mod reproduce;
mod stamp;

pub use kv::KvConfig;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Environment variable overriding the corpus root for `ingest` and
/// paper-scale `reproduce`.
pub const CORPUS_ROOT_ENV: &str = "DEEPSTREETS_CORPUS_ROOT";

pub(crate) const EXIT_OK: i32 = 0;
pub(crate) const EXIT_USAGE: i32 = 1;
pub(crate) const EXIT_DATA: i32 = 2;
pub(crate) const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

pub(crate) type CResult<T> = std::result::Result<T, CliError>;

impl From<crate::dataset::DatasetError> for CliError {
    fn from(e: crate::dataset::DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::media::MediaError> for CliError {
    fn from(e: crate::media::MediaError) -> Self {
        use crate::media::MediaError;
        match e {
            MediaError::RawNotEncodable | MediaError::Container { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        use crate::model::ModelError;
        match e {
            ModelError::InvalidConfig(_) | ModelError::Checkpoint(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<crate::training::TrainError> for CliError {
    fn from(e: crate::training::TrainError) -> Self {
        use crate::training::TrainError;
        match e {
            TrainError::InvalidConfig(_) | TrainError::EmptySplit(_) => {
                CliError::Data(e.to_string())
            }
            TrainError::Model(m) => m.into(),
            TrainError::Media(m) => m.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<crate::eval::EvalError> for CliError {
    fn from(e: crate::eval::EvalError) -> Self {
        use crate::eval::EvalError;
        match e {
            EvalError::EmptyTestSet
            | EvalError::EmptyHeldout(_)
            | EvalError::MissingAssignment
            | EvalError::Csv { .. }
            | EvalError::RaggedMatrix(_)
            | EvalError::Dataset(_) => CliError::Data(e.to_string()),
            EvalError::Cell { .. } => CliError::Data(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<crate::synthgen::SynthError> for CliError {
    fn from(e: crate::synthgen::SynthError) -> Self {
        use crate::synthgen::SynthError;
        match e {
            SynthError::Media(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub(crate) fn io_runtime(context: &str, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "deepstreets",
    version,
    about = "Train and evaluate a per-frame detector for GAN-synthesized driving-scene videos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a corpus tree and write its manifest
    Ingest(IngestArgs),
    /// Generate a synthetic fixture corpus
    Synth(SynthArgs),
    /// Compress RAW videos to HQ or LQ (H.264, constant QP)
    Compress(CompressArgs),
    /// Split a manifest into train/val/test at video granularity
    Split(SplitArgs),
    /// Train the detector
    Train(TrainArgs),
    /// Evaluate a checkpoint on a test split
    Eval(EvalArgs),
    /// Run a training-condition x testing-condition accuracy grid
    Matrix(MatrixArgs),
    /// Re-render a matrix report between formats
    Report(ReportArgs),
    /// Run a canned experiment end to end
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Corpus root laid out as <sub_dataset>/<label>/<quality>/<video>.avi
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Skip unreadable videos instead of failing
    #[arg(long)]
    permissive: bool,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Fixture config (key = value); defaults are desk-scale
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct CompressArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target quality level
    #[arg(long, value_parser = ["hq", "lq"])]
    quality: String,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training config (key = value); see recipes/
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Video-level aggregation headlined in the summary
    #[arg(long, value_parser = ["majority", "mean_score"], default_value = "majority")]
    policy: String,
    /// Report format printed to stdout
    #[arg(long, value_parser = ["text", "csv", "structured"], default_value = "text")]
    format: String,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct MatrixArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = ["text", "csv", "structured"], default_value = "text")]
    format: String,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Matrix report in CSV form
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = ["text", "csv", "structured"], default_value = "text")]
    format: String,
    /// Optional directory to write the re-rendered report into
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Experiment to reproduce
    #[arg(long, value_parser = ["table2", "table3", "table4", "unseen_generator"])]
    name: String,
    /// Corpus scale: fixtures are self-contained, paper needs the corpus
    #[arg(long, value_parser = ["paper", "fixture"], default_value = "fixture")]
    scale: String,
    #[arg(long)]
    out: PathBuf,
    /// Optional overrides (key = value)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

/// Runs the CLI against an argument vector (argv[0] included) and
/// returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(&args, argv),
        Command::Synth(args) => commands::synth(&args, argv),
        Command::Compress(args) => commands::compress(&args, argv),
        Command::Split(args) => commands::split(&args, argv),
        Command::Train(args) => commands::train(&args, argv),
        Command::Eval(args) => commands::eval(&args, argv),
        Command::Matrix(args) => commands::matrix(&args, argv),
        Command::Report(args) => commands::report(&args),
        Command::Reproduce(args) => reproduce::reproduce(&args, argv),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn no_arguments_is_a_usage_error() {
        assert_eq!(run(&argv(&["deepstreets"])), EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(
            run(&argv(&["deepstreets", "split", "--bogus"])),
            EXIT_USAGE
        );
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(&argv(&["deepstreets", "--help"])), EXIT_OK);
    }

    #[test]
    fn missing_manifest_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert_eq!(
            run(&argv(&[
                "deepstreets",
                "split",
                "--manifest",
                "/nonexistent/manifest.jsonl",
                "--out",
                out.to_str().unwrap(),
            ])),
            EXIT_DATA
        );
    }
}
