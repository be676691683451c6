//! Command implementations behind the `bankfuse` binary.

pub mod commands;
pub mod theory;

use std::path::PathBuf;

use bankfuse::{ArchitectureKind, SyntheticKind};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bankfuse::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    /// The report is still produced; `summary` is its standard-output part.
    #[error("{failed} of {total} checks failed")]
    ChecksFailed {
        summary: String,
        failed: usize,
        total: usize,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "bankfuse",
    version,
    about = "Fuse feature banks with attention and check the theory behind it"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one architecture and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a bank file.
    Eval(EvalArgs),
    /// Train every architecture with one shared seed and tabulate accuracies.
    Ablate(AblateArgs),
    /// Run the exact information-theory sweeps.
    VerifyTheory(TheoryArgs),
    /// Write train and test bank files for a synthetic task.
    GenSynthetic(SyntheticArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub bank: PathBuf,
    /// SA_ONLY, CA_ONLY, SA2CA, CA2SA, SCA, ADD, CONCAT, SINGLE_<i> or SINGLE_SA_<i>.
    #[arg(long)]
    pub arch: ArchitectureKind,
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint destination.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub label_fraction: Option<f64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub heads: u64,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out bank to report test accuracy on.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Metrics destination; defaults to `<out>.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Writes `final,<accuracy>` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub heads: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub instances: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest variable arity drawn.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..=16))]
    pub max_arity: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// complementary-xor, redundant or separable.
    #[arg(long)]
    pub kind: SyntheticKind,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 2000)]
    pub train: usize,
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes `<out>.train.csv` and `<out>.test.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command and returns the summary for standard output.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::VerifyTheory(a) => theory::verify(&a),
        Command::GenSynthetic(a) => commands::gen_synthetic(&a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("bankfuse").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let cases: [&[&str]; 5] = [
            &[
                "train", "--bank", "b", "--arch", "BOGUS", "--config", "c", "--out", "o",
            ],
            &[
                "verify-theory",
                "--instances",
                "5",
                "--max-arity",
                "1",
                "--out",
                "x",
            ],
            &["verify-theory", "--instances", "0", "--out", "x"],
            &[
                "ablate",
                "--bank",
                "b",
                "--config",
                "c",
                "--out",
                "o",
                "--frobnicate",
            ],
            &[
                "gen-synthetic",
                "--kind",
                "spiral",
                "--d",
                "4",
                "--out",
                "x",
            ],
        ];
        for args in cases {
            let err = parse(args).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{args:?}");
        }
    }

    #[test]
    fn architecture_names_parse() {
        let cli = parse(&[
            "train",
            "--bank",
            "b",
            "--arch",
            "single_sa_1",
            "--config",
            "c",
            "--out",
            "o",
        ])
        .unwrap();
        match cli.command {
            Command::Train(a) => assert_eq!(a.arch, ArchitectureKind::SingleSa(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_input_is_a_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t.csv");
        let cli = parse(&[
            "ablate",
            "--bank",
            dir.path().join("absent.csv").to_str().unwrap(),
            "--config",
            "c",
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        assert!(matches!(run(cli), Err(CliError::Core(_))));
    }
}
