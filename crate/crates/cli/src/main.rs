//! `diffvp`: parse, render, run, generate data for, and train visual
//! programs from the command line.
//!
//! Exit codes: 0 success, 1 user or input error, 2 a failed internal check
//! (oracle or gradient check mismatch).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "diffvp", version, about = "Differentiable execution of visual programs")]
pub struct Cli {
    /// Master seed. Dataset, shuffle, disruption and initialization seeds are
    /// derived from it by name.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for training.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Zero the wall-clock column so metrics files are byte-reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a program file and print its AST as JSON.
    Parse { program: PathBuf },
    /// Print the probabilistic graph of a program (JSON, or DOT with --dot).
    Graph {
        program: PathBuf,
        #[arg(long)]
        dot: bool,
        /// Leave out CROP and RESULT nodes.
        #[arg(long, requires = "dot")]
        hide_deterministic: bool,
    },
    /// Print the answer distribution of one case.
    Infer(InferArgs),
    /// Generate a synthetic dataset as JSONL.
    Gen(GenArgs),
    /// Apply program disruption to a dataset.
    Disrupt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fraction: f64,
    },
    /// Train toy modules from a TOML experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run once per disruption fraction (comma-separated), each into its
        /// own subdirectory.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Score a checkpoint on a dataset and print the report as JSON.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Toy checkpoint; zero weights when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModulesArg::Toy)]
        modules: ModulesArg,
        /// Mode used for the reported loss.
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
    },
    /// Compare exact inference against brute-force enumeration.
    OracleCheck(CheckArgs),
    /// Compare analytic gradients of the loss against finite differences.
    Gradcheck {
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Coordinates checked per case (plus as many with zero gradient).
        #[arg(long, default_value_t = 64)]
        coords: usize,
    },
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["case", "fixture"])))]
pub struct InferArgs {
    /// JSONL dataset file.
    pub case: Option<PathBuf>,
    /// Built-in table-driven case instead of a dataset file.
    #[arg(long, value_enum, conflicts_with_all = ["index", "modules", "params"])]
    pub fixture: Option<FixtureArg>,
    /// Line (0-based) of the dataset to run.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = ModulesArg::Toy)]
    pub modules: ModulesArg,
    /// Toy checkpoint; zero weights when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2300, conflicts_with = "stages")]
    pub cases: usize,
    /// Cases per stage (up to four comma-separated counts for 1..4 visual
    /// steps) instead of a proportional split of --cases.
    #[arg(long, value_delimiter = ',', num_args = 1..=4)]
    pub stages: Option<Vec<usize>>,
    /// Extra cases with more than four visual steps.
    #[arg(long, default_value_t = 0)]
    pub long: usize,
    #[arg(long, default_value_t = 4)]
    pub rows: u8,
    #[arg(long, default_value_t = 4)]
    pub cols: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("corpus").args(["data", "cases"])))]
pub struct CheckArgs {
    /// JSONL dataset; a seeded corpus is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Size of the generated corpus.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Toy checkpoint; random weights when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Write the full report as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Argmax,
    Factorized,
    Exact,
    Brute,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModulesArg {
    Toy,
    Truth,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureArg {
    /// One LOC with two detections feeding one VQA.
    Mixture,
    /// Two answers reading the same crop.
    Shared,
}

/// Why a command failed, mapped to the exit code.
#[derive(Debug)]
pub enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::User(e)
    }
}

fn main() -> ExitCode {
    // Usage errors are user errors (1); clap's own default would be 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("check failed: {e:#}");
            ExitCode::from(2)
        }
    }
}
