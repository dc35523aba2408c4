//! Command-line workflows over `mtbp-core`: simulate observations, fit
//! offspring distributions by EM, cross-check against exhaustive
//! enumeration, and rerun the built-in worked example and simulation study.
//!
//! [`run`] is the whole program minus process setup, so tests can drive it
//! with in-memory output streams.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtbp_core::CountingMode;
use thiserror::Error;

mod estimate;
mod example;
pub mod files;
pub mod manifest;
mod mle;
mod oracle;
mod simulate;
pub mod study;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const RESOURCE: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
    pub const DATA: i32 = 5;
    pub const MISMATCH: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable inputs, invalid model files.
    #[error("{0}")]
    Usage(String),
    /// A size guard or sampling bound was hit.
    #[error("{0}")]
    Resource(String),
    /// Observation or tree data that cannot be used as given.
    #[error("{0}")]
    Data(String),
    /// Computed values disagree with their reference.
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Resource(_) => exit::RESOURCE,
            CliError::Data(_) => exit::DATA,
            CliError::Mismatch(_) => exit::MISMATCH,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

pub type CmdResult = Result<i32, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mtbp", version, about = "Offspring-distribution estimation for multitype branching processes with terminal types")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Multiset,
    Ordered,
}

impl From<ModeArg> for CountingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Multiset => CountingMode::Multiset,
            ModeArg::Ordered => CountingMode::Ordered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Uniform,
    Random,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeSize {
    Small,
    Large,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw trees from a model and write their observations.
    Simulate(SimulateArgs),
    /// Fit offspring probabilities to observations by EM.
    Estimate(EstimateArgs),
    /// Compare DP likelihoods and expected counts with exhaustive enumeration.
    Oracle(OracleArgs),
    /// Complete-data maximum likelihood from fully observed trees.
    Mle(MleArgs),
    /// Print and verify the built-in worked example.
    Example(ExampleArgs),
    /// Repeat simulate-then-estimate over many samples and tabulate the fits.
    Study(StudyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Nonterminal type name of the initial particle.
    #[arg(long)]
    pub root: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Depth (root = 1) at which nodes are forced to emit.
    #[arg(long, default_value_t = 64)]
    pub max_depth: u32,
    #[arg(long, requires = "max_leaves")]
    pub min_leaves: Option<u64>,
    #[arg(long, requires = "min_leaves")]
    pub max_leaves: Option<u64>,
    /// Observations CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the sampled trees, one per line.
    #[arg(long)]
    pub trees: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Model file; probabilities, if present, are ignored.
    #[arg(long)]
    pub structure: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    pub init: InitArg,
    #[arg(long, required_if_eq("init", "file"))]
    pub init_file: Option<PathBuf>,
    /// Seed for `--init random`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Multiset)]
    pub mode: ModeArg,
    /// Tolerance for both the log-likelihood gain and the parameter change.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Drop observations with zero likelihood instead of failing.
    #[arg(long)]
    pub skip_impossible: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Multiset)]
    pub mode: ModeArg,
    /// Largest observation, in leaves, that will be enumerated.
    #[arg(long, default_value_t = mtbp_core::oracle::DEFAULT_GUARD)]
    pub max_leaves_guard: u64,
}

#[derive(Debug, Args)]
pub struct MleArgs {
    #[arg(long)]
    pub trees: PathBuf,
    #[arg(long)]
    pub structure: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    /// Reference values are checked in multiset mode only.
    #[arg(long, value_enum, default_value_t = ModeArg::Multiset)]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub samples: usize,
    /// Observations per sample.
    #[arg(long, value_parser = ["20", "50", "100"])]
    pub sample_size: String,
    #[arg(long, value_enum)]
    pub tree_size: TreeSize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Counting mode for the per-sample fits.
    #[arg(long, value_enum, default_value_t = ModeArg::Ordered)]
    pub mode: ModeArg,
}

/// Parses `args` (program name first) and runs the command. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    exit::OK
                }
                _ => {
                    let rendered = e.render().to_string();
                    let line = rendered.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(stderr, "{line}");
                    exit::USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate::run(a, stdout),
        Command::Estimate(a) => estimate::run(a, stdout, stderr),
        Command::Oracle(a) => oracle::run(a, stdout),
        Command::Mle(a) => mle::run(a, stdout),
        Command::Example(a) => example::run(a, stdout),
        Command::Study(a) => study::run(a, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}
