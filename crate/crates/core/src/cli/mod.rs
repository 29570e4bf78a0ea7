//! `phase-speckle` command line: one subcommand per pipeline stage plus the
//! ablation grid. Every command writes its artifacts and a `manifest.json`
//! (parameters, seed, SHA-256 of inputs and outputs) into `--out`.
//!
//! Parameter precedence: command-line flag, then config file, then default.
//! Failures print a single line `error[<module>.<kind>]: <message>` to stderr
//! and exit with status 1 (2 for usage errors).

mod ablate;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use ablate::{run_ablation, AblationCell, AblationResult};
pub use config::{ExperimentConfig, MatchModes, SceneChoice};
pub use manifest::{sha256_file, FileRecord, Manifest};

/// Env var holding the default worker thread count.
pub const THREADS_ENV: &str = "PHASE_SPECKLE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] crate::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Lib(e) => e.code(),
            CliError::Io { .. } => "cli.io",
            CliError::Config { .. } => "cli.config",
            CliError::Usage(_) => "cli.usage",
            CliError::Threads(_) => "cli.threads",
        }
    }
}

macro_rules! lib_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Lib(e.into())
            }
        }
    )*};
}

lib_error!(
    crate::imgcore::ImageError,
    crate::pattern::PatternError,
    crate::ppn::PpnError,
    crate::simulator::SimError,
    crate::graycode::GraycodeError,
    crate::matcher::MatchError,
    crate::eval::EvalError,
    crate::recon::ReconError
);

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "phase-speckle",
    version,
    about = "RGB phase-speckle structured light toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Output directory [default: out, or `out_dir` of an ablate config].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for pattern, scene noise and perturbations (overrides configs).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 = all cores. Defaults to $PHASE_SPECKLE_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the RGB phase-speckle pattern.
    GenPattern(commands::GenPatternArgs),
    /// Render a stereo pair of a scene lit by the pattern.
    Simulate(commands::SimulateArgs),
    /// Decode RGB captures into wrapped phase and modulation.
    Ppn(commands::PpnArgs),
    /// Gray-code ground truth tools.
    #[command(subcommand)]
    Graycode(commands::GraycodeCommand),
    /// Block-match a rectified pair.
    Match(commands::MatchArgs),
    /// EPE / D1 of a disparity map against ground truth.
    Evaluate(commands::EvaluateArgs),
    /// Merge evaluation reports into one table.
    Compare(commands::CompareArgs),
    /// Triangulate a disparity map into a colored PLY point cloud.
    Reconstruct(commands::ReconstructArgs),
    /// Run the {rgb, phase} × {clean, perturbed} grid.
    Ablate(commands::AblateArgs),
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(0),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.common.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    pool.install(|| commands::dispatch(&cli.common, &cli.command))
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let msg: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("error[cli.usage]: {}", msg.join(" ").trim_start_matches("error: "));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            1
        }
    }
}
