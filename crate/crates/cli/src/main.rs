//! `oica`: simulate, recover, check, classify, sweep and quadric tools.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or input error.

mod commands;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] oica::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oica", version, about = "Overcomplete ICA with one Gaussian source")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw samples x = A s.
    Simulate(SimulateArgs),
    /// Write second and fourth cumulants (population or sample) as JSON.
    Cumulants(CumulantsArgs),
    /// Recover the mixing matrix from data or cumulants.
    Recover(RecoverArgs),
    /// Identifiability checks for a given matrix.
    Check(CheckArgs),
    /// Generic identifiability of an I x J matrix.
    Classify(ClassifyArgs),
    /// Recovery error sweep over source counts.
    Sweep(SweepArgs),
    /// Quadric system attached to a matrix.
    Quadrics(QuadricsArgs),
    /// Quadric system with a prescribed number of real solutions.
    Realcount(RealcountArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mixing").required(true).args(["matrix", "random"])))]
pub struct SimulateArgs {
    /// Mixing matrix CSV.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Random unit-column matrix with I rows and J columns.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub random: Option<Vec<usize>>,
    /// Source specification JSON.
    #[arg(long)]
    pub sources: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the mixing matrix used.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["matrix", "input"])))]
pub struct CumulantsArgs {
    /// Mixing matrix CSV (population cumulants; needs --sources).
    #[arg(long, requires = "sources")]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub sources: Option<PathBuf>,
    /// Sample CSV (sample cumulants).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("data").required(true).args(["input", "cumulants"])))]
pub struct RecoverArgs {
    /// Sample CSV, one observation per row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Cumulant JSON.
    #[arg(long)]
    pub cumulants: Option<PathBuf>,
    /// Number of sources J, or `auto`.
    #[arg(long, default_value = "auto")]
    pub num_sources: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Recovery configuration JSON (fields default when absent).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output matrix CSV; diagnostics and manifest go next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Verdict JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QuadricsArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RealcountArgs {
    /// Number of homogeneous variables I (the system has I - 1 variables).
    #[arg(long)]
    pub dim: usize,
    /// Number of real solutions, even and at most 2^(I-1).
    #[arg(long)]
    pub real: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("OICA_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("OICA_THREADS={v} is not a count")))?;
            if n == 0 {
                return Err(CliError::Usage("OICA_THREADS must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(n)
        }
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, threads),
        Command::Cumulants(a) => commands::cumulants(&a, threads),
        Command::Recover(a) => commands::recover(&a, threads),
        Command::Check(a) => commands::check(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Sweep(a) => commands::sweep(&a, threads),
        Command::Quadrics(a) => commands::quadrics(&a, threads),
        Command::Realcount(a) => commands::realcount(&a, threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Core(c) => eprintln!("oica: error [{}]: {c}", c.code()),
                CliError::Usage(m) => eprintln!("oica: error: {m}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
