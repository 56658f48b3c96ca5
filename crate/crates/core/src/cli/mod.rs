//! Command-line scenario runner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error, 4 I/O error.

mod config;
mod runner;

pub use config::{
    AdaptivitySection, BasisSection, BoundarySection, EdgeConfig, GeometryKind, MaterialSection, OutputSection,
    PcgSection, QuadratureSection, ReferenceKind, ReferenceSection, ScenarioConfig, ScenarioKind, ScenarioSection,
    TimeSection,
};
pub use runner::{compare, dump_basis, run, study, RunReport, StudyParam, StudyRow, StudyStats, STUDY_HEADER};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::mra::BasisFamily;
use crate::reference::ReferenceError;
use crate::timestepper::TimestepError;

/// Overrides `output.dir`.
pub const OUT_ENV: &str = "WAVEGAL_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<TimestepError> for CliError {
    fn from(e: TimestepError) -> Self {
        match e {
            TimestepError::Grid(_) | TimestepError::Setup(_) => CliError::Config(e.to_string()),
            TimestepError::Step { .. } => CliError::Solver(e.to_string()),
        }
    }
}

impl From<ReferenceError> for CliError {
    fn from(e: ReferenceError) -> Self {
        match e {
            ReferenceError::Solve(_) => CliError::Solver(e.to_string()),
            _ => CliError::Config(format!("reference: {e}")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wavegal",
    version,
    about = "Adaptive wavelet-Galerkin heat conduction in 2-D composites"
)]
pub struct Cli {
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write field, active set, diagnostics and report.
    Run { config: PathBuf },
    /// Repeat a scenario over thresholds or levels and tabulate the errors.
    Study {
        config: PathBuf,
        /// `eps=1e-2,1e-3` or `J=4,5,6`.
        #[arg(long)]
        vary: StudyParam,
        /// Add a run on the full index set for every level in the study.
        #[arg(long)]
        uniform_baseline: bool,
    },
    /// Run the scenario and its reference; write both fields and the errors.
    Compare { config: PathBuf },
    /// Print the full index set of a family as CSV.
    DumpBasis { family: BasisFamily, j: u32 },
}

/// Reads and validates a configuration file, applying `WAVEGAL_OUT`.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Ok(dir) = std::env::var(OUT_ENV) {
        if !dir.is_empty() {
            cfg.output.dir = dir;
        }
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let report = run(&cfg, Path::new(&cfg.output.dir))?;
            print!("{}", report.summary());
        }
        Command::Study {
            config,
            vary,
            uniform_baseline,
        } => {
            let cfg = load_config(&config)?;
            let rows = study(&cfg, &vary, uniform_baseline, Path::new(&cfg.output.dir))?;
            for r in &rows {
                println!("{}", r.csv_line());
            }
            if rows.iter().all(|r| r.outcome.is_err()) {
                return Err(CliError::Solver("every run of the study failed".into()));
            }
        }
        Command::Compare { config } => {
            let cfg = load_config(&config)?;
            let report = compare(&cfg, Path::new(&cfg.output.dir))?;
            print!("{}", report.to_kv());
        }
        Command::DumpBasis { family, j } => print!("{}", dump_basis(family, j)?),
    }
    Ok(())
}

/// Parses `std::env::args`, runs the command and maps the outcome to an
/// exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wavegal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
