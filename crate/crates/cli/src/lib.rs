//! Command-line front end: single-network scoring, batch runs over a
//! directory of subjects, rank summaries, correlation against external
//! score files, and genericity diagnostics.
//!
//! Exit codes: 0 success, 1 I/O, parse or usage error, 2 non-convergence,
//! 3 infeasibility, 4 schema, alignment or parameter error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrlscore::io::LaplacianConvention;
use ctrlscore::report::ReportFormat;
use ctrlscore::Error;

pub mod batch;
pub mod correlate;
pub mod diagnose;
pub mod pipeline;
pub mod rank;
pub mod score;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ctrlscore",
    version,
    about = "Task-weighted average-energy controllability scores"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one network against a task.
    Score(score::ScoreArgs),
    /// Score every matrix file in a directory.
    Batch(batch::BatchArgs),
    /// Top and bottom nodes by mean score, with per-subject distributions.
    Rank(rank::RankArgs),
    /// Per-subject correlation between two directories of score files.
    Correlate(correlate::CorrelateArgs),
    /// Check that the node Gramians are affinely independent.
    Diagnose(diagnose::DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Laplacian {
    /// `L = D_out − C`
    Out,
    /// `L = D_in − Cᵀ`
    In,
}

impl From<Laplacian> for LaplacianConvention {
    fn from(l: Laplacian) -> Self {
        match l {
            Laplacian::Out => LaplacianConvention::Out,
            Laplacian::In => LaplacianConvention::In,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

/// How a matrix file becomes dynamics.
#[derive(Debug, Clone, Args)]
pub struct DynamicsArgs {
    /// Treat the matrix file as A itself instead of a connectivity matrix.
    #[arg(long = "raw-A")]
    pub raw_a: bool,
    /// Degree convention for A = −L.
    #[arg(long, value_enum, default_value_t = Laplacian::Out)]
    pub laplacian: Laplacian,
}

/// Explicit `--format` wins; otherwise a `.csv` output path selects CSV and
/// anything else JSON.
pub(crate) fn resolve_format(explicit: Option<Format>, out: Option<&PathBuf>) -> ReportFormat {
    match explicit {
        Some(f) => f.into(),
        None if out.is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))) => ReportFormat::Csv,
        None => ReportFormat::Json,
    }
}

pub(crate) fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    err.category().exit_code()
}

/// Parses arguments and runs the selected command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Score(a) => score::run(a),
        Command::Batch(a) => batch::run(a),
        Command::Rank(a) => rank::run(a),
        Command::Correlate(a) => correlate::run(a),
        Command::Diagnose(a) => diagnose::run(a),
    };
    result.unwrap_or_else(|e| fail(&e))
}
