use std::io::Write as _;
use std::path::PathBuf;

use clap::Args;
use ctrlscore::io::load_task_spec;
use ctrlscore::report::{render_report, write_text, Report};
use ctrlscore::{Error, Execution, Result, SolverOptions};

use crate::pipeline::score_network;
use crate::{resolve_format, DynamicsArgs, Format, EXIT_NOT_CONVERGED, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Connectivity matrix (CSV or TSV), or A itself with --raw-A.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Task JSON file.
    #[arg(long)]
    pub task: PathBuf,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; defaults to csv for a .csv output path, json otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Stop when successive iterates differ by less than this (∞-norm).
    #[arg(long, default_value_t = SolverOptions::default().tol_step)]
    pub tol_step: f64,
    /// Stop when the projected-gradient mapping falls below this (∞-norm).
    #[arg(long, default_value_t = SolverOptions::default().tol_gradmap)]
    pub tol_gradmap: f64,
    /// Iteration cap; reaching it exits with status 2.
    #[arg(long, default_value_t = SolverOptions::default().max_iters)]
    pub max_iters: usize,
    /// Record the objective and step size of every accepted iteration.
    #[arg(long)]
    pub trace: bool,
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolverOptions> {
        let opts = SolverOptions {
            tol_step: self.tol_step,
            tol_gradmap: self.tol_gradmap,
            max_iters: self.max_iters,
            trace: self.trace,
            ..SolverOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

pub fn run(args: &ScoreArgs) -> Result<i32> {
    let opts = args.solver.options()?;
    let spec = load_task_spec(&args.task)?;
    let scored = score_network(
        &args.matrix,
        (args.dynamics.raw_a, args.dynamics.laplacian.into()),
        &spec,
        &opts,
        Execution::default(),
    )?;
    let format = resolve_format(args.format, args.out.as_ref());
    let text = render_report(
        &Report::Score {
            report: &scored.report,
            labels: scored.labels.as_deref(),
        },
        format,
    )?;
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?,
    }
    if scored.report.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "not converged: {} iterations, gradient-map norm {:e}",
            scored.report.iterations, scored.report.gradient_map_norm
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}
