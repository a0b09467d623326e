use std::path::PathBuf;

use clap::Args;
use ctrlscore::diag::{assumption1_check, small_t_limit_check};
use ctrlscore::gramian::node_gramians;
use ctrlscore::report::{write_report, Report};
use ctrlscore::{Error, Result};

use crate::pipeline::load_dynamics;
use crate::{resolve_format, DynamicsArgs, Format, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// Connectivity matrix (CSV or TSV), or A itself with --raw-A.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: f64,
    /// Also report the deviation of G(T)/T² from its small-horizon limit.
    #[arg(long = "small-T-check")]
    pub small_t_check: bool,
    /// Write the full report (including G) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to csv for a .csv output path, json otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
}

pub fn run(args: &DiagnoseArgs) -> Result<i32> {
    if !(args.horizon.is_finite() && args.horizon > 0.0) {
        return Err(Error::InvalidHorizon(args.horizon));
    }
    let loaded = load_dynamics(&args.matrix, args.dynamics.raw_a, args.dynamics.laplacian.into())?;
    let gs = node_gramians(&loaded.a, args.horizon)?;
    let mut report = assumption1_check(&gs)?;
    if args.small_t_check {
        report.small_t_deviation = Some(small_t_limit_check(&loaded.a, args.horizon)?);
    }
    println!("n = {}, T = {}", loaded.a.n(), args.horizon);
    println!("det G = {:e} (log|det G| = {})", report.det_g, report.log_abs_det_g);
    println!(
        "lambda_min(G) = {:e}, lambda_max(G) = {:e}",
        report.lambda_min_g, report.lambda_max_g
    );
    if let Some(d) = report.small_t_deviation {
        println!("small-T deviation = {d:e}");
    }
    println!(
        "verdict: node Gramians are {}",
        if report.assumption1_holds {
            "affinely independent"
        } else {
            "affinely dependent to working precision"
        }
    );
    if let Some(out) = &args.out {
        write_report(
            &Report::Diagnostics(&report),
            out,
            resolve_format(args.format, Some(out)),
        )?;
    }
    Ok(EXIT_OK)
}
