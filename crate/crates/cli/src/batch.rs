use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ctrlscore::io::load_task_spec;
use ctrlscore::report::{csv_field, fmt_f64, render_report, write_text, Report, ReportFormat, ScoreTable};
use ctrlscore::{Error, Execution, Result, TaskSpec};
use rayon::prelude::*;

use crate::pipeline::{score_network, Scored};
use crate::rank::{mean_ranking, node_summary_csv, ranking_csv};
use crate::score::SolverArgs;
use crate::{DynamicsArgs, EXIT_NOT_CONVERGED, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    /// Directory of per-subject matrix files (.csv or .tsv).
    #[arg(long)]
    pub matrix_dir: PathBuf,
    /// Task JSON file shared by every subject.
    #[arg(long)]
    pub task: PathBuf,
    /// Receives subjects/, manifest.csv, scores_table.csv, node_summary.csv and ranking.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "CTRLSCORE_JOBS")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
}

/// Matrix files in `dir`, keyed by file stem and sorted.
pub fn list_subjects(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut subjects = BTreeMap::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        let is_matrix = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("tsv"));
        if !path.is_file() || !is_matrix {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Schema(format!("{}: file name is not valid UTF-8", path.display())))?;
        if let Some(prev) = subjects.insert(stem.clone(), path.clone()) {
            return Err(Error::Schema(format!(
                "subject {stem:?} appears twice: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    if subjects.is_empty() {
        return Err(Error::Schema(format!(
            "{}: no .csv or .tsv matrix files",
            dir.display()
        )));
    }
    Ok(subjects.into_iter().collect())
}

struct Outcome {
    subject: String,
    file: PathBuf,
    result: Result<Scored>,
}

impl Outcome {
    fn exit_code(&self) -> i32 {
        match &self.result {
            Ok(s) if s.report.converged => EXIT_OK,
            Ok(_) => EXIT_NOT_CONVERGED,
            Err(e) => e.category().exit_code(),
        }
    }
}

fn manifest_csv(outcomes: &[Outcome]) -> String {
    let mut out = String::from("subject,file,status,exit_code,iterations,objective_value,message\n");
    for o in outcomes {
        let file = o
            .file
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (status, iters, obj, msg) = match &o.result {
            Ok(s) if s.report.converged => (
                "ok",
                s.report.iterations.to_string(),
                fmt_f64(s.report.objective_value),
                String::new(),
            ),
            Ok(s) => (
                "not_converged",
                s.report.iterations.to_string(),
                fmt_f64(s.report.objective_value),
                format!("gradient-map norm {}", fmt_f64(s.report.gradient_map_norm)),
            ),
            Err(e) => ("failed", String::new(), String::new(), e.to_string()),
        };
        let _ = writeln!(
            out,
            "{},{},{status},{},{iters},{obj},{}",
            csv_field(&o.subject),
            csv_field(&file),
            o.exit_code(),
            csv_field(&msg)
        );
    }
    out
}

fn score_all(args: &BatchArgs, spec: &TaskSpec, subjects: &[(String, PathBuf)]) -> Result<Vec<Outcome>> {
    let opts = args.solver.options()?;
    let jobs = match args.jobs {
        Some(0) => return Err(Error::InvalidParameter("--jobs must be >= 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} worker threads: {e}")))?;
    let dynamics = (args.dynamics.raw_a, args.dynamics.laplacian.into());
    // Each subject runs sequentially; collect() keeps the sorted subject order.
    Ok(pool.install(|| {
        subjects
            .par_iter()
            .map(|(subject, file)| Outcome {
                subject: subject.clone(),
                file: file.clone(),
                result: score_network(file, dynamics, spec, &opts, Execution::Sequential),
            })
            .collect()
    }))
}

pub fn run(args: &BatchArgs) -> Result<i32> {
    let spec = load_task_spec(&args.task)?;
    let subjects = list_subjects(&args.matrix_dir)?;
    let outcomes = score_all(args, &spec, &subjects)?;

    let out = &args.out_dir;
    let mut table = ScoreTable {
        subjects: Vec::new(),
        nodes: Vec::new(),
        values: Vec::new(),
    };
    for o in &outcomes {
        let Ok(scored) = &o.result else { continue };
        let text = render_report(
            &Report::Score {
                report: &scored.report,
                labels: scored.labels.as_deref(),
            },
            ReportFormat::Csv,
        )?;
        write_text(&out.join("subjects").join(format!("{}.csv", o.subject)), &text)?;
        if !scored.report.converged {
            continue;
        }
        if table.nodes.is_empty() {
            table.nodes = match &scored.labels {
                Some(l) => l.clone(),
                None => (1..=spec.n()).map(|i| i.to_string()).collect(),
            };
        }
        table.subjects.push(o.subject.clone());
        table.values.push(scored.report.score.as_slice().to_vec());
    }
    write_text(&out.join("manifest.csv"), &manifest_csv(&outcomes))?;
    if !table.subjects.is_empty() {
        write_text(&out.join("scores_table.csv"), &table.to_csv())?;
        write_text(&out.join("node_summary.csv"), &node_summary_csv(&table))?;
        write_text(&out.join("ranking.csv"), &ranking_csv(&mean_ranking(&table)))?;
    }

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| o.exit_code() != EXIT_OK).collect();
    eprintln!("scored {}/{} subjects", outcomes.len() - failed.len(), outcomes.len());
    for o in &failed {
        match &o.result {
            Err(e) => eprintln!("  {}: {e}", o.subject),
            Ok(_) => eprintln!("  {}: not converged", o.subject),
        }
    }
    Ok(failed.first().map_or(EXIT_OK, |o| o.exit_code()))
}
