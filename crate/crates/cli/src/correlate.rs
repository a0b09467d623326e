use std::path::{Path, PathBuf};

use clap::Args;
use ctrlscore::report::{read_scores_csv, render_report, write_text, CorrelationPair, CorrelationReport, Report};
use ctrlscore::stats::{mean, pearson, sample_std, spearman};
use ctrlscore::{Error, Result};

use crate::{resolve_format, Format, EXIT_OK};

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Directory of per-subject score CSVs (node_id,label,score).
    #[arg(long)]
    pub a: PathBuf,
    /// Directory with the same subjects and node count as --a.
    #[arg(long)]
    pub b: PathBuf,
    /// Correlation report; csv or json.
    #[arg(long)]
    pub out: PathBuf,
    /// Name for the --a scores; defaults to the directory name.
    #[arg(long)]
    pub name_a: Option<String>,
    /// Name for the --b scores; defaults to the directory name.
    #[arg(long)]
    pub name_b: Option<String>,
    /// Also report Spearman rank correlation.
    #[arg(long)]
    pub spearman: bool,
    /// Defaults to csv for a .csv output path, json otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Score CSVs in `dir`, sorted by subject (file stem).
fn score_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files: Vec<(String, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
        .collect();
    files.sort();
    Ok(files)
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .map_or_else(|| dir.display().to_string(), |s| s.to_string_lossy().into_owned())
}

type Method = fn(&[f64], &[f64]) -> Result<f64>;

/// Per-subject correlations between aligned score directories.
pub fn correlate_dirs(
    a: &Path,
    b: &Path,
    name_a: &str,
    name_b: &str,
    with_spearman: bool,
) -> Result<CorrelationReport> {
    let fa = score_files(a)?;
    let fb = score_files(b)?;
    let subjects: Vec<String> = fa.iter().map(|(s, _)| s.clone()).collect();
    let subjects_b: Vec<String> = fb.iter().map(|(s, _)| s.clone()).collect();
    if subjects.is_empty() {
        return Err(Error::Alignment(format!("{}: no score files", a.display())));
    }
    if subjects != subjects_b {
        let only_a: Vec<&String> = subjects.iter().filter(|s| !subjects_b.contains(s)).collect();
        let only_b: Vec<&String> = subjects_b.iter().filter(|s| !subjects.contains(s)).collect();
        return Err(Error::Alignment(format!(
            "subject sets differ: only in {name_a}: {only_a:?}; only in {name_b}: {only_b:?}"
        )));
    }

    let mut pairs_data = Vec::with_capacity(subjects.len());
    for ((subject, pa), (_, pb)) in fa.iter().zip(&fb) {
        let xa = read_scores_csv(pa)?.scores;
        let xb = read_scores_csv(pb)?.scores;
        if xa.len() != xb.len() {
            return Err(Error::Alignment(format!(
                "subject {subject}: {} nodes in {name_a} but {} in {name_b}",
                xa.len(),
                xb.len()
            )));
        }
        pairs_data.push((xa, xb));
    }

    let mut methods: Vec<(&str, Method)> = vec![("pearson", pearson)];
    if with_spearman {
        methods.push(("spearman", spearman));
    }
    let mut pairs = Vec::new();
    for (method, f) in methods {
        let per_subject_r = subjects
            .iter()
            .zip(&pairs_data)
            .map(|(s, (xa, xb))| f(xa, xb).map_err(|e| Error::UndefinedCorrelation(format!("subject {s}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        pairs.push(CorrelationPair {
            name_a: name_a.to_string(),
            name_b: name_b.to_string(),
            method: method.to_string(),
            subjects: subjects.clone(),
            mean_r: mean(&per_subject_r),
            std_r: sample_std(&per_subject_r),
            per_subject_r,
        });
    }
    Ok(CorrelationReport { pairs })
}

pub fn run(args: &CorrelateArgs) -> Result<i32> {
    let name_a = args.name_a.clone().unwrap_or_else(|| dir_name(&args.a));
    let name_b = args.name_b.clone().unwrap_or_else(|| dir_name(&args.b));
    let report = correlate_dirs(&args.a, &args.b, &name_a, &name_b, args.spearman)?;
    let format = resolve_format(args.format, Some(&args.out));
    write_text(&args.out, &render_report(&Report::Correlation(&report), format)?)?;
    for p in &report.pairs {
        println!(
            "{} vs {} ({}): mean r = {:.6}, std = {:.6} over {} subjects",
            p.name_a,
            p.name_b,
            p.method,
            p.mean_r,
            p.std_r,
            p.subjects.len()
        );
    }
    Ok(EXIT_OK)
}
