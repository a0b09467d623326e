#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn ctrlscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctrlscore"))
        .args(args)
        .env_remove("CTRLSCORE_JOBS")
        .output()
        .expect("spawn ctrlscore")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn write(path: &Path, text: &str) -> PathBuf {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).unwrap();
    }
    fs::write(path, text).unwrap();
    path.to_path_buf()
}

pub fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn arg(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Comma-separated rows of a square matrix.
pub fn matrix_csv(rows: &[&[f64]]) -> String {
    rows.iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn zeros_csv(n: usize) -> String {
    let row = vec![0.0; n];
    matrix_csv(&vec![row.as_slice(); n])
}

pub fn diag_csv(d: &[f64]) -> String {
    let n = d.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect();
    matrix_csv(&rows.iter().map(Vec::as_slice).collect::<Vec<_>>())
}

pub fn isotropic_task(dir: &Path, n: usize, t: f64) -> PathBuf {
    write(
        &dir.join("iso.json"),
        &format!(r#"{{"n": {n}, "T": {t}, "mode": "isotropic", "scale": 1.0}}"#),
    )
}

/// Task whose weight matrix is read from `m.csv` next to the task file.
pub fn explicit_task(dir: &Path, n: usize, t: f64, m_csv: &str) -> PathBuf {
    write(&dir.join("m.csv"), m_csv);
    write(
        &dir.join("explicit.json"),
        &format!(r#"{{"n": {n}, "T": {t}, "mode": "explicit_M", "M_path": "m.csv"}}"#),
    )
}

/// Score column of a `node_id,label,score` file.
pub fn scores(csv: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

/// Value for `key` in a `key,value` file.
pub fn kv(csv: &str, key: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("missing key {key}"))
        .to_string()
}
