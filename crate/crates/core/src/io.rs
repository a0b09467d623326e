//! Reading connectivity matrices and task files; building Laplacian dynamics.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::{DynamicsMatrix, Provenance};
use crate::task::{TaskMode, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    CsvDense,
    TsvDense,
}

impl MatrixFormat {
    /// `.tsv` / `.tab` are tab separated, everything else comma separated.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => MatrixFormat::TsvDense,
            _ => MatrixFormat::CsvDense,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            MatrixFormat::CsvDense => b',',
            MatrixFormat::TsvDense => b'\t',
        }
    }
}

/// Non-negative weighted adjacency matrix, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    entries: DMatrix<f64>,
    labels: Option<Vec<String>>,
    one_based_ids: bool,
}

impl ConnectivityMatrix {
    pub fn new(entries: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = crate::linalg::ensure_square(&entries)?;
        crate::linalg::ensure_finite(&entries)?;
        let negative: Vec<String> = entries
            .row_iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v < 0.0)
                    .map(move |(j, v)| format!("({}, {}) = {}", i + 1, j + 1, v))
                    .collect::<Vec<_>>()
            })
            .collect();
        if !negative.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "connectivity has negative entries: {}",
                negative.join(", ")
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: l.len(),
                });
            }
        }
        Ok(ConnectivityMatrix {
            entries,
            labels,
            one_based_ids: true,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn one_based_ids(&self) -> bool {
        self.one_based_ids
    }
}

/// A numeric grid with an optional label header row.
#[derive(Debug, Clone)]
pub struct NumericGrid {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a delimited numeric grid. A first row in which no cell parses as a
/// number is taken as a header; rows must all have the same length.
pub fn parse_grid(text: &str, format: MatrixFormat, source: &str) -> Result<NumericGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(format.delimiter())
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |row: usize, col: usize, msg: String| Error::Parse {
        path: source.to_string(),
        row,
        col,
        msg,
    };

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (r, rec) in reader.records().enumerate() {
        let line = r + 1;
        let rec = rec.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if r == 0 && rec.iter().all(|c| c.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(rec.len());
            continue;
        }
        if let Some(w) = width {
            if rec.len() != w {
                return Err(parse_err(
                    line,
                    rec.len(),
                    format!("ragged row: expected {w} cells, found {}", rec.len()),
                ));
            }
        } else {
            width = Some(rec.len());
        }
        let mut row = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            let v = cell
                .parse::<f64>()
                .map_err(|_| parse_err(line, c + 1, format!("not a number: {cell:?}")))?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(NumericGrid { header, rows })
}

fn grid_to_square(grid: &NumericGrid, source: &str) -> Result<DMatrix<f64>> {
    let n = grid.rows.len();
    let width = grid.rows.first().map_or(0, Vec::len);
    if n == 0 || width != n {
        return Err(Error::Parse {
            path: source.to_string(),
            row: n,
            col: width,
            msg: format!("matrix is not square ({n} rows x {width} columns)"),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| grid.rows[i][j]))
}

pub fn parse_connectivity(text: &str, format: MatrixFormat, source: &str) -> Result<ConnectivityMatrix> {
    let grid = parse_grid(text, format, source)?;
    let entries = grid_to_square(&grid, source)?;
    for (i, row) in grid.rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    row: i + 1,
                    col: j + 1,
                    msg: "non-finite value".into(),
                });
            }
        }
    }
    ConnectivityMatrix::new(entries, grid.header)
}

pub fn load_connectivity(path: &Path, format: MatrixFormat) -> Result<ConnectivityMatrix> {
    let text = read_text(path)?;
    parse_connectivity(&text, format, &path.display().to_string())
}

/// Dense square matrix file (CSV/TSV by extension), header row optional.
pub fn read_dense_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_labeled_matrix(path).map(|(m, _)| m)
}

/// Like [`read_dense_matrix`], also returning the header row if present.
/// Entries may be negative.
pub fn read_labeled_matrix(path: &Path) -> Result<(DMatrix<f64>, Option<Vec<String>>)> {
    let text = read_text(path)?;
    let src = path.display().to_string();
    let grid = parse_grid(&text, MatrixFormat::from_path(path), &src)?;
    let m = grid_to_square(&grid, &src)?;
    Ok((m, grid.header))
}

/// Vector stored as a single row or a single column.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let text = read_text(path)?;
    let src = path.display().to_string();
    let grid = parse_grid(&text, MatrixFormat::from_path(path), &src)?;
    let values: Vec<f64> = match (grid.rows.len(), grid.rows.first().map_or(0, Vec::len)) {
        (1, _) => grid.rows[0].clone(),
        (_, 1) => grid.rows.iter().map(|r| r[0]).collect(),
        (r, c) => {
            return Err(Error::Parse {
                path: src,
                row: r,
                col: c,
                msg: "expected a single row or a single column".into(),
            })
        }
    };
    Ok(DVector::from_vec(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianConvention {
    /// `L = D_out − C` with out-degrees from row sums.
    #[default]
    Out,
    /// `L = D_in − Cᵀ` with in-degrees from column sums.
    In,
}

/// `A = −L`; both conventions give zero row sums, i.e. `A·1 = 0`.
pub fn laplacian_dynamics(c: &ConnectivityMatrix, convention: LaplacianConvention) -> DynamicsMatrix {
    let adj = match convention {
        LaplacianConvention::Out => c.entries().clone(),
        LaplacianConvention::In => c.entries().transpose(),
    };
    let n = adj.nrows();
    let mut a = adj.clone();
    for i in 0..n {
        let degree: f64 = adj.row(i).iter().sum();
        a[(i, i)] -= degree;
    }
    DynamicsMatrix::new(a, Provenance::NegativeLaplacian).expect("negative Laplacian has zero row sums")
}

/// Covariance of `x₀` as written in a task file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    Isotropic { scale: f64 },
    Dense { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IndexBase {
    #[default]
    One,
    Zero,
}

/// On-disk JSON form of a task. Which optional fields are allowed depends on
/// `mode`; relative paths resolve against the task file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_base: Option<IndexBase>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0_indices: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0_value: Option<f64>,
    #[serde(rename = "xT_indices", default, skip_serializing_if = "Option::is_none")]
    pub xt_indices: Option<Vec<i64>>,
    #[serde(rename = "xT_value", default, skip_serializing_if = "Option::is_none")]
    pub xt_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<CovarianceSpec>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0_path: Option<String>,
    #[serde(rename = "muT_path", default, skip_serializing_if = "Option::is_none")]
    pub mut_path: Option<String>,
    #[serde(rename = "sigmaT_path", default, skip_serializing_if = "Option::is_none")]
    pub sigmat_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_cov_path: Option<String>,

    #[serde(rename = "M_path", default, skip_serializing_if = "Option::is_none")]
    pub m_path: Option<String>,
}

impl TaskFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))
    }

    fn present_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |present: bool, name: &'static str| {
            if present {
                out.push(name);
            }
        };
        mark(self.mu0_indices.is_some(), "mu0_indices");
        mark(self.mu0_value.is_some(), "mu0_value");
        mark(self.xt_indices.is_some(), "xT_indices");
        mark(self.xt_value.is_some(), "xT_value");
        mark(self.sigma0.is_some(), "sigma0");
        mark(self.scale.is_some(), "scale");
        mark(self.mu0_path.is_some(), "mu0_path");
        mark(self.sigma0_path.is_some(), "sigma0_path");
        mark(self.mut_path.is_some(), "muT_path");
        mark(self.sigmat_path.is_some(), "sigmaT_path");
        mark(self.cross_cov_path.is_some(), "cross_cov_path");
        mark(self.m_path.is_some(), "M_path");
        out
    }

    /// Validates mode-specific fields and materialises the task.
    pub fn resolve(&self, base_dir: &Path) -> Result<TaskSpec> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Schema("\"n\" must be >= 1".into()));
        }
        let (allowed, required): (&[&str], &[&str]) = match self.mode.as_str() {
            "deterministic_target" => (
                &["mu0_indices", "mu0_value", "xT_indices", "xT_value", "sigma0"],
                &["mu0_indices", "xT_indices", "sigma0"],
            ),
            "isotropic" => (&["scale"], &["scale"]),
            "second_moment" => {
                let f = &["mu0_path", "sigma0_path", "muT_path", "sigmaT_path", "cross_cov_path"];
                (f, f)
            }
            "explicit_M" => (&["M_path"], &["M_path"]),
            other => return Err(Error::Schema(format!("unknown mode {other:?}"))),
        };
        let present = self.present_fields();
        if let Some(extra) = present.iter().find(|f| !allowed.contains(f)) {
            return Err(Error::Schema(format!(
                "field {extra:?} is not valid in mode {:?}",
                self.mode
            )));
        }
        if let Some(missing) = required.iter().find(|f| !present.contains(f)) {
            return Err(Error::Schema(format!(
                "mode {:?} requires field {missing:?}",
                self.mode
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Schema(format!("\"T\" must be > 0, got {}", self.horizon)));
        }

        let path = |p: &String| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let base = self.index_base.unwrap_or_default();
        let schema = |e: Error| match e {
            Error::Io { .. } | Error::Parse { .. } => e,
            other => Error::Schema(other.to_string()),
        };

        let mode = match self.mode.as_str() {
            "deterministic_target" => {
                let mu0 = indicator(
                    n,
                    self.mu0_indices.as_deref().unwrap_or(&[]),
                    self.mu0_value.unwrap_or(1.0),
                    base,
                    "mu0_indices",
                )?;
                let x_t = indicator(
                    n,
                    self.xt_indices.as_deref().unwrap_or(&[]),
                    self.xt_value.unwrap_or(1.0),
                    base,
                    "xT_indices",
                )?;
                let sigma0 = match self.sigma0.as_ref().expect("required") {
                    CovarianceSpec::Isotropic { scale } => {
                        if !(scale.is_finite() && *scale > 0.0) {
                            return Err(Error::Schema(format!("sigma0 scale must be > 0, got {scale}")));
                        }
                        DMatrix::identity(n, n) * *scale
                    }
                    CovarianceSpec::Dense { path: p } => read_dense_matrix(&path(p))?,
                };
                TaskMode::DeterministicTarget { mu0, sigma0, x_t }
            }
            "isotropic" => {
                let scale = self.scale.expect("required");
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::Schema(format!("scale must be > 0, got {scale}")));
                }
                TaskMode::Isotropic { scale }
            }
            "second_moment" => TaskMode::SecondMoment {
                mu0: read_vector(&path(self.mu0_path.as_ref().expect("required")))?,
                sigma0: read_dense_matrix(&path(self.sigma0_path.as_ref().expect("required")))?,
                mu_t: read_vector(&path(self.mut_path.as_ref().expect("required")))?,
                sigma_t: read_dense_matrix(&path(self.sigmat_path.as_ref().expect("required")))?,
                cross_cov: read_dense_matrix(&path(self.cross_cov_path.as_ref().expect("required")))?,
            },
            _ => TaskMode::ExplicitM {
                m: read_dense_matrix(&path(self.m_path.as_ref().expect("required")))?,
            },
        };
        TaskSpec::new(n, self.horizon, mode).map_err(schema)
    }
}

fn indicator(n: usize, indices: &[i64], value: f64, base: IndexBase, field: &str) -> Result<DVector<f64>> {
    if !value.is_finite() {
        return Err(Error::Schema(format!("{field} value must be finite")));
    }
    let offset = match base {
        IndexBase::One => 1,
        IndexBase::Zero => 0,
    };
    let mut v = DVector::zeros(n);
    for &idx in indices {
        let zero_based = idx - offset;
        if zero_based < 0 || zero_based >= n as i64 {
            let (lo, hi) = (offset, n as i64 - 1 + offset);
            return Err(Error::Schema(format!("{field}: index {idx} outside [{lo}, {hi}]")));
        }
        v[zero_based as usize] = value;
    }
    Ok(v)
}

pub fn load_task_spec(path: &Path) -> Result<TaskSpec> {
    let text = read_text(path)?;
    let file = TaskFile::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    file.resolve(base)
}
