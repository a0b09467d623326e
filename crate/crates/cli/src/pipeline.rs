//! Matrix file → dynamics → Gramians → weighting → solve.

use std::path::Path;

use ctrlscore::gramian::{node_gramians_with, DynamicsMatrix};
use ctrlscore::io::{laplacian_dynamics, load_connectivity, read_labeled_matrix, LaplacianConvention, MatrixFormat};
use ctrlscore::solver::solve;
use ctrlscore::task::task_weight;
use ctrlscore::{Error, Execution, Result, ScoreReport, SolverOptions, TaskSpec};

#[derive(Debug, Clone)]
pub struct LoadedDynamics {
    pub a: DynamicsMatrix,
    pub labels: Option<Vec<String>>,
}

pub fn load_dynamics(path: &Path, raw_a: bool, convention: LaplacianConvention) -> Result<LoadedDynamics> {
    if raw_a {
        let (m, labels) = read_labeled_matrix(path)?;
        if labels.as_ref().is_some_and(|l| l.len() != m.nrows()) {
            return Err(Error::Schema(format!(
                "{}: header length does not match matrix size",
                path.display()
            )));
        }
        Ok(LoadedDynamics {
            a: DynamicsMatrix::raw(m)?,
            labels,
        })
    } else {
        let c = load_connectivity(path, MatrixFormat::from_path(path))?;
        Ok(LoadedDynamics {
            a: laplacian_dynamics(&c, convention),
            labels: c.labels().map(<[String]>::to_vec),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scored {
    pub report: ScoreReport,
    pub labels: Option<Vec<String>>,
}

/// Scores one network. `exec` only affects how the per-node Gramians are
/// spread over threads; results are bitwise identical either way.
pub fn score_network(
    matrix: &Path,
    dynamics: (bool, LaplacianConvention),
    spec: &TaskSpec,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<Scored> {
    let loaded = load_dynamics(matrix, dynamics.0, dynamics.1)?;
    if loaded.a.n() != spec.n() {
        return Err(Error::Schema(format!(
            "{}: network has {} nodes but the task has n = {}",
            matrix.display(),
            loaded.a.n(),
            spec.n()
        )));
    }
    let gs = node_gramians_with(&loaded.a, spec.horizon(), exec)?;
    let m = task_weight(spec, &loaded.a)?;
    let report = solve(&gs, &m, opts)?;
    Ok(Scored {
        report,
        labels: loaded.labels,
    })
}
