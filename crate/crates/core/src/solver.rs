//! The weighted expected-minimum-energy objective `J(p) = tr(W(p,T)⁻¹ M)`,
//! its derivatives, and a projected-gradient solver over the simplex.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::expm::matrix_exp;
use crate::gramian::{aggregate_gramian, feasibility, DynamicsMatrix, NodeGramianSet, FEASIBILITY_RTOL};
use crate::linalg::{eig_bounds, frobenius_inner, lower_triangular_inverse, symmetrize_in_place};
use crate::simplex::{project_simplex, Allocation};
use crate::task::WeightMatrix;

/// Maximum number of backtracking halvings per iteration.
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
    /// Largest per-coordinate move of a trial step (the step is scaled by
    /// `1/‖∇J‖∞`, which makes the iterates invariant to rescaling `M`).
    pub init_step: f64,
    pub tol_step: f64,
    pub tol_gradmap: f64,
    pub start: Option<Allocation>,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 10_000,
            armijo_sigma: 1e-4,
            armijo_beta: 0.5,
            init_step: 1.0,
            tol_step: 1e-9,
            tol_gradmap: 1e-8,
            start: None,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.armijo_sigma) {
            return Err(Error::InvalidParameter(format!(
                "armijo_sigma must lie in (0, 1), got {}",
                self.armijo_sigma
            )));
        }
        if !open_unit(self.armijo_beta) {
            return Err(Error::InvalidParameter(format!(
                "armijo_beta must lie in (0, 1), got {}",
                self.armijo_beta
            )));
        }
        for (name, v) in [
            ("init_step", self.init_step),
            ("tol_step", self.tol_step),
            ("tol_gradmap", self.tol_gradmap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverWarnings {
    /// `M = 0`: every feasible allocation is optimal.
    pub degenerate_weight: bool,
    /// `M` is only semidefinite, so the optimizer need not be unique.
    pub uniqueness_caveat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score: Allocation,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_map_norm: f64,
    pub lambda_min_final: f64,
    pub warnings: SolverWarnings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

/// A feasible point. Everything downstream goes through the inverse Cholesky
/// factor `L⁻¹` of `W = LLᵀ`, so the hot path is matrix products.
struct Point {
    p: Allocation,
    l_inv: DMatrix<f64>,
    /// `L⁻¹ M L⁻ᵀ`
    n_mat: DMatrix<f64>,
    value: f64,
}

impl Point {
    fn lambda_min(&self, gs: &NodeGramianSet) -> f64 {
        aggregate_gramian(gs, &self.p).map_or(f64::NAN, |w| eig_bounds(&w).0)
    }
}

/// Feasibility by the same rule as [`feasibility`], but certified without an
/// eigendecomposition whenever `1/tr(W⁻¹) ≤ λ_min` and `λ_max ≤ tr(W)` already
/// clear the threshold.
fn evaluate(gs: &NodeGramianSet, m: &DMatrix<f64>, p: Allocation) -> Result<Point> {
    let w = aggregate_gramian(gs, &p)?;
    let infeasible = |w: &DMatrix<f64>| Error::Infeasible {
        lambda_min: feasibility(w).lambda_min,
    };
    let Some(chol) = w.clone().cholesky() else {
        return Err(infeasible(&w));
    };
    let l_inv = lower_triangular_inverse(chol.l_dirty()).ok_or_else(|| infeasible(&w))?;
    // tr(W⁻¹) = ‖L⁻¹‖²_F
    let certified = l_inv.norm_squared().recip() > FEASIBILITY_RTOL * w.trace().max(1.0);
    if !certified && !feasibility(&w).feasible {
        return Err(infeasible(&w));
    }
    let mut n_mat = &l_inv * m * l_inv.transpose();
    symmetrize_in_place(&mut n_mat);
    let value = n_mat.trace();
    Ok(Point { p, l_inv, n_mat, value })
}

fn check_weight(gs: &NodeGramianSet, m: &WeightMatrix) -> Result<()> {
    if m.n() != gs.n() {
        return Err(Error::DimensionMismatch {
            expected: gs.n(),
            got: m.n(),
        });
    }
    Ok(())
}

/// `J(p) = tr(W(p,T)⁻¹ M) = tr(L⁻¹ M L⁻ᵀ)` with `W = LLᵀ`.
pub fn objective(p: &Allocation, gs: &NodeGramianSet, m: &WeightMatrix) -> Result<f64> {
    check_weight(gs, m)?;
    Ok(evaluate(gs, &m.m, p.clone())?.value)
}

fn gradient_at(point: &Point, gs: &NodeGramianSet) -> DVector<f64> {
    // K = W⁻¹ M W⁻¹ = L⁻ᵀ (L⁻¹ M L⁻ᵀ) L⁻¹, then g_i = −⟨K, W_i⟩_F.
    let mut k = point.l_inv.tr_mul(&(&point.n_mat * &point.l_inv));
    symmetrize_in_place(&mut k);
    -gs.inner_products(&k).expect("K has the Gramian shape")
}

/// `∂J/∂p_i = −tr(W⁻¹ W_i W⁻¹ M)`.
pub fn gradient(p: &Allocation, gs: &NodeGramianSet, m: &WeightMatrix) -> Result<DVector<f64>> {
    check_weight(gs, m)?;
    let point = evaluate(gs, &m.m, p.clone())?;
    Ok(gradient_at(&point, gs))
}

/// `D²J(p)[d, d] = 2 tr(W⁻¹ ΔW W⁻¹ ΔW W⁻¹ M)` with `ΔW = Σ d_i W_i`; `d` must
/// be tangent to the simplex.
pub fn second_directional(p: &Allocation, d: &DVector<f64>, gs: &NodeGramianSet, m: &WeightMatrix) -> Result<f64> {
    check_weight(gs, m)?;
    let sum: f64 = d.iter().sum();
    if sum.abs() > 1e-10 {
        return Err(Error::NotTangent(sum));
    }
    let point = evaluate(gs, &m.m, p.clone())?;
    // With D = L⁻¹ ΔW L⁻ᵀ and N = L⁻¹ M L⁻ᵀ the trace is tr(D D N).
    let delta = gs.combine(d.as_slice())?;
    let dm = &point.l_inv * delta * point.l_inv.transpose();
    Ok(2.0 * frobenius_inner(&(&dm * &dm), &point.n_mat))
}

/// Minimum input energy `zᵀ W(p,T)⁻¹ z` with `z = x_T − exp(AT) x₀`.
pub fn min_energy(
    x0: &DVector<f64>,
    x_t: &DVector<f64>,
    p: &Allocation,
    gs: &NodeGramianSet,
    a: &DynamicsMatrix,
) -> Result<f64> {
    let n = gs.n();
    for v in [x0, x_t] {
        crate::linalg::ensure_len(v, n)?;
    }
    if a.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.n(),
        });
    }
    let phi = matrix_exp(a.entries(), gs.horizon())?;
    let z = x_t - phi * x0;
    let w = aggregate_gramian(gs, p)?;
    let feas = feasibility(&w);
    if !feas.feasible {
        return Err(Error::Infeasible {
            lambda_min: feas.lambda_min,
        });
    }
    let chol = w.cholesky().ok_or(Error::Infeasible {
        lambda_min: feas.lambda_min,
    })?;
    // ‖L⁻¹ z‖² keeps the value non-negative in floating point.
    let y = chol.l_dirty().solve_lower_triangular(&z).ok_or(Error::Infeasible {
        lambda_min: feas.lambda_min,
    })?;
    Ok(y.norm_squared())
}

/// Projected gradient with Armijo backtracking along the projection arc.
///
/// Trial points whose aggregate Gramian fails the feasibility test are
/// treated as having infinite objective.
pub fn solve(gs: &NodeGramianSet, m: &WeightMatrix, opts: &SolverOptions) -> Result<ScoreReport> {
    opts.validate()?;
    check_weight(gs, m)?;
    let n = gs.n();
    let start = match &opts.start {
        Some(p) if p.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
        Some(p) => p.clone(),
        None => Allocation::uniform(n),
    };
    let mut cur = evaluate(gs, &m.m, start)?;
    let mut warnings = SolverWarnings {
        degenerate_weight: false,
        uniqueness_caveat: !m.positive_definite,
    };
    let mut trace = opts.trace.then(Vec::new);

    if m.is_zero() {
        warn!("weighting matrix is zero; returning the start allocation");
        warnings.degenerate_weight = true;
        return Ok(ScoreReport {
            objective_value: cur.value,
            lambda_min_final: cur.lambda_min(gs),
            score: cur.p,
            iterations: 0,
            converged: true,
            gradient_map_norm: 0.0,
            warnings,
            trace,
        });
    }
    if warnings.uniqueness_caveat {
        warn!("weighting matrix is only semidefinite; the score may not be unique");
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut gradmap;
    let mut previous: Option<(DVector<f64>, DVector<f64>)> = None;

    loop {
        let g = gradient_at(&cur, gs);
        let gscale = g.amax();
        if gscale == 0.0 || !gscale.is_finite() {
            gradmap = 0.0;
            converged = gscale == 0.0;
            break;
        }
        let dir = &g / gscale;
        let p = cur.p.as_vector().clone();
        gradmap = (&p - project_simplex(&(&p - &dir)).as_vector()).amax();
        if gradmap < opts.tol_gradmap {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }

        // Barzilai–Borwein trial step sᵀy/yᵀy, in units of the normalised
        // direction so it is unchanged when M is rescaled.
        let spectral = previous.as_ref().and_then(|(pp, pg)| {
            let s = &p - pp;
            let y = &g - pg;
            let sy = s.dot(&y);
            (sy > 0.0).then(|| (sy / y.norm_squared() * gscale).min(opts.init_step))
        });
        let mut search = line_search(gs, &m.m, &cur, &g, &dir, spectral.unwrap_or(opts.init_step), opts);
        if spectral.is_some() && !matches!(search, Search::Accepted { .. }) {
            search = line_search(gs, &m.m, &cur, &g, &dir, opts.init_step, opts);
        }

        match search {
            Search::Accepted { point, alpha, step } => {
                previous = Some((p, g));
                cur = point;
                iterations += 1;
                if let Some(t) = trace.as_mut() {
                    t.push(TraceEntry {
                        iteration: iterations,
                        objective: cur.value,
                        step_size: alpha,
                    });
                }
                if step < opts.tol_step {
                    converged = true;
                    break;
                }
            }
            Search::TinyStep => {
                converged = true;
                break;
            }
            Search::Failed => return Err(Error::Stagnation { iteration: iterations }),
        }
    }

    Ok(ScoreReport {
        objective_value: cur.value,
        lambda_min_final: cur.lambda_min(gs),
        score: cur.p,
        iterations,
        converged,
        gradient_map_norm: gradmap,
        warnings,
        trace,
    })
}

enum Search {
    Accepted {
        point: Point,
        alpha: f64,
        step: f64,
    },
    /// The projected move fell below `tol_step` before any step was accepted.
    TinyStep,
    Failed,
}

/// Armijo backtracking along the projection arc `α ↦ Π(p − α·dir)`.
/// Infeasible trial points count as `+∞`.
fn line_search(
    gs: &NodeGramianSet,
    m: &DMatrix<f64>,
    cur: &Point,
    g: &DVector<f64>,
    dir: &DVector<f64>,
    alpha0: f64,
    opts: &SolverOptions,
) -> Search {
    let p = cur.p.as_vector();
    let mut alpha = alpha0;
    for _ in 0..=MAX_BACKTRACKS {
        let trial = project_simplex(&(p - dir * alpha));
        let delta = trial.as_vector() - p;
        let step = delta.amax();
        if step < opts.tol_step {
            return Search::TinyStep;
        }
        if let Ok(point) = evaluate(gs, m, trial) {
            if point.value <= cur.value + opts.armijo_sigma * g.dot(&delta) {
                return Search::Accepted { point, alpha, step };
            }
        }
        alpha *= opts.armijo_beta;
    }
    Search::Failed
}

/// Exhaustive minimisation over the simplex lattice with the given spacing.
/// Infeasible lattice points are skipped; ties go to the lexicographically
/// first point.
pub fn grid_oracle(gs: &NodeGramianSet, m: &WeightMatrix, resolution: f64) -> Result<Allocation> {
    grid_oracle_with(gs, m, resolution, Execution::default())
}

pub fn grid_oracle_with(gs: &NodeGramianSet, m: &WeightMatrix, resolution: f64, exec: Execution) -> Result<Allocation> {
    check_weight(gs, m)?;
    let n = gs.n();
    if n > 4 {
        return Err(Error::GridTooLarge(n));
    }
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::InvalidParameter(format!(
            "resolution must lie in (0, 0.1], got {resolution}"
        )));
    }
    let k = (1.0 / resolution).round() as usize;
    if n == 1 {
        return Ok(Allocation::uniform(1));
    }

    let eval = |counts: &[usize]| -> Option<f64> {
        let mut p: Vec<f64> = counts.iter().map(|c| *c as f64 / k as f64).collect();
        let head: f64 = p[..n - 1].iter().sum();
        p[n - 1] = (1.0 - head).max(0.0);
        let alloc = Allocation::from_slice(&p).ok()?;
        evaluate(gs, &m.m, alloc).ok().map(|pt| pt.value)
    };

    // Best point for each value of the first coordinate, searched independently.
    let per_first = map_indices(k + 1, exec, |c0| {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut counts = vec![0usize; n];
        counts[0] = c0;
        enumerate_rest(&mut counts, 1, k - c0, &mut |c| {
            if let Some(v) = eval(c) {
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, c.to_vec()));
                }
            }
        });
        best
    });

    let mut best: Option<(f64, Vec<usize>)> = None;
    for cand in per_first.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bv, _)| cand.0 < *bv) {
            best = Some(cand);
        }
    }
    let (_, counts) = best.ok_or(Error::Infeasible { lambda_min: 0.0 })?;
    let mut p: Vec<f64> = counts.iter().map(|c| *c as f64 / k as f64).collect();
    let head: f64 = p[..n - 1].iter().sum();
    p[n - 1] = (1.0 - head).max(0.0);
    Allocation::from_slice(&p)
}

fn enumerate_rest(counts: &mut [usize], idx: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        enumerate_rest(counts, idx + 1, remaining - c, f);
    }
}
