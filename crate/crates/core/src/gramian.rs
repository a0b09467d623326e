//! Node-wise finite-horizon controllability Gramians.
//!
//! `W_i(T) = ∫₀ᵀ exp(At) e_i e_iᵀ exp(Aᵀt) dt` is the Gramian of the system
//! when a single unit input channel acts on node `i`. For an allocation `p`
//! on the simplex the aggregate Gramian is the affine combination
//! `W(p, T) = Σ p_i W_i(T)`.
//!
//! Gramians are computed with Van Loan's block exponential. To keep the
//! block exponential well conditioned for long horizons, the block method is
//! applied on a short base horizon `T / 2^k` and then extended with the exact
//! doubling identity `W(2t) = W(t) + exp(At) W(t) exp(Aᵀt)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::expm::matrix_exp;
use crate::linalg::{eig_bounds, ensure_finite, ensure_square, one_norm, symmetrize_in_place};
use crate::simplex::Allocation;

/// Largest `‖A‖₁·t` on which the Van Loan block exponential is evaluated
/// directly before switching to horizon doubling.
const VAN_LOAN_BASE_NORM: f64 = 1.0;

/// Relative tolerance of the feasibility test on `λ_min(W)`.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    NegativeLaplacian,
}

/// The system matrix `A` of `ẋ = Ax`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsMatrix {
    entries: DMatrix<f64>,
    provenance: Provenance,
}

impl DynamicsMatrix {
    pub fn new(entries: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let n = ensure_square(&entries)?;
        ensure_finite(&entries)?;
        if provenance == Provenance::NegativeLaplacian {
            let max_abs = entries.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let tol = 1e-9 * n as f64 * max_abs;
            for (i, row) in entries.row_iter().enumerate() {
                let s: f64 = row.iter().sum();
                if s.abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "row {i} of a negative Laplacian sums to {s:e}"
                    )));
                }
            }
        }
        Ok(DynamicsMatrix { entries, provenance })
    }

    pub fn raw(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(entries, Provenance::Raw)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Relabels nodes: entry `(i, j)` of the result is `A[perm[i], perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let entries = DMatrix::from_fn(n, n, |i, j| self.entries[(perm[i], perm[j])]);
        Self::new(entries, self.provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramianMethod {
    VanLoan,
    Quadrature,
}

/// The horizon `T` and the `n` node Gramians `W_i(T)`. Immutable once built.
#[derive(Debug, Clone)]
pub struct NodeGramianSet {
    horizon: f64,
    gramians: Vec<DMatrix<f64>>,
    /// Column `i` holds the lower triangle of `W_i` (column-major), so
    /// combinations and inner products are single matrix-vector products.
    stacked: DMatrix<f64>,
    method: GramianMethod,
}

impl NodeGramianSet {
    /// Wraps precomputed Gramians, checking shapes only.
    pub fn from_parts(horizon: f64, gramians: Vec<DMatrix<f64>>, method: GramianMethod) -> Result<Self> {
        check_horizon(horizon)?;
        let n = gramians.len();
        for g in &gramians {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.nrows(),
                });
            }
        }
        let tri = lower_indices(n);
        let stacked = DMatrix::from_fn(tri.len(), n, |k, i| gramians[i][tri[k]]);
        Ok(NodeGramianSet {
            horizon,
            gramians,
            stacked,
            method,
        })
    }

    /// Builds every `W_i(T)` with composite Simpson quadrature.
    pub fn from_quadrature(a: &DynamicsMatrix, horizon: f64, steps: usize) -> Result<Self> {
        check_horizon(horizon)?;
        let gramians = (0..a.n())
            .map(|i| gramian_quadrature_oracle(a, i, horizon, steps))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(horizon, gramians, GramianMethod::Quadrature)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.gramians.len()
    }

    pub fn method(&self) -> GramianMethod {
        self.method
    }

    pub fn gramians(&self) -> &[DMatrix<f64>] {
        &self.gramians
    }

    pub fn get(&self, i: usize) -> &DMatrix<f64> {
        &self.gramians[i]
    }

    /// `Σ w_i W_i` for arbitrary real weights (used for tangent directions too).
    pub fn combine(&self, weights: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        let v = &self.stacked * DVector::from_column_slice(weights);
        let mut out = DMatrix::zeros(n, n);
        for (&(r, c), x) in lower_indices(n).iter().zip(v.iter()) {
            out[(r, c)] = *x;
            out[(c, r)] = *x;
        }
        Ok(out)
    }

    /// `(⟨K, W_1⟩_F, …, ⟨K, W_n⟩_F)`.
    pub fn inner_products(&self, k: &DMatrix<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k.nrows(),
            });
        }
        // Off-diagonal entries stand for both (r, c) and (c, r).
        let tri = lower_indices(n);
        let v = DVector::from_iterator(
            tri.len(),
            tri.iter()
                .map(|&(r, c)| if r == c { k[(r, c)] } else { k[(r, c)] + k[(c, r)] }),
        );
        Ok(self.stacked.tr_mul(&v))
    }
}

/// `(row, col)` of the lower triangle in column-major order.
fn lower_indices(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|c| (c..n).map(move |r| (r, c))).collect()
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidHorizon(t));
    }
    Ok(())
}

pub fn node_gramians(a: &DynamicsMatrix, horizon: f64) -> Result<NodeGramianSet> {
    node_gramians_with(a, horizon, Execution::default())
}

/// Computes all `W_i(T)`, fanning out across nodes according to `exec`.
pub fn node_gramians_with(a: &DynamicsMatrix, horizon: f64, exec: Execution) -> Result<NodeGramianSet> {
    check_horizon(horizon)?;
    let n = a.n();
    let a_mat = a.entries();

    let norm = one_norm(a_mat);
    let doublings = if norm * horizon > VAN_LOAN_BASE_NORM {
        (norm * horizon / VAN_LOAN_BASE_NORM).log2().ceil() as u32
    } else {
        0
    };
    if doublings > 1100 {
        return Err(Error::Overflow);
    }
    let base = horizon / 2f64.powi(doublings as i32);

    // exp(A·base·2^j) for j = 0..doublings
    let mut transitions = Vec::with_capacity(doublings as usize);
    if doublings > 0 {
        let mut phi = matrix_exp(a_mat, base)?;
        for _ in 0..doublings {
            let next = &phi * &phi;
            transitions.push(phi);
            phi = next;
            if !phi.iter().all(|x| x.is_finite()) {
                return Err(Error::Overflow);
            }
        }
    }

    let gramians = map_indices(n, exec, |i| {
        let mut w = van_loan(a_mat, i, base)?;
        for phi in &transitions {
            let grown = phi * &w * phi.transpose();
            w += grown;
            symmetrize_in_place(&mut w);
        }
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow);
        }
        Ok(w)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    NodeGramianSet::from_parts(horizon, gramians, GramianMethod::VanLoan)
}

/// Van Loan block exponential for a single node:
/// `exp([[−A, e_i e_iᵀ], [0, Aᵀ]]·t) = [[F11, F12], [0, F22]]`, `W_i(t) = F22ᵀ F12`.
fn van_loan(a: &DMatrix<f64>, node: usize, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(-a));
    h.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    h[(node, n + node)] = 1.0;
    let f = matrix_exp(&h, t)?;
    let f12 = f.view((0, n), (n, n));
    let f22 = f.view((n, n), (n, n));
    let mut w = f22.transpose() * f12;
    symmetrize_in_place(&mut w);
    Ok(w)
}

/// Composite Simpson quadrature of `exp(At) e_i e_iᵀ exp(Aᵀt)` over `[0, T]`
/// using `steps + 1` equally spaced nodes. `steps` must be even.
pub fn gramian_quadrature_oracle(a: &DynamicsMatrix, node: usize, horizon: f64, steps: usize) -> Result<DMatrix<f64>> {
    check_horizon(horizon)?;
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "Simpson quadrature needs an even number of steps >= 2, got {steps}"
        )));
    }
    let n = a.n();
    if node >= n {
        return Err(Error::InvalidParameter(format!("node {node} out of range for n = {n}")));
    }
    let h = horizon / steps as f64;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for k in 0..=steps {
        // Each sample is evaluated independently; no recurrence.
        let phi = matrix_exp(a.entries(), k as f64 * h)?;
        let v = phi.column(node);
        let weight = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.ger(weight, &v, &v, 1.0);
    }
    acc *= h / 3.0;
    symmetrize_in_place(&mut acc);
    Ok(acc)
}

/// `W(p, T) = Σ p_i W_i(T)`.
pub fn aggregate_gramian(gs: &NodeGramianSet, p: &Allocation) -> Result<DMatrix<f64>> {
    gs.combine(p.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub lambda_min: f64,
}

/// `W ≻ 0` test: Cholesky must succeed and `λ_min > 1e-12·max(1, λ_max)`.
pub fn feasibility(w: &DMatrix<f64>) -> Feasibility {
    let (lo, hi) = eig_bounds(w);
    let chol_ok = w.clone().cholesky().is_some();
    Feasibility {
        feasible: chol_ok && lo > FEASIBILITY_RTOL * hi.max(1.0),
        lambda_min: lo,
    }
}
