//! Task-weighted average-energy controllability scores for linear network
//! systems `ẋ = Ax`.
//!
//! Every node receives a virtual input channel whose strength is a share
//! `p_i` of a unit budget. The score is the allocation `p` on the simplex
//! minimising the expected minimum steering energy `tr(W(p,T)⁻¹ M)`, where
//! `W(p,T) = Σ p_i W_i(T)` aggregates the node Gramians and `M` encodes the
//! transition of interest. With `M ∝ I` this is the classical
//! average-energy score.
//!
//! ```
//! use ctrlscore::{gramian, solver, task};
//! use nalgebra::DMatrix;
//!
//! let a = gramian::DynamicsMatrix::raw(DMatrix::zeros(3, 3)).unwrap();
//! let gs = gramian::node_gramians(&a, 1.0).unwrap();
//! let m = task::isotropic_weight(3, 1.0).unwrap();
//! let report = solver::solve(&gs, &m, &solver::SolverOptions::default()).unwrap();
//! assert!(report.converged);
//! ```

pub mod diag;
pub mod error;
pub mod exec;
pub mod expm;
pub mod gramian;
pub mod io;
pub mod linalg;
pub mod report;
pub mod simplex;
pub mod solver;
pub mod stats;
pub mod task;

pub use error::{Error, ErrorCategory, Result};
pub use exec::Execution;
pub use gramian::{DynamicsMatrix, NodeGramianSet};
pub use simplex::Allocation;
pub use solver::{ScoreReport, SolverOptions};
pub use task::{TaskSpec, WeightMatrix};
