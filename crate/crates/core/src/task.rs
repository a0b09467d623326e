//! Task-dependent weighting matrices.
//!
//! The weighting matrix is the second moment `M = E[z zᵀ]` of the displacement
//! `z(T) = x_T − exp(AT) x₀`, i.e. `M = Cov(z) + E[z] E[z]ᵀ`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::matrix_exp;
use crate::gramian::DynamicsMatrix;
use crate::linalg::{eig_bounds, ensure_finite, ensure_len, is_psd, symmetrize};

const PSD_RTOL: f64 = 1e-10;
/// Below `−1e-8·λ_max` a displacement covariance is considered inconsistent.
const CLIP_RTOL: f64 = 1e-8;
const PD_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TaskMode {
    /// Random `x₀ ~ (μ₀, Σ₀)` and a prescribed terminal state `x_T`.
    DeterministicTarget {
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
        x_t: DVector<f64>,
    },
    /// `M = scale·I`; the classical average-energy objective.
    Isotropic {
        scale: f64,
    },
    /// Means and covariances of `x₀`, `x_T` plus `Cov(x_T, x₀)`.
    SecondMoment {
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
        mu_t: DVector<f64>,
        sigma_t: DMatrix<f64>,
        cross_cov: DMatrix<f64>,
    },
    ExplicitM {
        m: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    n: usize,
    horizon: f64,
    mode: TaskMode,
}

impl TaskSpec {
    pub fn new(n: usize, horizon: f64, mode: TaskMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("task dimension must be >= 1".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        let check_vec = |v: &DVector<f64>, name: &str| -> Result<()> {
            ensure_len(v, n)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        let check_mat = |m: &DMatrix<f64>, name: &str| -> Result<()> {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows(),
                });
            }
            ensure_finite(m).map_err(|_| Error::InvalidParameter(format!("{name} has non-finite entries")))
        };
        let check_psd = |m: &DMatrix<f64>, name: &str| -> Result<()> {
            check_mat(m, name)?;
            if !is_psd(m, PSD_RTOL) {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not symmetric positive semidefinite"
                )));
            }
            Ok(())
        };

        match &mode {
            TaskMode::DeterministicTarget { mu0, sigma0, x_t } => {
                check_vec(mu0, "mu0")?;
                check_vec(x_t, "xT")?;
                check_psd(sigma0, "sigma0")?;
            }
            TaskMode::Isotropic { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "isotropic scale must be > 0, got {scale}"
                    )));
                }
            }
            TaskMode::SecondMoment {
                mu0,
                sigma0,
                mu_t,
                sigma_t,
                cross_cov,
            } => {
                check_vec(mu0, "mu0")?;
                check_vec(mu_t, "muT")?;
                check_psd(sigma0, "sigma0")?;
                check_psd(sigma_t, "sigmaT")?;
                check_mat(cross_cov, "cross_cov")?;
                let mut joint = DMatrix::zeros(2 * n, 2 * n);
                joint.view_mut((0, 0), (n, n)).copy_from(sigma_t);
                joint.view_mut((0, n), (n, n)).copy_from(cross_cov);
                joint.view_mut((n, 0), (n, n)).copy_from(&cross_cov.transpose());
                joint.view_mut((n, n), (n, n)).copy_from(sigma0);
                if !is_psd(&joint, PSD_RTOL) {
                    return Err(Error::InvalidParameter(
                        "joint covariance of (x_T, x_0) is not positive semidefinite".into(),
                    ));
                }
            }
            TaskMode::ExplicitM { m } => check_psd(m, "M")?,
        }
        Ok(TaskSpec { n, horizon, mode })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn mode(&self) -> &TaskMode {
        &self.mode
    }
}

/// `M` together with its mean/covariance decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub m: DMatrix<f64>,
    pub mean_z: DVector<f64>,
    pub cov_z: DMatrix<f64>,
    pub positive_definite: bool,
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|x| *x == 0.0)
    }

    /// Wraps a user-supplied PSD matrix; the whole of it is treated as covariance.
    pub fn explicit(m: DMatrix<f64>) -> Result<Self> {
        crate::linalg::ensure_square(&m)?;
        ensure_finite(&m)?;
        if !is_psd(&m, PSD_RTOL) {
            return Err(Error::InvalidParameter(
                "M is not symmetric positive semidefinite".into(),
            ));
        }
        let m = symmetrize(&m);
        let n = m.nrows();
        Ok(WeightMatrix {
            positive_definite: is_positive_definite(&m),
            mean_z: DVector::zeros(n),
            cov_z: m.clone(),
            m,
        })
    }

    pub fn scaled(&self, c: f64) -> WeightMatrix {
        WeightMatrix {
            m: &self.m * c,
            mean_z: &self.mean_z * c.sqrt(),
            cov_z: &self.cov_z * c,
            positive_definite: self.positive_definite,
        }
    }
}

fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let (lo, hi) = eig_bounds(m);
    hi > 0.0 && lo > PD_RTOL * hi
}

/// Mean and covariance of `z(T)` given `Φ = exp(AT)`.
pub fn displacement_stats(spec: &TaskSpec, phi: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = spec.n();
    if phi.nrows() != n || phi.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi.nrows(),
        });
    }
    match spec.mode() {
        TaskMode::DeterministicTarget { mu0, sigma0, x_t } => {
            let mean = x_t - phi * mu0;
            let cov = symmetrize(&(phi * sigma0 * phi.transpose()));
            Ok((mean, cov))
        }
        TaskMode::SecondMoment {
            mu0,
            sigma0,
            mu_t,
            sigma_t,
            cross_cov,
        } => {
            let mean = mu_t - phi * mu0;
            let c_phi_t = cross_cov * phi.transpose();
            let raw = sigma_t - &c_phi_t - c_phi_t.transpose() + phi * sigma0 * phi.transpose();
            let cov = clip_psd(&symmetrize(&raw))?;
            Ok((mean, cov))
        }
        TaskMode::Isotropic { .. } | TaskMode::ExplicitM { .. } => Err(Error::ModeMismatch(
            "displacement statistics need a deterministic_target or second_moment task".into(),
        )),
    }
}

fn clip_psd(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = cov.clone().symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if lo < -CLIP_RTOL * hi {
        return Err(Error::InconsistentMoments {
            lambda_min: lo,
            lambda_max: hi,
        });
    }
    if lo >= 0.0 {
        return Ok(cov.clone());
    }
    warn!("clipping displacement covariance eigenvalues below zero (lambda_min = {lo:e})");
    let clipped = eig.eigenvalues.map(|x| x.max(0.0));
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&clipped) * v.transpose())))
}

/// `M = cov_z + mean_z mean_zᵀ`.
pub fn weight_matrix(mean_z: DVector<f64>, cov_z: DMatrix<f64>) -> Result<WeightMatrix> {
    let n = crate::linalg::ensure_square(&cov_z)?;
    ensure_len(&mean_z, n)?;
    let mut m = &cov_z + &mean_z * mean_z.transpose();
    crate::linalg::symmetrize_in_place(&mut m);
    Ok(WeightMatrix {
        positive_definite: is_positive_definite(&m),
        m,
        mean_z,
        cov_z,
    })
}

/// `M = scale·I`.
pub fn isotropic_weight(n: usize, scale: f64) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "isotropic scale must be > 0, got {scale}"
        )));
    }
    let cov = DMatrix::identity(n, n) * scale;
    Ok(WeightMatrix {
        m: cov.clone(),
        mean_z: DVector::zeros(n),
        cov_z: cov,
        positive_definite: true,
    })
}

/// Builds `M` for a task on the given dynamics.
pub fn task_weight(spec: &TaskSpec, a: &DynamicsMatrix) -> Result<WeightMatrix> {
    if a.n() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: a.n(),
        });
    }
    match spec.mode() {
        TaskMode::Isotropic { scale } => isotropic_weight(spec.n(), *scale),
        TaskMode::ExplicitM { m } => WeightMatrix::explicit(m.clone()),
        _ => {
            let phi = matrix_exp(a.entries(), spec.horizon())?;
            let (mean, cov) = displacement_stats(spec, &phi)?;
            weight_matrix(mean, cov)
        }
    }
}
