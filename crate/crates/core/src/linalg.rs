//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of a symmetric matrix.
pub fn eig_bounds(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = m.symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Frobenius inner product `tr(Aᵀ B)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// `‖a − b‖_F / max(‖b‖_F, tiny)`.
pub fn rel_frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn ensure_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn ensure_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

/// Symmetric PSD check with a relative eigenvalue tolerance.
pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let asym = (m - m.transpose()).norm();
    let scale = m.norm();
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
        return false;
    }
    let (lo, hi) = eig_bounds(&symmetrize(m));
    lo >= -rel_tol * hi.abs().max(f64::MIN_POSITIVE)
}

const TRI_BLOCK: usize = 32;

/// Inverse of a lower-triangular matrix (only the lower triangle is read),
/// by recursive 2×2 blocking so the bulk of the work is matrix products.
/// `None` if a diagonal entry is zero.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = l.nrows();
    if n <= TRI_BLOCK {
        return l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .map(|x| x.lower_triangle());
    }
    // [[A, 0], [B, C]]⁻¹ = [[A⁻¹, 0], [−C⁻¹ B A⁻¹, C⁻¹]]
    let h = n / 2;
    let a_inv = lower_triangular_inverse(&l.view((0, 0), (h, h)).into_owned())?;
    let c_inv = lower_triangular_inverse(&l.view((h, h), (n - h, n - h)).into_owned())?;
    let b = l.view((h, 0), (n - h, h));
    let off = -(&c_inv * (b * &a_inv));
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (h, h)).copy_from(&a_inv);
    out.view_mut((h, h), (n - h, n - h)).copy_from(&c_inv);
    out.view_mut((h, 0), (n - h, h)).copy_from(&off);
    Some(out)
}
