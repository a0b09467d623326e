#![allow(dead_code)]

use ctrlscore::gramian::DynamicsMatrix;
use ctrlscore::simplex::Allocation;
use ctrlscore::task::WeightMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

/// Random matrix with ‖A‖_F equal to `norm` (so ‖A‖₂ ≤ norm).
pub fn random_dynamics(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> DynamicsMatrix {
    let r = uniform_matrix(rng, n);
    let scale = norm / r.norm();
    DynamicsMatrix::raw(r * scale).unwrap()
}

/// Random Hurwitz matrix: shifted so every eigenvalue has real part ≤ −margin.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> DynamicsMatrix {
    let r = uniform_matrix(rng, n) * 0.6;
    let max_re = r
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = max_re + margin;
    DynamicsMatrix::raw(r - DMatrix::identity(n, n) * shift).unwrap()
}

/// Random symmetric positive definite weight `BBᵀ + floor·I`.
pub fn random_pd_weight(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> WeightMatrix {
    let b = uniform_matrix(rng, n);
    WeightMatrix::explicit(&b * b.transpose() + DMatrix::identity(n, n) * floor).unwrap()
}

/// Random interior allocation with every share ≥ `min_share`.
pub fn random_interior(rng: &mut ChaCha8Rng, n: usize, min_share: f64) -> Allocation {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let free = 1.0 - min_share * n as f64;
    let mut p: Vec<f64> = raw.iter().map(|x| min_share + free * x / s).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    Allocation::from_slice(&p).unwrap()
}

/// Random direction with zero sum.
pub fn random_tangent(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let mut d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mean = d.sum() / n as f64;
    d.add_scalar_mut(-mean);
    d
}

pub fn shifted(p: &Allocation, d: &DVector<f64>, h: f64) -> Allocation {
    Allocation::new(p.as_vector() + d * h).unwrap()
}

/// Composite Simpson rule for a matrix-valued integrand on [0, t].
pub fn simpson<F: Fn(f64) -> DMatrix<f64>>(f: F, t: f64, steps: usize, n: usize) -> DMatrix<f64> {
    assert!(steps.is_multiple_of(2));
    let h = t / steps as f64;
    let mut acc = DMatrix::zeros(n, n);
    for k in 0..=steps {
        let w = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += f(k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// exp(M) by a long Taylor series, used only as an oracle on small inputs.
pub fn taylor_exp(m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..terms {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}
