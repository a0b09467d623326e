mod common;

use common::*;
use ctrlscore::expm::matrix_exp;
use ctrlscore::gramian::{
    aggregate_gramian, feasibility, gramian_quadrature_oracle, node_gramians, node_gramians_with, DynamicsMatrix,
    GramianMethod, NodeGramianSet,
};
use ctrlscore::linalg::{eig_bounds, rel_frobenius_diff};
use ctrlscore::simplex::Allocation;
use ctrlscore::Execution;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn expm_matches_taylor_on_random_inputs() {
    let mut rng = rng(1);
    for _ in 0..10 {
        let a = uniform_matrix(&mut rng, 4);
        let e = matrix_exp(&a, 0.3).unwrap();
        let t = taylor_exp(&(&a * 0.3), 30);
        assert!(rel_frobenius_diff(&e, &t) < 1e-12);
    }
}

#[test]
fn expm_matches_taylor_across_pade_degrees() {
    // Norms chosen to hit each Padé degree, plus one that needs squaring.
    let mut rng = rng(2);
    for target in [0.01, 0.2, 0.8, 2.0, 4.0, 9.0] {
        let r = uniform_matrix(&mut rng, 5);
        let a = &r * (target / ctrlscore::linalg::one_norm(&r));
        let e = matrix_exp(&a, 1.0).unwrap();
        let t = taylor_exp(&a, 80);
        assert!(
            rel_frobenius_diff(&e, &t) < 1e-12,
            "norm {target}: {}",
            rel_frobenius_diff(&e, &t)
        );
    }
}

#[test]
fn van_loan_matches_simpson() {
    let mut rng = rng(3);
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let norm = rng.random_range(0.1..2.0);
        let a = random_dynamics(&mut rng, n, norm);
        let t = rng.random_range(0.1..5.0);
        let gs = node_gramians(&a, t).unwrap();
        for i in 0..n {
            let q = gramian_quadrature_oracle(&a, i, t, 2000).unwrap();
            let err = rel_frobenius_diff(gs.get(i), &q);
            assert!(err < 1e-8, "n={n} T={t} node {i}: {err:e}");
        }
    }
}

#[test]
fn simpson_converges_at_fourth_order() {
    let mut rng = rng(4);
    let a = random_dynamics(&mut rng, 4, 1.5);
    let t = 2.0;
    let exact = node_gramians(&a, t).unwrap();
    for i in 0..4 {
        let e200 = (gramian_quadrature_oracle(&a, i, t, 200).unwrap() - exact.get(i)).norm();
        let e400 = (gramian_quadrature_oracle(&a, i, t, 400).unwrap() - exact.get(i)).norm();
        let ratio = e200 / e400;
        assert!((13.0..19.0).contains(&ratio), "node {i}: ratio {ratio}");
    }
}

#[test]
fn gramians_symmetric_and_psd() {
    let mut rng = rng(5);
    for _ in 0..5 {
        let n = rng.random_range(2..=6);
        let a = random_dynamics(&mut rng, n, 1.5);
        for t in [0.1, 1.0, 10.0] {
            let gs = node_gramians(&a, t).unwrap();
            for w in gs.gramians() {
                assert!((w - w.transpose()).norm() <= 1e-10 * w.norm());
                let (lo, hi) = eig_bounds(w);
                assert!(lo >= -1e-10 * hi, "T={t}: lambda_min {lo:e}, lambda_max {hi:e}");
            }
        }
    }
}

#[test]
fn uniform_allocation_is_feasible() {
    let mut rng = rng(6);
    for _ in 0..10 {
        let n = rng.random_range(1..=8);
        let a = random_dynamics(&mut rng, n, 2.0);
        let gs = node_gramians(&a, 1.0).unwrap();
        let w = aggregate_gramian(&gs, &Allocation::uniform(n)).unwrap();
        assert!(feasibility(&w).feasible);
    }
}

#[test]
fn gramians_grow_with_horizon() {
    let mut rng = rng(7);
    let a = random_dynamics(&mut rng, 5, 1.0);
    let short = node_gramians(&a, 1.0).unwrap();
    let long = node_gramians(&a, 1.7).unwrap();
    for (ws, wl) in short.gramians().iter().zip(long.gramians()) {
        let (lo, hi) = eig_bounds(&(wl - ws));
        assert!(lo >= -1e-10 * hi);
    }
}

#[test]
fn horizon_derivative_matches_integrand() {
    let mut rng = rng(8);
    let a = random_dynamics(&mut rng, 4, 1.2);
    let t = 1.3;
    let h = 1e-5;
    let plus = node_gramians(&a, t + h).unwrap();
    let minus = node_gramians(&a, t - h).unwrap();
    let phi = matrix_exp(a.entries(), t).unwrap();
    for i in 0..4 {
        let fd = (plus.get(i) - minus.get(i)) / (2.0 * h);
        let v = phi.column(i);
        let exact = v * v.transpose();
        assert!(rel_frobenius_diff(&fd, &exact) < 1e-7);
    }
}

#[test]
fn aggregate_matches_quadrature_with_explicit_input_matrix() {
    let mut rng = rng(9);
    let a = random_dynamics(&mut rng, 4, 1.5);
    let t = 1.5;
    let p = random_interior(&mut rng, 4, 0.05);
    let gs = node_gramians(&a, t).unwrap();
    let w = aggregate_gramian(&gs, &p).unwrap();
    // B(p) = diag(√p_i), integrand exp(At) B Bᵀ exp(Aᵀt)
    let b = DMatrix::from_diagonal(&p.as_vector().map(f64::sqrt));
    let bbt = &b * b.transpose();
    let q = simpson(
        |s| {
            let phi = matrix_exp(a.entries(), s).unwrap();
            &phi * &bbt * phi.transpose()
        },
        t,
        2000,
        4,
    );
    assert!(rel_frobenius_diff(&w, &q) < 1e-8);
}

#[test]
fn long_horizon_laplacian_stays_finite() {
    // Horizon doubling keeps the block exponential bounded at T = 100.
    let c = DMatrix::from_row_slice(3, 3, &[0.0, 5.0, 1.0, 5.0, 0.0, 2.0, 1.0, 2.0, 0.0]);
    let mut a = -DMatrix::from_diagonal(&c.column_sum());
    a += &c;
    let a = DynamicsMatrix::new(a, ctrlscore::gramian::Provenance::NegativeLaplacian).unwrap();
    let gs = node_gramians(&a, 100.0).unwrap();
    let q = NodeGramianSet::from_quadrature(&a, 100.0, 20000).unwrap();
    assert_eq!(q.method(), GramianMethod::Quadrature);
    for i in 0..3 {
        assert!(rel_frobenius_diff(gs.get(i), q.get(i)) < 1e-6);
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let mut rng = rng(10);
    let a = random_dynamics(&mut rng, 7, 2.0);
    let s = node_gramians_with(&a, 3.0, Execution::Sequential).unwrap();
    let p = node_gramians_with(&a, 3.0, Execution::Parallel).unwrap();
    assert_eq!(s.gramians(), p.gramians());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregate_is_affine(seed in 0u64..10_000, alpha in 0.0f64..1.0) {
        let mut rng = rng(seed);
        let a = random_dynamics(&mut rng, 4, 1.0);
        let gs = node_gramians(&a, 1.0).unwrap();
        let p = random_interior(&mut rng, 4, 0.0);
        let q = random_interior(&mut rng, 4, 0.0);
        let mix = Allocation::new(p.as_vector() * alpha + q.as_vector() * (1.0 - alpha)).unwrap();
        let lhs = aggregate_gramian(&gs, &mix).unwrap();
        let rhs = aggregate_gramian(&gs, &p).unwrap() * alpha + aggregate_gramian(&gs, &q).unwrap() * (1.0 - alpha);
        prop_assert!(rel_frobenius_diff(&lhs, &rhs) < 1e-14);
    }
}
