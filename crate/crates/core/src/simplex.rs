//! Allocations on the probability simplex and Euclidean projection onto it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ p_i = 1`.
pub const SUM_TOL: f64 = 1e-12;

/// A point on the probability simplex: non-negative shares summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Allocation(DVector<f64>);

impl Allocation {
    pub fn new(p: DVector<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::NotOnSimplex("empty vector".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::NotOnSimplex(format!("entry {i} = {v}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        Ok(Allocation(p))
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(p))
    }

    pub fn uniform(n: usize) -> Self {
        Allocation(DVector::from_element(n, 1.0 / n as f64))
    }

    /// The vertex `e_i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut p = DVector::zeros(n);
        p[i] = 1.0;
        Allocation(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Allocation {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Allocation::new(DVector::from_vec(v))
    }
}

impl From<Allocation> for Vec<f64> {
    fn from(a: Allocation) -> Self {
        a.0.as_slice().to_vec()
    }
}

/// Euclidean projection of `v` onto the simplex via sort-and-threshold.
///
/// Inputs that already lie on the simplex (up to rounding of their sum) are
/// returned unchanged, so the map is exactly idempotent.
pub fn project_simplex(v: &DVector<f64>) -> Allocation {
    let n = v.len();
    assert!(n > 0, "cannot project an empty vector");
    let sum: f64 = v.iter().sum();
    if v.iter().all(|x| *x >= 0.0) && (sum - 1.0).abs() <= 4.0 * n as f64 * f64::EPSILON {
        return Allocation(v.clone());
    }

    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    let mut p = v.map(|x| (x - tau).max(0.0));
    // Renormalise away the last ulp of drift.
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p /= s;
    }
    Allocation(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn symmetric_input() {
        let p = project_simplex(&v(&[0.5, 0.5, 0.5]));
        for x in p.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vertex_is_fixed() {
        let p = project_simplex(&v(&[1.0, 0.0, 0.0]));
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_kkt_example() {
        let p = project_simplex(&v(&[0.9, 0.5, -0.2]));
        let expect = [0.7, 0.3, 0.0];
        for (a, b) in p.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn allocation_rejects_bad_vectors() {
        assert!(Allocation::from_slice(&[0.5, 0.6]).is_err());
        assert!(Allocation::from_slice(&[1.5, -0.5]).is_err());
        assert!(Allocation::from_slice(&[]).is_err());
        assert!(Allocation::from_slice(&[f64::NAN, 1.0]).is_err());
        assert!(Allocation::from_slice(&[0.25, 0.75]).is_ok());
    }

    #[test]
    fn serde_roundtrip() {
        let p = Allocation::from_slice(&[0.1, 0.2, 0.7]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Allocation = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Allocation>("[0.5, 0.6]").is_err());
    }
}
