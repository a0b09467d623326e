//! Real matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square, one_norm};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `exp(A·t)`. Returns the identity exactly when `t == 0`.
///
/// Fails with [`Error::Overflow`] when the result is not representable.
pub fn matrix_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = ensure_square(a)?;
    ensure_finite(a)?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time {t} is not finite")));
    }
    if t == 0.0 || n == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    expm(&(a * t))
}

/// `exp(X)` for a finite square matrix.
pub fn expm(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = ensure_square(x)?;
    let norm = one_norm(x);
    if !norm.is_finite() {
        return Err(Error::Overflow);
    }
    let ident = DMatrix::<f64>::identity(n, n);

    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let (u, v) = pade_low(x, &ident, m);
            return finish(u, v, 0);
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = x * 2f64.powi(-s);
    let (u, v) = pade13(&scaled, &ident);
    finish(u, v, s as u32)
}

fn pade_low(x: &DMatrix<f64>, ident: &DMatrix<f64>, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let b: &[f64] = match m {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let x2 = x * x;
    // even powers X^0, X^2, ..., X^(m-1)
    let mut powers = vec![ident.clone(), x2.clone()];
    while powers.len() < m.div_ceil(2) {
        let next = powers.last().unwrap() * &x2;
        powers.push(next);
    }
    let n = x.nrows();
    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for (k, pk) in powers.iter().enumerate() {
        u_inner += pk * b[2 * k + 1];
        v += pk * b[2 * k];
    }
    (x * u_inner, v)
}

fn pade13(x: &DMatrix<f64>, ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &B13;
    let x2 = x * x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let u_hi = &x6 * b[13] + &x4 * b[11] + &x2 * b[9];
    let u_inner = &x6 * &u_hi + &x6 * b[7] + &x4 * b[5] + &x2 * b[3] + ident * b[1];
    let u = x * u_inner;
    let v_hi = &x6 * b[12] + &x4 * b[10] + &x2 * b[8];
    let v = &x6 * &v_hi + &x6 * b[6] + &x4 * b[4] + &x2 * b[2] + ident * b[0];
    (u, v)
}

fn finish(u: DMatrix<f64>, v: DMatrix<f64>, squarings: u32) -> Result<DMatrix<f64>> {
    let num = &v + &u;
    let den = v - u;
    let mut r = den.lu().solve(&num).ok_or(Error::Overflow)?;
    for _ in 0..squarings {
        r = &r * &r;
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow);
        }
    }
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(r)
}
