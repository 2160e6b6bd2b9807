//! Matrix exponential by scaling and squaring with the degree-13 diagonal Padé approximant.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

const PADE13: [f64; 14] = [
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

/// Largest 1-norm for which the degree-13 approximant is accurate to double precision.
const THETA13: f64 = 5.371_920_351_148_152;

pub fn expm<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    if !m.is_square() {
        return Err(Error::Dimension("expm of a non-square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows();
    let norm = m.norm1().to_f64_lossy();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(T::lit(0.5f64.powi(squarings)));
    let b = |k: usize| T::lit(PADE13[k]);
    let id = Matrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let u_inner = a6
        .matmul(&a6.scale(b(13)).add(&a4.scale(b(11))).add(&a2.scale(b(9))))
        .add(&a6.scale(b(7)))
        .add(&a4.scale(b(5)))
        .add(&a2.scale(b(3)))
        .add(&id.scale(b(1)));
    let u = a.matmul(&u_inner);
    let v = a6
        .matmul(&a6.scale(b(12)).add(&a4.scale(b(10))).add(&a2.scale(b(8))))
        .add(&a6.scale(b(6)))
        .add(&a4.scale(b(4)))
        .add(&a2.scale(b(2)))
        .add(&id.scale(b(0)));

    let mut r = v.sub(&u).solve_matrix(&v.add(&u))?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}
