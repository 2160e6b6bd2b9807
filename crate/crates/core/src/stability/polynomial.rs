//! Stability polynomial `P` by interpolation, and the step bound `h*`.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

use super::gain::{cleared_gap, expand, factors, MsScheme};

/// `P(h) = Σ c_k h^k` with the divisor `|D(h)|²` it was cleared from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityPolynomial {
    pub coefficients: Vec<f64>,
    pub degree: usize,
    /// `|D(h)|²` coefficients; `[1]` for explicit schemes.
    pub denominator: Vec<f64>,
}

fn horner(c: &[f64], h: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * h + ck)
}

impl StabilityPolynomial {
    pub fn eval(&self, h: f64) -> f64 {
        horner(&self.coefficients, h)
    }

    /// `E|R|² = 1 + h·P(h)/|D(h)|²`.
    pub fn gain(&self, h: f64) -> f64 {
        1.0 + h * self.eval(h) / horner(&self.denominator, h)
    }
}

/// Relative size below which fitted coefficients above the expected degree count as zero.
const TRAILING_TOL: f64 = 1e-8;

/// Fits `P` from direct evaluations at Chebyshev nodes on `(0, H]`, `H = 1/max(1,|λ|,|σ|²)`.
///
/// The interpolant has degree `degree + 3`. Its Chebyshev coefficients above the expected
/// degree must vanish relative to the largest one, otherwise the assembly is inconsistent.
pub fn ms_polynomial(scheme: MsScheme, lambda: Complex64, sigma: Complex64, gamma: f64) -> Result<StabilityPolynomial> {
    let f = factors(scheme, lambda, sigma, gamma)?;
    let degree = scheme.degree();
    let n = degree + 4;
    let scale = 1.0 / lambda.norm().max(sigma.norm_sqr()).max(1.0);
    let pi = std::f64::consts::PI;
    let xs: Vec<f64> = (0..n).map(|k| (pi * (2 * k + 1) as f64 / (2 * n) as f64).cos()).collect();
    let values: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let h = scale * 0.5 * (1.0 + x);
            cleared_gap(&f, h) / h
        })
        .collect();
    // Chebyshev coefficients from discrete orthogonality on the first-kind nodes
    let mut cheb = vec![0.0; n];
    for (j, cj) in cheb.iter_mut().enumerate() {
        let sum: f64 = xs.iter().zip(&values).map(|(&x, &v)| v * (j as f64 * x.acos()).cos()).sum();
        *cj = sum * if j == 0 { 1.0 } else { 2.0 } / n as f64;
    }
    // the interpolant has degree ≤ `degree` exactly when the higher Chebyshev coefficients vanish
    let largest = cheb.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let trailing = cheb[degree + 1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if trailing > TRAILING_TOL * largest {
        return Err(Error::Consistency(format!(
            "{scheme}: coefficients above degree {degree} reach {:e} relative",
            trailing / largest
        )));
    }
    // monomials in s = h/H via T_j(2s − 1)
    let mut mono = vec![0.0; degree + 1];
    let mut t_prev = vec![1.0];
    let mut t_cur = vec![-1.0, 2.0];
    for (j, &cj) in cheb[..=degree].iter().enumerate() {
        let t = if j == 0 { &t_prev } else { &t_cur };
        for (k, &tk) in t.iter().enumerate() {
            mono[k] += cj * tk;
        }
        if j >= 1 {
            let mut next = vec![0.0; t_cur.len() + 1];
            for (k, &tk) in t_cur.iter().enumerate() {
                next[k] -= 2.0 * tk;
                next[k + 1] += 4.0 * tk;
            }
            for (k, &tk) in t_prev.iter().enumerate() {
                next[k] -= tk;
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
    }
    let coefficients = mono[..=degree]
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(k as i32))
        .collect();
    Ok(StabilityPolynomial {
        coefficients,
        degree,
        denominator: expand(&f).denominator,
    })
}

/// Upper end of the MS-stable step range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum HStar {
    Finite(f64),
    /// No sign change of `P` up to the cap.
    Unbounded,
}

impl HStar {
    pub fn value(self) -> f64 {
        match self {
            HStar::Finite(h) => h,
            HStar::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for HStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HStar::Finite(h) => write!(f, "{h}"),
            HStar::Unbounded => f.write_str("inf"),
        }
    }
}

const SCAN_NODES: usize = 10_000;
const BISECTION_TOL: f64 = 1e-10;

/// [`h_star_with`] with cap `10³`.
pub fn h_star(scheme: MsScheme, lambda: Complex64, sigma: Complex64, gamma: f64) -> Result<HStar> {
    h_star_with(scheme, lambda, sigma, gamma, 1e3)
}

/// Smallest positive root of `P` in `(0, cap]`.
///
/// `P` is expanded exactly, scanned on log-spaced nodes from `10⁻⁶·H` to `cap`, and the first
/// bracket is bisected to relative width `10⁻¹⁰`.
pub fn h_star_with(scheme: MsScheme, lambda: Complex64, sigma: Complex64, gamma: f64, cap: f64) -> Result<HStar> {
    let drift = 2.0 * lambda.re + sigma.norm_sqr();
    if !(drift < 0.0) {
        return Err(Error::NotMeanSquareStable(drift));
    }
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidParameter(format!("cap = {cap}")));
    }
    let p = expand(&factors(scheme, lambda, sigma, gamma)?).p_coefficients();
    let eval = |h: f64| horner(&p, h);
    let lo = 1e-6 / lambda.norm().max(sigma.norm_sqr()).max(1.0);
    if lo >= cap {
        return Ok(if eval(cap) < 0.0 { HStar::Unbounded } else { HStar::Finite(cap) });
    }
    if eval(lo) >= 0.0 {
        return Err(Error::Consistency(format!("P({lo:e}) is not negative")));
    }
    let ratio = (cap / lo).ln() / (SCAN_NODES - 1) as f64;
    let mut prev = lo;
    for k in 1..SCAN_NODES {
        let h = if k == SCAN_NODES - 1 { cap } else { lo * (ratio * k as f64).exp() };
        if eval(h) >= 0.0 {
            let (mut a, mut b) = (prev, h);
            while b - a > BISECTION_TOL * b {
                let mid = 0.5 * (a + b);
                if eval(mid) < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(HStar::Finite(0.5 * (a + b)));
        }
        prev = h;
    }
    Ok(HStar::Unbounded)
}
