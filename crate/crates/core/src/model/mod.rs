//! SDE problem definitions: drift, diffusion, coefficient functions over `A_2`, built-in test
//! models and their exact solutions.
//!
//! A model is `dX = a(t,X) dt + Σ_j b^j(t,X) dW^j` with `F(t,x) = x`. Coefficient functions
//! are `_αF = L^{j1}(_{⁻α}F)`, so `L^j a = _(j,0)F` and `L^{j1}L^{j2} a = _(j1,j2,0)F`.

mod additive;
mod expm;
mod linear;
mod scalar_sde;

pub use additive::AdditiveSde;
pub use expm::expm;
pub use linear::{exact_solution_linear, LinearSde};
pub use scalar_sde::{
    coefficient_table_scalar, exact_solution_test1, GbmOracle, ScalarDerivativeOracle, ScalarSde,
    ScaledNoise, Test1Oracle,
};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multiindex::MultiIndex;
use crate::scalar::Real;

/// An Itô SDE whose coefficient functions over `A_2` can be evaluated.
pub trait SdeModel<T: Real>: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Noise count `m`.
    fn noises(&self) -> usize;

    fn drift(&self, t: T, x: &[T], out: &mut [T]);

    /// `b^j(t,x)` for `j` in `1..=m`.
    fn diffusion(&self, j: usize, t: T, x: &[T], out: &mut [T]);

    /// `∂a/∂x`. The default uses central differences with step `1e-7·(1+|x_k|)`.
    fn drift_jacobian(&self, t: T, x: &[T], jac: &mut Matrix<T>) {
        fd_jacobian(self, t, x, jac);
    }

    /// `_αF(t,x)` for one index.
    fn coeff(&self, alpha: &MultiIndex, t: T, x: &[T], out: &mut [T]) -> Result<()>;

    /// Writes `_αF(t,x)` for every index into consecutive `d`-blocks of `out`.
    fn coefficients(&self, indices: &[MultiIndex], t: T, x: &[T], out: &mut [T]) -> Result<()> {
        let d = self.dim();
        for (alpha, block) in indices.iter().zip(out.chunks_exact_mut(d)) {
            self.coeff(alpha, t, x, block)?;
        }
        Ok(())
    }

    /// True only when `_αF` vanishes identically.
    fn is_zero(&self, _alpha: &MultiIndex) -> bool {
        false
    }
}

/// Central-difference drift Jacobian.
pub fn fd_jacobian<T: Real, M: SdeModel<T> + ?Sized>(model: &M, t: T, x: &[T], jac: &mut Matrix<T>) {
    let d = x.len();
    let mut xp = x.to_vec();
    let mut fp = vec![T::zero(); d];
    let mut fm = vec![T::zero(); d];
    for k in 0..d {
        let step = T::lit(1e-7) * (T::one() + x[k].abs());
        xp[k] = x[k] + step;
        model.drift(t, &xp, &mut fp);
        xp[k] = x[k] - step;
        model.drift(t, &xp, &mut fm);
        xp[k] = x[k];
        for i in 0..d {
            jac[(i, k)] = (fp[i] - fm[i]) / (step + step);
        }
    }
}

pub(crate) fn check_index(alpha: &MultiIndex, m: usize) -> Result<()> {
    if alpha.len() + alpha.zeros() > 4 {
        return Err(Error::InvalidIndex {
            index: alpha.to_string(),
            reason: "not in A_2".into(),
        });
    }
    if alpha.max_letter() as usize > m {
        return Err(Error::InvalidIndex {
            index: alpha.to_string(),
            reason: format!("letter exceeds noise count {m}"),
        });
    }
    Ok(())
}

/// Real `2×2` representation of multiplication by a complex number.
pub fn complex_block<T: Real>(z: Complex<T>) -> Matrix<T> {
    Matrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => z.re,
        (0, 1) => -z.im,
        _ => z.im,
    })
}

/// Test 1: `dX = −β²X(1−X²) dt + β(1−X²) dW`.
pub fn test1<T: Real>(beta: T) -> ScalarSde<T, Test1Oracle<T>> {
    ScalarSde::new(Test1Oracle { beta })
}

/// Test 2: `A_ij = (−1)^{i+j−1}·a`, `B = b·I`, one noise.
pub fn test2<T: Real>(d: usize, a: T, b: T) -> Result<LinearSde<T>> {
    let drift = Matrix::from_fn(d, d, |i, j| if (i + j) % 2 == 0 { -a } else { a });
    LinearSde::new(drift, vec![Matrix::identity(d).scale(b)])
}

/// Test 3 written for the row-stacked fundamental matrix: `A = −15·I₄`,
/// `B¹ = ½·diag(1,1,0,0)`, `B² = ¼·diag(0,0,1,1)`.
pub fn test3<T: Real>() -> Result<LinearSde<T>> {
    let h = T::lit(0.5);
    let q = T::lit(0.25);
    let z = T::zero();
    LinearSde::new(
        Matrix::identity(4).scale(T::lit(-15.0)),
        vec![Matrix::diag(&[h, h, z, z]), Matrix::diag(&[z, z, q, q])],
    )
}

/// Geometric Brownian motion `dX = λX dt + σX dW` with complex `λ, σ`, as a real `2×2`
/// system acting on `(Re X, Im X)`.
pub fn gbm<T: Real>(lambda: Complex<T>, sigma: Complex<T>) -> Result<LinearSde<T>> {
    LinearSde::new(complex_block(lambda), vec![complex_block(sigma)])
}

/// Additive test equation `dX = λX dt + σ dW` with complex `λ, σ`, as a real `2×2` system.
pub fn additive<T: Real>(lambda: Complex<T>, sigma: Complex<T>) -> Result<AdditiveSde<T>> {
    AdditiveSde::new(complex_block(lambda), vec![vec![sigma.re, sigma.im]])
}
