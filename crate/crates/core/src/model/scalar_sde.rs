//! Scalar nonlinear SDEs (`d = m = 1`) described by hand-supplied partial derivatives.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multiindex::{order_two_set, MultiIndex};
use crate::scalar::Real;

use super::{check_index, SdeModel};

/// Partial derivatives of a scalar drift `a(t,x)` and diffusion `b(t,x)`.
/// Time partials default to zero (autonomous coefficients).
pub trait ScalarDerivativeOracle<T: Real>: Send + Sync {
    fn a(&self, t: T, x: T) -> T;
    fn a_x(&self, t: T, x: T) -> T;
    fn a_xx(&self, t: T, x: T) -> T;
    fn a_t(&self, _t: T, _x: T) -> T {
        T::zero()
    }
    fn b(&self, t: T, x: T) -> T;
    fn b_x(&self, t: T, x: T) -> T;
    fn b_xx(&self, t: T, x: T) -> T;
    fn b_xxx(&self, t: T, x: T) -> T;
    fn b_t(&self, _t: T, _x: T) -> T {
        T::zero()
    }
    fn b_tx(&self, _t: T, _x: T) -> T {
        T::zero()
    }
}

/// Test 1 coefficients `a = −β²x(1−x²)`, `b = β(1−x²)`.
#[derive(Debug, Clone, Copy)]
pub struct Test1Oracle<T> {
    pub beta: T,
}

impl<T: Real> ScalarDerivativeOracle<T> for Test1Oracle<T> {
    fn a(&self, _t: T, x: T) -> T {
        -self.beta * self.beta * x * (T::one() - x * x)
    }
    fn a_x(&self, _t: T, x: T) -> T {
        -self.beta * self.beta * (T::one() - T::lit(3.0) * x * x)
    }
    fn a_xx(&self, _t: T, x: T) -> T {
        T::lit(6.0) * self.beta * self.beta * x
    }
    fn b(&self, _t: T, x: T) -> T {
        self.beta * (T::one() - x * x)
    }
    fn b_x(&self, _t: T, x: T) -> T {
        T::lit(-2.0) * self.beta * x
    }
    fn b_xx(&self, _t: T, _x: T) -> T {
        T::lit(-2.0) * self.beta
    }
    fn b_xxx(&self, _t: T, _x: T) -> T {
        T::zero()
    }
}

/// Real geometric Brownian motion `a = λx`, `b = σx`.
#[derive(Debug, Clone, Copy)]
pub struct GbmOracle<T> {
    pub lambda: T,
    pub sigma: T,
}

impl<T: Real> ScalarDerivativeOracle<T> for GbmOracle<T> {
    fn a(&self, _t: T, x: T) -> T {
        self.lambda * x
    }
    fn a_x(&self, _t: T, _x: T) -> T {
        self.lambda
    }
    fn a_xx(&self, _t: T, _x: T) -> T {
        T::zero()
    }
    fn b(&self, _t: T, x: T) -> T {
        self.sigma * x
    }
    fn b_x(&self, _t: T, _x: T) -> T {
        self.sigma
    }
    fn b_xx(&self, _t: T, _x: T) -> T {
        T::zero()
    }
    fn b_xxx(&self, _t: T, _x: T) -> T {
        T::zero()
    }
}

/// Multiplies the diffusion of another oracle (and all its derivatives) by a constant.
#[derive(Debug, Clone, Copy)]
pub struct ScaledNoise<O, T> {
    pub inner: O,
    pub scale: T,
}

impl<T: Real, O: ScalarDerivativeOracle<T>> ScalarDerivativeOracle<T> for ScaledNoise<O, T> {
    fn a(&self, t: T, x: T) -> T {
        self.inner.a(t, x)
    }
    fn a_x(&self, t: T, x: T) -> T {
        self.inner.a_x(t, x)
    }
    fn a_xx(&self, t: T, x: T) -> T {
        self.inner.a_xx(t, x)
    }
    fn a_t(&self, t: T, x: T) -> T {
        self.inner.a_t(t, x)
    }
    fn b(&self, t: T, x: T) -> T {
        self.scale * self.inner.b(t, x)
    }
    fn b_x(&self, t: T, x: T) -> T {
        self.scale * self.inner.b_x(t, x)
    }
    fn b_xx(&self, t: T, x: T) -> T {
        self.scale * self.inner.b_xx(t, x)
    }
    fn b_xxx(&self, t: T, x: T) -> T {
        self.scale * self.inner.b_xxx(t, x)
    }
    fn b_t(&self, t: T, x: T) -> T {
        self.scale * self.inner.b_t(t, x)
    }
    fn b_tx(&self, t: T, x: T) -> T {
        self.scale * self.inner.b_tx(t, x)
    }
}

/// Oracle values at one point, in the order the composition formulas consume them.
struct Partials<T> {
    a: T,
    a_t: T,
    a_x: T,
    a_xx: T,
    b: T,
    b_t: T,
    b_x: T,
    b_xx: T,
    b_xxx: T,
    b_tx: T,
}

impl<T: Real> Partials<T> {
    fn at<O: ScalarDerivativeOracle<T> + ?Sized>(o: &O, t: T, x: T) -> Self {
        Self {
            a: o.a(t, x),
            a_t: o.a_t(t, x),
            a_x: o.a_x(t, x),
            a_xx: o.a_xx(t, x),
            b: o.b(t, x),
            b_t: o.b_t(t, x),
            b_x: o.b_x(t, x),
            b_xx: o.b_xx(t, x),
            b_xxx: o.b_xxx(t, x),
            b_tx: o.b_tx(t, x),
        }
    }

    /// `_αF` for `α ∈ A_2`, `m = 1`; `None` outside `A_2`.
    fn coeff(&self, x: T, alpha: &[u8]) -> Option<T> {
        let half = T::lit(0.5);
        let Self {
            a,
            a_t,
            a_x,
            a_xx,
            b,
            b_t,
            b_x,
            b_xx,
            b_xxx,
            b_tx,
        } = *self;
        let b2 = b * b;
        Some(match alpha {
            [] => x,
            [0] => a,
            [1] => b,
            [0, 0] => a_t + a * a_x + half * b2 * a_xx,
            [1, 0] => b * a_x,
            [0, 1] => b_t + a * b_x + half * b2 * b_xx,
            [1, 1] => b * b_x,
            [1, 1, 0] => b * (b_x * a_x + b * a_xx),
            [1, 0, 1] => b * (b_tx + a_x * b_x + a * b_xx + b * b_x * b_xx + half * b2 * b_xxx),
            [0, 1, 1] => {
                b_t * b_x
                    + b * b_tx
                    + a * (b_x * b_x + b * b_xx)
                    + half * b2 * (T::lit(3.0) * b_x * b_xx + b * b_xxx)
            }
            [1, 1, 1] => b * (b_x * b_x + b * b_xx),
            [1, 1, 1, 1] => {
                b * (b_x * b_x * b_x + T::lit(4.0) * b * b_x * b_xx + b2 * b_xxx)
            }
            _ => return None,
        })
    }
}

impl<T: Copy> Clone for Partials<T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T: Copy> Copy for Partials<T> {}

/// `_αF(t,x)` for all twelve indices of `A_2` with `m = 1`.
pub fn coefficient_table_scalar<T: Real, O: ScalarDerivativeOracle<T> + ?Sized>(
    oracle: &O,
    t: T,
    x: T,
) -> BTreeMap<MultiIndex, T> {
    let p = Partials::at(oracle, t, x);
    order_two_set(1)
        .into_iter()
        .map(|alpha| {
            let v = p.coeff(x, alpha.letters()).expect("index of A_2");
            (alpha, v)
        })
        .collect()
}

/// Scalar SDE driven by one noise, with coefficient functions composed from an oracle.
#[derive(Debug, Clone)]
pub struct ScalarSde<T, O> {
    oracle: O,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Real, O: ScalarDerivativeOracle<T>> ScalarSde<T, O> {
    pub fn new(oracle: O) -> Self {
        Self {
            oracle,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }

    /// `L¹a = b·a_x`.
    pub fn l1_a(&self, t: T, x: T) -> T {
        self.oracle.b(t, x) * self.oracle.a_x(t, x)
    }

    /// `L¹L¹a = b·(b_x·a_x + b·a_xx)`.
    pub fn l1l1_a(&self, t: T, x: T) -> T {
        let o = &self.oracle;
        let b = o.b(t, x);
        b * (o.b_x(t, x) * o.a_x(t, x) + b * o.a_xx(t, x))
    }
}

impl<T: Real, O: ScalarDerivativeOracle<T>> SdeModel<T> for ScalarSde<T, O> {
    fn dim(&self) -> usize {
        1
    }

    fn noises(&self) -> usize {
        1
    }

    fn drift(&self, t: T, x: &[T], out: &mut [T]) {
        out[0] = self.oracle.a(t, x[0]);
    }

    fn diffusion(&self, _j: usize, t: T, x: &[T], out: &mut [T]) {
        out[0] = self.oracle.b(t, x[0]);
    }

    fn drift_jacobian(&self, t: T, x: &[T], jac: &mut Matrix<T>) {
        jac[(0, 0)] = self.oracle.a_x(t, x[0]);
    }

    fn coeff(&self, alpha: &MultiIndex, t: T, x: &[T], out: &mut [T]) -> Result<()> {
        check_index(alpha, 1)?;
        let p = Partials::at(&self.oracle, t, x[0]);
        out[0] = p.coeff(x[0], alpha.letters()).ok_or_else(|| Error::InvalidIndex {
            index: alpha.to_string(),
            reason: "not in A_2".into(),
        })?;
        Ok(())
    }

    fn coefficients(&self, indices: &[MultiIndex], t: T, x: &[T], out: &mut [T]) -> Result<()> {
        let p = Partials::at(&self.oracle, t, x[0]);
        for (alpha, slot) in indices.iter().zip(out.iter_mut()) {
            *slot = p.coeff(x[0], alpha.letters()).ok_or_else(|| Error::InvalidIndex {
                index: alpha.to_string(),
                reason: "not in A_2 for m = 1".into(),
            })?;
        }
        Ok(())
    }
}

/// Closed-form Test 1 solution driven by the Wiener value `w = W_t`.
pub fn exact_solution_test1<T: Real>(beta: T, x0: T, w: T) -> Result<T> {
    let e = ((beta + beta) * w).exp() * (T::one() + x0);
    let den = e + T::one() - x0;
    if den.abs() < T::lit(1e-14) || !den.is_finite() {
        return Err(Error::DegeneratePath(den.to_f64_lossy()));
    }
    Ok((e + x0 - T::one()) / den)
}
