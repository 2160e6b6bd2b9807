//! Additive-noise linear SDEs `dX = AX dt + Σ_j c^j dW^j`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multiindex::MultiIndex;
use crate::scalar::Real;

use super::{check_index, SdeModel};

/// With a constant diffusion the only nonzero coefficient functions on `A_2` are
/// `_vF = x`, `_(0)F = Ax`, `_(0,0)F = A²x`, `_(j)F = c^j` and `_(j,0)F = Ac^j`.
#[derive(Debug, Clone)]
pub struct AdditiveSde<T> {
    a: Matrix<T>,
    a2: Matrix<T>,
    c: Vec<Vec<T>>,
    ac: Vec<Vec<T>>,
}

impl<T: Real> AdditiveSde<T> {
    pub fn new(a: Matrix<T>, c: Vec<Vec<T>>) -> Result<Self> {
        let d = a.rows();
        if !a.is_square() || c.iter().any(|cj| cj.len() != d) {
            return Err(Error::Dimension("drift must be d×d and each noise vector length d".into()));
        }
        if c.is_empty() {
            return Err(Error::InvalidParameter("at least one noise is required".into()));
        }
        let ac = c.iter().map(|cj| a.matvec(cj)).collect();
        Ok(Self {
            a2: a.matmul(&a),
            a,
            c,
            ac,
        })
    }
}

impl<T: Real> SdeModel<T> for AdditiveSde<T> {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn noises(&self) -> usize {
        self.c.len()
    }

    fn drift(&self, _t: T, x: &[T], out: &mut [T]) {
        self.a.matvec_into(x, out);
    }

    fn diffusion(&self, j: usize, _t: T, _x: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.c[j - 1]);
    }

    fn drift_jacobian(&self, _t: T, _x: &[T], jac: &mut Matrix<T>) {
        *jac = self.a.clone();
    }

    fn coeff(&self, alpha: &MultiIndex, _t: T, x: &[T], out: &mut [T]) -> Result<()> {
        check_index(alpha, self.c.len())?;
        match alpha.letters() {
            [] => out.copy_from_slice(x),
            [0] => self.a.matvec_into(x, out),
            [0, 0] => self.a2.matvec_into(x, out),
            [j] => out.copy_from_slice(&self.c[*j as usize - 1]),
            [j, 0] => out.copy_from_slice(&self.ac[*j as usize - 1]),
            _ => out.iter_mut().for_each(|v| *v = T::zero()),
        }
        Ok(())
    }

    fn is_zero(&self, alpha: &MultiIndex) -> bool {
        match alpha.letters() {
            [] | [0] | [0, 0] => false,
            [j] => self.c[*j as usize - 1].iter().all(|v| v.is_zero()),
            [j, 0] => self.ac[*j as usize - 1].iter().all(|v| v.is_zero()),
            _ => true,
        }
    }
}
