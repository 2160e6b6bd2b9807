//! Linear SDEs `dX = AX dt + Σ_j B^j X dW^j` with constant matrices.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multiindex::{order_two_set, MultiIndex};
use crate::scalar::Real;

use super::{check_index, expm, SdeModel};

/// Linear model. Every coefficient function is a matrix `M_α` applied to `x`, with
/// `M_v = I` and `M_α = M_{⁻α}·C_{j1}` where `C_0 = A` and `C_j = B^j`.
#[derive(Debug, Clone)]
pub struct LinearSde<T> {
    a: Matrix<T>,
    b: Vec<Matrix<T>>,
    table: BTreeMap<MultiIndex, Matrix<T>>,
}

impl<T: Real> LinearSde<T> {
    pub fn new(a: Matrix<T>, b: Vec<Matrix<T>>) -> Result<Self> {
        let d = a.rows();
        if !a.is_square() || b.iter().any(|bj| bj.rows() != d || bj.cols() != d) {
            return Err(Error::Dimension("drift and diffusion matrices must be d×d".into()));
        }
        if b.is_empty() {
            return Err(Error::InvalidParameter("at least one noise is required".into()));
        }
        let mut table = BTreeMap::new();
        // A_2 is ordered so that ⁻α precedes α only by length, hence build by length
        let mut words: Vec<MultiIndex> = order_two_set(b.len()).into_iter().collect();
        words.sort_by_key(|w| w.len());
        for alpha in words {
            let m = match alpha.first() {
                None => Matrix::identity(d),
                Some(j) => {
                    let tail: &Matrix<T> = &table[&alpha.drop_first()];
                    let c = if j == 0 { &a } else { &b[j as usize - 1] };
                    tail.matmul(c)
                }
            };
            table.insert(alpha, m);
        }
        Ok(Self { a, b, table })
    }

    pub fn drift_matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn diffusion_matrices(&self) -> &[Matrix<T>] {
        &self.b
    }

    /// `M_α` for `α ∈ A_2`.
    pub fn coefficient_matrix(&self, alpha: &MultiIndex) -> Result<&Matrix<T>> {
        self.table.get(alpha).ok_or_else(|| Error::InvalidIndex {
            index: alpha.to_string(),
            reason: format!("not in A_2 for m = {}", self.b.len()),
        })
    }

    /// Checks `A·B^j = B^j·A` and `B^i·B^j = B^j·B^i`, naming the first violating pair.
    pub fn check_commuting(&self) -> Result<()> {
        let mut named: Vec<(String, &Matrix<T>)> = vec![("A".into(), &self.a)];
        for (j, bj) in self.b.iter().enumerate() {
            named.push((format!("B{}", j + 1), bj));
        }
        for i in 0..named.len() {
            for k in i + 1..named.len() {
                let (x, y) = (named[i].1, named[k].1);
                let gap = x.matmul(y).sub(&y.matmul(x)).max_abs();
                let scale = x.max_abs() * y.max_abs() * T::from_usize_lossy(x.rows());
                if gap > T::lit(1e-12) * scale.max(T::min_positive_value()) {
                    return Err(Error::NonCommuting {
                        left: named[i].0.clone(),
                        right: named[k].0.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<T: Real> SdeModel<T> for LinearSde<T> {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn noises(&self) -> usize {
        self.b.len()
    }

    fn drift(&self, _t: T, x: &[T], out: &mut [T]) {
        self.a.matvec_into(x, out);
    }

    fn diffusion(&self, j: usize, _t: T, x: &[T], out: &mut [T]) {
        self.b[j - 1].matvec_into(x, out);
    }

    fn drift_jacobian(&self, _t: T, _x: &[T], jac: &mut Matrix<T>) {
        *jac = self.a.clone();
    }

    fn coeff(&self, alpha: &MultiIndex, _t: T, x: &[T], out: &mut [T]) -> Result<()> {
        check_index(alpha, self.b.len())?;
        if x.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::Dimension(format!("expected vectors of length {}", self.dim())));
        }
        self.coefficient_matrix(alpha)?.matvec_into(x, out);
        Ok(())
    }

    fn is_zero(&self, alpha: &MultiIndex) -> bool {
        self.table.get(alpha).is_some_and(|m| m.is_zero())
    }
}

/// `exp((A − ½Σ(B^j)²)t + Σ B^j W^j)·X0` for commuting coefficient matrices.
pub fn exact_solution_linear<T: Real>(lin: &LinearSde<T>, x0: &[T], t: T, w: &[T]) -> Result<Vec<T>> {
    if w.len() != lin.b.len() || x0.len() != lin.dim() {
        return Err(Error::Dimension("initial state or Wiener values".into()));
    }
    lin.check_commuting()?;
    let mut exponent = lin.a.scale(t);
    for (bj, &wj) in lin.b.iter().zip(w) {
        exponent = exponent.sub(&bj.matmul(bj).scale(T::lit(0.5) * t)).add(&bj.scale(wj));
    }
    Ok(expm(&exponent)?.matvec(x0))
}
