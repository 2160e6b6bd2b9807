//! Newton iteration for the implicit stages `x − c·a(t,x) = rhs`.

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::SdeModel;
use crate::scalar::{norm2, Real};

use super::SchemeConfig;

/// Scratch buffers reused across stage solves.
#[derive(Debug, Clone)]
pub(crate) struct NewtonWorkspace<T> {
    f: Vec<T>,
    r: Vec<T>,
    jac: Matrix<T>,
}

impl<T: Real> NewtonWorkspace<T> {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            f: vec![T::zero(); d],
            r: vec![T::zero(); d],
            jac: Matrix::zeros(d, d),
        }
    }
}

/// Solves `x − c·a(t,x) = rhs` starting from `x = rhs`.
///
/// Converges when `‖x − c·a(t,x) − rhs‖ ≤ tol·(1 + ‖rhs‖)`; the accepted iterate then gets one
/// extra correction with the last factorisation. On failure the iteration restarts once with
/// steps halved. Returns the number of Jacobian factorisations used.
pub(crate) fn solve_stage<T: Real, M: SdeModel<T> + ?Sized>(
    model: &M,
    t: T,
    c: T,
    rhs: &[T],
    cfg: &SchemeConfig<T>,
    ws: &mut NewtonWorkspace<T>,
    x: &mut [T],
) -> Result<usize> {
    let d = rhs.len();
    let bound = cfg.newton_tol * (T::one() + norm2(rhs));
    let mut total = 0;
    let mut last_residual = T::infinity();
    for damping in [T::one(), T::lit(0.5)] {
        x.copy_from_slice(rhs);
        let mut lu: Option<Lu<T>> = None;
        for k in 0..=cfg.newton_max_iter {
            model.drift(t, x, &mut ws.f);
            for i in 0..d {
                ws.r[i] = x[i] - c * ws.f[i] - rhs[i];
            }
            let res = norm2(&ws.r);
            last_residual = res;
            if !res.is_finite() {
                break;
            }
            if res <= bound {
                if let Some(lu) = &lu {
                    lu.solve_in_place(&mut ws.r);
                    for i in 0..d {
                        x[i] -= ws.r[i];
                    }
                }
                return Ok(total);
            }
            if k == cfg.newton_max_iter {
                break;
            }
            model.drift_jacobian(t, x, &mut ws.jac);
            let mut j = ws.jac.scale(-c);
            for i in 0..d {
                j[(i, i)] += T::one();
            }
            let factor = match Lu::factor(&j) {
                Ok(f) => f,
                Err(_) => break,
            };
            factor.solve_in_place(&mut ws.r);
            for i in 0..d {
                x[i] -= damping * ws.r[i];
            }
            lu = Some(factor);
            total += 1;
        }
    }
    Err(Error::NewtonFailed {
        iterations: total,
        residual: last_residual.to_f64_lossy(),
    })
}

/// Solves `x − c·a(t,x) = rhs` for one implicit stage. Returns `(x, iterations)`.
pub fn newton_stage_solve<T: Real, M: SdeModel<T> + ?Sized>(
    model: &M,
    t: T,
    c: T,
    rhs: &[T],
    cfg: &SchemeConfig<T>,
) -> Result<(Vec<T>, usize)> {
    if rhs.len() != model.dim() {
        return Err(Error::Dimension(format!("rhs length {} vs d = {}", rhs.len(), model.dim())));
    }
    let mut ws = NewtonWorkspace::new(rhs.len());
    let mut x = vec![T::zero(); rhs.len()];
    let iters = solve_stage(model, t, c, rhs, cfg, &mut ws, &mut x)?;
    Ok((x, iters))
}
