//! Explicit Itô–Taylor schemes of strong order ½, 1 and 2.

use crate::error::{Error, Result};
use crate::integrals::{IntegralLayout, SegmentIntegrals};
use crate::model::SdeModel;
use crate::multiindex::{hierarchical_set, MultiIndex};
use crate::scalar::Real;

use super::TaylorFamily;

/// Integrals needed by one family member: `A_p` without `v` and without words the model marks
/// as zero, plus every `(j)` so paths can record `W_T`.
pub fn taylor_layout<T: Real, M: SdeModel<T> + ?Sized>(
    model: &M,
    family: TaylorFamily,
) -> Result<IntegralLayout> {
    let m = model.noises();
    let mut words: Vec<MultiIndex> = hierarchical_set(family.order(), m)?
        .into_iter()
        .filter(|a| !a.is_empty() && (a.is_deterministic() || !model.is_zero(a)))
        .collect();
    words.extend((1..=m as u8).map(|j| MultiIndex::new(&[j])));
    IntegralLayout::new(m, words.iter())
}

/// Precomputed index bookkeeping for repeated steps on one layout.
#[derive(Debug, Clone)]
pub(crate) struct TaylorStepper<T> {
    indices: Vec<MultiIndex>,
    positions: Vec<usize>,
    coeffs: Vec<T>,
    d: usize,
}

impl<T: Real> TaylorStepper<T> {
    pub(crate) fn new<M: SdeModel<T> + ?Sized>(
        model: &M,
        family: TaylorFamily,
        layout: &IntegralLayout,
    ) -> Result<Self> {
        let mut indices = Vec::new();
        let mut positions = Vec::new();
        for alpha in hierarchical_set(family.order(), model.noises())? {
            if alpha.is_empty() || (!alpha.is_deterministic() && model.is_zero(&alpha)) {
                continue;
            }
            let pos = layout
                .position(&alpha)
                .ok_or_else(|| Error::MissingIntegral(alpha.to_string()))?;
            indices.push(alpha);
            positions.push(pos);
        }
        let d = model.dim();
        Ok(Self {
            coeffs: vec![T::zero(); indices.len() * d],
            indices,
            positions,
            d,
        })
    }

    pub(crate) fn step<M: SdeModel<T> + ?Sized>(
        &mut self,
        model: &M,
        t: T,
        y: &[T],
        seg: &SegmentIntegrals<T>,
        out: &mut [T],
    ) -> Result<()> {
        model.coefficients(&self.indices, t, y, &mut self.coeffs)?;
        out.copy_from_slice(y);
        for (k, &pos) in self.positions.iter().enumerate() {
            let i_alpha = seg.at(pos);
            let c = &self.coeffs[k * self.d..(k + 1) * self.d];
            for (o, &ci) in out.iter_mut().zip(c) {
                *o += ci * i_alpha;
            }
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }
}

/// `Σ_{α∈A_p} _αF(t,y)·I_α`, with the `v` term contributing `y`.
pub fn step_explicit_taylor<T: Real, M: SdeModel<T> + ?Sized>(
    model: &M,
    family: TaylorFamily,
    t: T,
    y: &[T],
    seg: &SegmentIntegrals<T>,
) -> Result<Vec<T>> {
    let mut stepper = TaylorStepper::new(model, family, seg.layout())?;
    let mut out = vec![T::zero(); y.len()];
    stepper.step(model, t, y, seg, &mut out)?;
    Ok(out)
}
