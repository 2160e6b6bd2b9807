//! Stochastic TR-BDF2 one-step map.
//!
//! With `S₂[y] = Σ_{α∈A₂, l(α)≠n(α)} _αF(t,y)·I_α` over a sub-interval,
//! `La = Σ_j Lʲa·ΔWʲ` and `LLa = Σ_{j,k} LʲLᵏa·I_(j,k)`:
//!
//! ```text
//! P̂       = S₂[Yₙ] − ½(La + LLa)·hγ                         (seg1)
//! Y_{n+γ} = Yₙ + ½(a(tₙ,Yₙ) + a(t_{n+γ},Y_{n+γ}))·hγ + P̂
//! Q̂ₙ      = (1 − γ₃)·(S₂[Yₙ] − (La + LLa)·hγ)                 (seg1)
//! Q̂_{n+γ} = S₂[Y_{n+γ}] − (La + LLa)·hγ₂                     (seg2, at Y_{n+γ})
//! Y_{n+1} = γ₃Y_{n+γ} + (1 − γ₃)Yₙ + a(t_{n+1},Y_{n+1})·hγ₂ + Q̂ₙ + Q̂_{n+γ}
//! ```

use crate::error::{Error, Result};
use crate::integrals::{IntegralLayout, SegmentIntegrals};
use crate::model::SdeModel;
use crate::multiindex::{order_two_set, MultiIndex};
use crate::scalar::Real;

use super::newton::{solve_stage, NewtonWorkspace};
use super::SchemeConfig;

/// Result of one macro-step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    pub y_mid: Vec<T>,
    pub y_next: Vec<T>,
    /// Newton factorisations used by the two stages.
    pub newton_iters: [usize; 2],
}

/// Stochastic words of `A_2` the model does not mark as zero, each `(j)`, and each `(j,k)`
/// whose `LʲLᵏa` is nonzero.
pub fn trbdf2_layout<T: Real, M: SdeModel<T> + ?Sized>(model: &M) -> Result<IntegralLayout> {
    let m = model.noises();
    let mut words: Vec<MultiIndex> = order_two_set(m)
        .into_iter()
        .filter(|a| !a.is_deterministic() && !model.is_zero(a))
        .collect();
    for j in 1..=m as u8 {
        words.push(MultiIndex::new(&[j]));
        for k in 1..=m as u8 {
            if !model.is_zero(&MultiIndex::new(&[j, k, 0])) {
                words.push(MultiIndex::new(&[j, k]));
            }
        }
    }
    IntegralLayout::new(m, words.iter())
}

/// Correction sums over one segment.
struct Corrections<'a, T> {
    s2: &'a [T],
    la: &'a [T],
    lla: &'a [T],
}

/// Index bookkeeping and scratch space for repeated steps on one layout.
#[derive(Debug, Clone)]
pub(crate) struct TrBdf2Stepper<T> {
    d: usize,
    /// coefficient indices: the stochastic words of `A_2` the model keeps
    indices: Vec<MultiIndex>,
    /// layout position of each coefficient index
    positions: Vec<usize>,
    /// `(coefficient slot of (j,0), layout position of (j))`
    la_terms: Vec<(usize, usize)>,
    /// `(coefficient slot of (j,k,0), layout position of (j,k))`
    lla_terms: Vec<(usize, usize)>,
    coeffs: Vec<T>,
    s2: Vec<T>,
    la: Vec<T>,
    lla: Vec<T>,
    s2_2: Vec<T>,
    la_2: Vec<T>,
    lla_2: Vec<T>,
    a0: Vec<T>,
    rhs: Vec<T>,
    newton: NewtonWorkspace<T>,
}

impl<T: Real> TrBdf2Stepper<T> {
    pub(crate) fn new<M: SdeModel<T> + ?Sized>(model: &M, layout: &IntegralLayout) -> Result<Self> {
        let m = model.noises();
        let d = model.dim();
        let locate = |alpha: &MultiIndex| {
            layout
                .position(alpha)
                .ok_or_else(|| Error::MissingIntegral(alpha.to_string()))
        };
        let mut indices = Vec::new();
        let mut positions = Vec::new();
        for alpha in order_two_set(m) {
            if alpha.is_deterministic() || model.is_zero(&alpha) {
                continue;
            }
            positions.push(locate(&alpha)?);
            indices.push(alpha);
        }
        let slot = |alpha: &MultiIndex| indices.iter().position(|a| a == alpha);
        let mut la_terms = Vec::new();
        let mut lla_terms = Vec::new();
        for j in 1..=m as u8 {
            if let Some(s) = slot(&MultiIndex::new(&[j, 0])) {
                la_terms.push((s, locate(&MultiIndex::new(&[j]))?));
            }
            for k in 1..=m as u8 {
                if let Some(s) = slot(&MultiIndex::new(&[j, k, 0])) {
                    lla_terms.push((s, locate(&MultiIndex::new(&[j, k]))?));
                }
            }
        }
        let z = vec![T::zero(); d];
        Ok(Self {
            d,
            coeffs: vec![T::zero(); indices.len() * d],
            indices,
            positions,
            la_terms,
            lla_terms,
            s2: z.clone(),
            la: z.clone(),
            lla: z.clone(),
            s2_2: z.clone(),
            la_2: z.clone(),
            lla_2: z.clone(),
            a0: z.clone(),
            rhs: z,
            newton: NewtonWorkspace::new(d),
        })
    }

    /// Fills `s2`, `la`, `lla` for the segment from coefficients at `(t, y)`.
    fn corrections<M: SdeModel<T> + ?Sized>(
        &mut self,
        model: &M,
        t: T,
        y: &[T],
        seg: &SegmentIntegrals<T>,
        second: bool,
    ) -> Result<()> {
        model.coefficients(&self.indices, t, y, &mut self.coeffs)?;
        let d = self.d;
        let (s2, la, lla) = if second {
            (&mut self.s2_2, &mut self.la_2, &mut self.lla_2)
        } else {
            (&mut self.s2, &mut self.la, &mut self.lla)
        };
        for v in s2.iter_mut().chain(la.iter_mut()).chain(lla.iter_mut()) {
            *v = T::zero();
        }
        let coeffs = &self.coeffs;
        let block = |s: usize| &coeffs[s * d..(s + 1) * d];
        for (s, &pos) in self.positions.iter().enumerate() {
            let i = seg.at(pos);
            for (o, &c) in s2.iter_mut().zip(block(s)) {
                *o += c * i;
            }
        }
        for &(s, pos) in &self.la_terms {
            let i = seg.at(pos);
            for (o, &c) in la.iter_mut().zip(block(s)) {
                *o += c * i;
            }
        }
        for &(s, pos) in &self.lla_terms {
            let i = seg.at(pos);
            for (o, &c) in lla.iter_mut().zip(block(s)) {
                *o += c * i;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step<M: SdeModel<T> + ?Sized>(
        &mut self,
        model: &M,
        t: T,
        y: &[T],
        seg1: &SegmentIntegrals<T>,
        seg2: &SegmentIntegrals<T>,
        cfg: &SchemeConfig<T>,
        y_mid: &mut [T],
        y_next: &mut [T],
    ) -> Result<[usize; 2]> {
        let gamma = cfg.gamma();
        let g2 = cfg.gamma2();
        let g3 = cfg.gamma3();
        let half = T::lit(0.5);
        let h = seg1.delta + seg2.delta;
        if (seg1.delta - gamma * h).abs() > T::lit(1e-10) * h {
            return Err(Error::InvalidParameter(format!(
                "segment lengths {} and {} do not split the step at gamma = {gamma}",
                seg1.delta, seg2.delta
            )));
        }
        let hg = h * gamma;
        let hg2 = h * g2;
        let w = cfg.variant.weights();
        let keep = |b: bool| if b { T::one() } else { T::zero() };

        // stage 1: trapezoidal rule to t + γh
        self.corrections(model, t, y, seg1, false)?;
        model.drift(t, y, &mut self.a0);
        let c1 = Corrections {
            s2: &self.s2,
            la: &self.la,
            lla: &self.lla,
        };
        let (p_la, p_lla) = (keep(w[0].0), keep(w[0].1));
        for i in 0..self.d {
            let p_hat = c1.s2[i] - half * hg * (p_la * c1.la[i] + p_lla * c1.lla[i]);
            self.rhs[i] = y[i] + half * hg * self.a0[i] + p_hat;
        }
        let it1 = solve_stage(model, t + hg, half * hg, &self.rhs, cfg, &mut self.newton, y_mid)?;

        // stage 2: BDF2-like step to t + h; Q̂ₙ reuses the segment-1 sums
        self.corrections(model, t + hg, y_mid, seg2, true)?;
        let (q_la, q_lla) = (keep(w[1].0), keep(w[1].1));
        let (r_la, r_lla) = (keep(w[2].0), keep(w[2].1));
        for i in 0..self.d {
            let q_n = (T::one() - g3) * (self.s2[i] - hg * (q_la * self.la[i] + q_lla * self.lla[i]));
            let q_g = self.s2_2[i] - hg2 * (r_la * self.la_2[i] + r_lla * self.lla_2[i]);
            self.rhs[i] = g3 * y_mid[i] + (T::one() - g3) * y[i] + q_n + q_g;
        }
        let it2 = solve_stage(model, t + h, hg2, &self.rhs, cfg, &mut self.newton, y_next)?;
        if y_mid.iter().chain(y_next.iter()).all(|v| v.is_finite()) {
            Ok([it1, it2])
        } else {
            Err(Error::NonFinite)
        }
    }
}

/// One TR-BDF2 step. `seg1` covers `[t, t+γh]` and `seg2` covers `[t+γh, t+h]`.
pub fn step_trbdf2<T: Real, M: SdeModel<T> + ?Sized>(
    model: &M,
    t: T,
    y: &[T],
    seg1: &SegmentIntegrals<T>,
    seg2: &SegmentIntegrals<T>,
    cfg: &SchemeConfig<T>,
) -> Result<StepOutput<T>> {
    if seg1.layout().indices() != seg2.layout().indices() {
        return Err(Error::InvalidParameter("the two segments use different layouts".into()));
    }
    let mut stepper = TrBdf2Stepper::new(model, seg1.layout())?;
    let d = y.len();
    let mut y_mid = vec![T::zero(); d];
    let mut y_next = vec![T::zero(); d];
    let newton_iters = stepper.step(model, t, y, seg1, seg2, cfg, &mut y_mid, &mut y_next)?;
    Ok(StepOutput {
        y_mid,
        y_next,
        newton_iters,
    })
}
