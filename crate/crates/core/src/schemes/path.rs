//! Fixed-step integration of one sample path.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrals::{IntegralLayout, SegmentIntegrals, SegmentSampler};
use crate::model::SdeModel;
use crate::rng::RngStream;
use crate::scalar::Real;

use super::taylor::{taylor_layout, TaylorStepper};
use super::trbdf2::{trbdf2_layout, TrBdf2Stepper};
use super::{Scheme, SchemeConfig};

/// Terminal state of one path, the Brownian endpoint and optionally the whole trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutput<T> {
    pub terminal: Vec<T>,
    /// `W_T − W_0`, one entry per noise.
    pub w_total: Vec<T>,
    /// `Y_0, …, Y_N` when recording.
    pub states: Vec<Vec<T>>,
    /// TR-BDF2 stage values `Y_{n+γ}` when recording.
    pub mid_states: Vec<Vec<T>>,
}

enum Stepper<T> {
    Taylor {
        stepper: TaylorStepper<T>,
        sampler: SegmentSampler<T>,
        seg: SegmentIntegrals<T>,
    },
    TrBdf2 {
        stepper: TrBdf2Stepper<T>,
        samplers: [SegmentSampler<T>; 2],
        segs: [SegmentIntegrals<T>; 2],
        mid: Vec<T>,
    },
}

/// Integrates one model with one scheme on a uniform grid `t_n = n·h`, `n = 0..N`.
pub struct PathIntegrator<'a, T: Real, M: SdeModel<T> + ?Sized> {
    model: &'a M,
    scheme: Scheme,
    h: T,
    steps: usize,
    cfg: SchemeConfig<T>,
    stepper: Stepper<T>,
}

impl<'a, T: Real, M: SdeModel<T> + ?Sized> PathIntegrator<'a, T, M> {
    /// `t_end / h` must be a positive integer up to rounding.
    pub fn new(model: &'a M, scheme: Scheme, h: T, t_end: T, cfg: SchemeConfig<T>) -> Result<Self> {
        if !(h > T::zero() && h.is_finite() && t_end > T::zero() && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("step {h} and horizon {t_end}")));
        }
        let ratio = (t_end / h).to_f64_lossy();
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon {t_end} is not a whole number of steps {h}"
            )));
        }
        let sampler = |layout: &Arc<IntegralLayout>, delta: T| {
            SegmentSampler::new(layout.clone(), delta, cfg.truncation.terms(delta.to_f64_lossy()))
        };
        let stepper = match scheme {
            Scheme::Taylor(family) => {
                let layout = Arc::new(taylor_layout(model, family)?);
                let stepper = TaylorStepper::new(model, family, &layout)?;
                let sampler = sampler(&layout, h)?;
                let seg = sampler.blank();
                Stepper::Taylor { stepper, sampler, seg }
            }
            Scheme::TrBdf2(_) => {
                let layout = Arc::new(trbdf2_layout(model)?);
                let stepper = TrBdf2Stepper::new(model, &layout)?;
                let d1 = cfg.gamma() * h;
                let samplers = [sampler(&layout, d1)?, sampler(&layout, h - d1)?];
                let segs = [samplers[0].blank(), samplers[1].blank()];
                Stepper::TrBdf2 {
                    stepper,
                    samplers,
                    segs,
                    mid: vec![T::zero(); model.dim()],
                }
            }
        };
        let mut cfg = cfg;
        if let Scheme::TrBdf2(v) = scheme {
            cfg.variant = v;
        }
        Ok(Self {
            model,
            scheme,
            h,
            steps: steps as usize,
            cfg,
            stepper,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Runs the path from `x0`, drawing all integrals from `stream` step by step.
    pub fn run(&mut self, x0: &[T], stream: &mut RngStream, record: bool) -> Result<PathOutput<T>> {
        let d = self.model.dim();
        if x0.len() != d {
            return Err(Error::Dimension(format!("x0 has length {} vs d = {d}", x0.len())));
        }
        let m = self.model.noises();
        let mut y = x0.to_vec();
        let mut next = vec![T::zero(); d];
        let mut w_total = vec![T::zero(); m];
        let mut states = Vec::new();
        let mut mid_states = Vec::new();
        if record {
            states.reserve(self.steps + 1);
            states.push(y.clone());
        }
        for n in 0..self.steps {
            let t = T::from_usize_lossy(n) * self.h;
            let wrap = |e: Error| Error::StepFailed {
                step: n,
                source: Box::new(e),
            };
            match &mut self.stepper {
                Stepper::Taylor { stepper, sampler, seg } => {
                    sampler.sample_into(stream, seg);
                    for (w, &dw) in w_total.iter_mut().zip(&seg.dw) {
                        *w += dw;
                    }
                    stepper.step(self.model, t, &y, seg, &mut next).map_err(wrap)?;
                }
                Stepper::TrBdf2 {
                    stepper,
                    samplers,
                    segs,
                    mid,
                } => {
                    for (sampler, seg) in samplers.iter_mut().zip(segs.iter_mut()) {
                        sampler.sample_into(stream, seg);
                        for (w, &dw) in w_total.iter_mut().zip(&seg.dw) {
                            *w += dw;
                        }
                    }
                    stepper
                        .step(self.model, t, &y, &segs[0], &segs[1], &self.cfg, mid, &mut next)
                        .map_err(wrap)?;
                    if record {
                        mid_states.push(mid.clone());
                    }
                }
            }
            std::mem::swap(&mut y, &mut next);
            if record {
                states.push(y.clone());
            }
        }
        Ok(PathOutput {
            terminal: y,
            w_total,
            states,
            mid_states,
        })
    }
}

/// Builds a [`PathIntegrator`] and runs a single path.
pub fn integrate_path<T: Real, M: SdeModel<T> + ?Sized>(
    model: &M,
    scheme: Scheme,
    x0: &[T],
    h: T,
    t_end: T,
    cfg: &SchemeConfig<T>,
    stream: &mut RngStream,
    record: bool,
) -> Result<PathOutput<T>> {
    PathIntegrator::new(model, scheme, h, t_end, *cfg)?.run(x0, stream, record)
}
