//! One-step maps and path integration.
//!
//! - Explicit Itô–Taylor family: `Y_{n+1} = Σ_{α∈A_p} _αF(t_n,Y_n)·I_α` for `p = ½, 1, 2`
//!   (Euler–Maruyama, Milstein, Itô–Taylor 2.0).
//! - Stochastic TR-BDF2: a trapezoidal stage to `t + γh` followed by a BDF2-like stage to
//!   `t + h`, each solved by Newton's method, with stochastic corrections `P̂`, `Q̂_n`, `Q̂_{n+γ}`.

mod newton;
mod path;
mod taylor;
mod trbdf2;

pub use newton::newton_stage_solve;
pub use path::{integrate_path, PathIntegrator, PathOutput};
pub use taylor::{step_explicit_taylor, taylor_layout};
pub use trbdf2::{step_trbdf2, trbdf2_layout, StepOutput};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrals::Truncation;
use crate::scalar::Real;

/// Which correction terms of TR-BDF2 are kept.
///
/// `R1`/`R2` drop the `Lʲa·ΔW` / `LʲLᵏa·I_(j,k)` part of `P̂`; `R3`/`R4` do the same for
/// `Q̂_n` and `R5`/`R6` for `Q̂_{n+γ}`. The other two correction terms stay as in `Full`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    Full,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::R1,
        Variant::R2,
        Variant::R3,
        Variant::R4,
        Variant::R5,
        Variant::R6,
    ];

    /// Weights `(k_La, k_LLa)` applied to the two correction sums of each term, in the order
    /// `P̂`, `Q̂_n`, `Q̂_{n+γ}`.
    pub(crate) fn weights(self) -> [(bool, bool); 3] {
        let mut w = [(true, true); 3];
        match self {
            Variant::Full => {}
            Variant::R1 => w[0].0 = false,
            Variant::R2 => w[0].1 = false,
            Variant::R3 => w[1].0 = false,
            Variant::R4 => w[1].1 = false,
            Variant::R5 => w[2].0 = false,
            Variant::R6 => w[2].1 = false,
        }
        w
    }
}

/// Members of the explicit Itô–Taylor family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TaylorFamily {
    EulerMaruyama,
    Milstein,
    ItoTaylor2,
}

impl TaylorFamily {
    /// Strong order `p` of the hierarchical set `A_p`.
    pub fn order(self) -> f64 {
        match self {
            TaylorFamily::EulerMaruyama => 0.5,
            TaylorFamily::Milstein => 1.0,
            TaylorFamily::ItoTaylor2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    Taylor(TaylorFamily),
    TrBdf2(Variant),
}

impl Scheme {
    pub const EM: Scheme = Scheme::Taylor(TaylorFamily::EulerMaruyama);
    pub const MILSTEIN: Scheme = Scheme::Taylor(TaylorFamily::Milstein);
    pub const IT2: Scheme = Scheme::Taylor(TaylorFamily::ItoTaylor2);
    pub const TRBDF2: Scheme = Scheme::TrBdf2(Variant::Full);

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Taylor(TaylorFamily::EulerMaruyama) => "em",
            Scheme::Taylor(TaylorFamily::Milstein) => "milstein",
            Scheme::Taylor(TaylorFamily::ItoTaylor2) => "it2",
            Scheme::TrBdf2(Variant::Full) => "trbdf2",
            Scheme::TrBdf2(Variant::R1) => "trbdf2-r1",
            Scheme::TrBdf2(Variant::R2) => "trbdf2-r2",
            Scheme::TrBdf2(Variant::R3) => "trbdf2-r3",
            Scheme::TrBdf2(Variant::R4) => "trbdf2-r4",
            Scheme::TrBdf2(Variant::R5) => "trbdf2-r5",
            Scheme::TrBdf2(Variant::R6) => "trbdf2-r6",
        }
    }

    pub fn all() -> Vec<Scheme> {
        let mut v = vec![Scheme::EM, Scheme::MILSTEIN, Scheme::IT2];
        v.extend(Variant::ALL.iter().map(|&r| Scheme::TrBdf2(r)));
        v
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::all()
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme {s:?}")))
    }
}

/// Parameters shared by the implicit schemes and the path driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeConfig<T> {
    gamma: T,
    pub variant: Variant,
    pub newton_tol: T,
    pub newton_max_iter: usize,
    pub truncation: Truncation,
}

impl<T: Real> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(2.0) - T::SQRT_2(),
            variant: Variant::Full,
            newton_tol: T::default_tolerance(),
            newton_max_iter: 50,
            truncation: Truncation::default(),
        }
    }
}

impl<T: Real> SchemeConfig<T> {
    pub fn with_gamma(gamma: T) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.set_gamma(gamma)?;
        Ok(cfg)
    }

    pub fn set_gamma(&mut self, gamma: T) -> Result<()> {
        if !(gamma > T::zero() && gamma < T::one()) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} outside (0, 1)")));
        }
        self.gamma = gamma;
        Ok(())
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `γ₂ = (1−γ)/(2−γ)`.
    pub fn gamma2(&self) -> T {
        (T::one() - self.gamma) / (T::lit(2.0) - self.gamma)
    }

    /// `γ₃ = 1/(γ(2−γ))`.
    pub fn gamma3(&self) -> T {
        T::one() / (self.gamma * (T::lit(2.0) - self.gamma))
    }
}
