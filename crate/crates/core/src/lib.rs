//! Strong order-2 integration of Itô SDEs with the stochastic TR-BDF2 scheme.
//!
//! The crate is organised bottom-up:
//!
//! - [`multiindex`]: words over `{0,…,m}`, hierarchical and remainder sets.
//! - [`integrals`]: joint sampling of multiple Itô integrals and their exact second moments.
//! - [`model`]: SDE definitions, coefficient functions and exact solutions.
//! - [`schemes`]: Euler–Maruyama, Milstein, Itô–Taylor 2.0 and TR-BDF2 one-step maps.
//! - [`stability`]: A-stability and mean-square stability of TR-BDF2 and Itô–Taylor 2.0.
//! - [`experiments`]: strong-error estimation and the convergence/stiffness drivers.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the crate root fix
//! `f64`, which every experiment uses.

pub mod error;
pub mod experiments;
pub mod integrals;
pub mod linalg;
pub mod model;
pub mod multiindex;
pub mod rng;
pub mod schemes;
pub mod scalar;
pub mod stability;

pub use error::{Error, Result};
pub use multiindex::{IndexSet, MultiIndex};
pub use rng::{RngStream, StreamKey};
pub use scalar::{KahanSum, Real};

pub type Matrix = linalg::Matrix<f64>;
pub type SegmentIntegrals = integrals::SegmentIntegrals<f64>;
pub type SegmentSampler = integrals::SegmentSampler<f64>;
pub type SchemeConfig = schemes::SchemeConfig<f64>;
pub use schemes::{Scheme, TaylorFamily, Variant};
pub use experiments::{ExperimentConfig, ExperimentReport, TestCase};
pub use stability::{HStar, MsScheme};
