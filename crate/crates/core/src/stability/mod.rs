//! A-stability and mean-square stability of TR-BDF2 and Itô–Taylor 2.0.
//!
//! Deterministic analysis uses the amplification function `G(z)` of TR-BDF2. Mean-square
//! analysis uses the test equation `dX = λX dt + σX dW` with complex `λ, σ`: one step maps
//! `Y₀` to `R·Y₀` and `E|R|²` is assembled from pair moments of the integrals on each
//! sub-interval, using independence of the two TR-BDF2 segments.
//!
//! The stability polynomial is `P(h) = (E|R·D|² − |D|²)/h`, where `D = (1 − ½λγh)(1 − λγ₂h)`
//! collects the implicit divisors (`D = 1` for Itô–Taylor 2.0). `P(h) < 0` exactly when the
//! step is MS-stable. The analysis runs in `f64`.

mod gain;
mod map;
mod polynomial;

pub use gain::{ms_expansion, ms_gain, ms_gain_mc, MsExpansion, MsScheme};
pub use map::{stability_map, GridRange, StabilityCell, StabilityGrid};
pub use polynomial::{h_star, h_star_with, ms_polynomial, HStar, StabilityPolynomial};

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `G(z) = ((1+(1−γ)²)z + 2(2−γ)) / (γ(1−γ)z² + (γ²−2)z + 2(2−γ))`.
pub fn amplification<T: Real>(z: Complex<T>, gamma: T) -> Result<Complex<T>> {
    let one = T::one();
    let two = T::lit(2.0);
    let c = two * (two - gamma);
    let num = z * (one + (one - gamma) * (one - gamma)) + c;
    let den = z * z * (gamma * (one - gamma)) + z * (gamma * gamma - two) + c;
    if den.norm() <= T::epsilon() * c {
        return Err(Error::Pole(format!("G({z}) with gamma = {gamma}")));
    }
    Ok(num / den)
}

/// Sampling plan for [`a_stability_probe`]: `Re z = −10^u`, `Im z = ±10^v` (and `0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeGrid {
    pub re_decades: (f64, f64),
    pub re_points: usize,
    pub im_decades: (f64, f64),
    /// Points per sign of `Im z`; `Im z = 0` is added once.
    pub im_points: usize,
    pub boundary_decades: (f64, f64),
    pub boundary_points: usize,
    pub far_radius: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            re_decades: (-3.0, 5.0),
            re_points: 100,
            im_decades: (-3.0, 5.0),
            im_points: 50,
            boundary_decades: (-6.0, 8.0),
            boundary_points: 1000,
            far_radius: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AStabilityReport {
    pub gamma: f64,
    pub interior_points: usize,
    /// `max |G(z)|` over the left-half-plane grid.
    pub max_interior: f64,
    pub boundary_points: usize,
    /// `max |G(iy)|` over the imaginary-axis sweep.
    pub max_boundary: f64,
    /// `|G(−R)|` at the far radius.
    pub far_field: f64,
}

fn log_nodes(decades: (f64, f64), n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (decades.1 - decades.0) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| 10f64.powf(decades.0 + step * k as f64))
}

/// Evaluates `|G|` over the left half-plane, on the imaginary axis and far out on the
/// negative real axis.
pub fn a_stability_probe_with(gamma: f64, grid: &ProbeGrid) -> Result<AStabilityReport> {
    let mut ims: Vec<f64> = vec![0.0];
    for y in log_nodes(grid.im_decades, grid.im_points) {
        ims.push(y);
        ims.push(-y);
    }
    let mut max_interior = 0.0f64;
    let mut interior_points = 0;
    for x in log_nodes(grid.re_decades, grid.re_points) {
        for &y in &ims {
            max_interior = max_interior.max(amplification(Complex::new(-x, y), gamma)?.norm());
            interior_points += 1;
        }
    }
    let mut max_boundary = amplification(Complex::new(0.0, 0.0), gamma)?.norm();
    let mut boundary_points = 1;
    for y in log_nodes(grid.boundary_decades, grid.boundary_points) {
        for s in [y, -y] {
            max_boundary = max_boundary.max(amplification(Complex::new(0.0, s), gamma)?.norm());
            boundary_points += 1;
        }
    }
    let far_field = amplification(Complex::new(-grid.far_radius, 0.0), gamma)?.norm();
    Ok(AStabilityReport {
        gamma,
        interior_points,
        max_interior,
        boundary_points,
        max_boundary,
        far_field,
    })
}

/// [`a_stability_probe_with`] on the default grid (`≥ 10⁴` interior points).
pub fn a_stability_probe(gamma: f64) -> Result<AStabilityReport> {
    a_stability_probe_with(gamma, &ProbeGrid::default())
}
