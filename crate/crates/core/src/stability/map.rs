//! Grids of `h*` over `(Re λ, |σ|)`.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::gain::MsScheme;
use super::polynomial::{h_star_with, HStar};

/// `count` points `lo + k·(hi − lo)/count`, `k = 0..count` (the upper end is excluded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridRange {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi && count > 0) {
            return Err(Error::InvalidParameter(format!("grid range {lo}:{hi}:{count}")));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / self.count as f64;
        (0..self.count).map(|k| self.lo + step * k as f64).collect()
    }
}

impl FromStr for GridRange {
    type Err = Error;

    /// Parses `lo:hi:count`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected lo:hi:count, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad());
        };
        let lo = lo.trim().parse::<f64>().map_err(|_| bad())?;
        let hi = hi.trim().parse::<f64>().map_err(|_| bad())?;
        let n = n.trim().parse::<usize>().map_err(|_| bad())?;
        GridRange::new(lo, hi, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StabilityCell {
    /// `2·Re λ + |σ|² ≥ 0`: the test equation itself is not MS-stable.
    Unstable,
    Bound(HStar),
}

impl StabilityCell {
    /// `-1` for [`StabilityCell::Unstable`], `inf` when unbounded up to the cap.
    pub fn csv_value(self) -> String {
        match self {
            StabilityCell::Unstable => "-1".into(),
            StabilityCell::Bound(h) => h.to_string(),
        }
    }
}

/// Row-major grid: `cells[i·sigma.len() + j]` belongs to `(re_lambda[i], sigma[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityGrid {
    pub scheme: MsScheme,
    pub gamma: f64,
    pub cap: f64,
    pub re_lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    pub cells: Vec<StabilityCell>,
}

impl StabilityGrid {
    pub fn cell(&self, i: usize, j: usize) -> StabilityCell {
        self.cells[i * self.sigma.len() + j]
    }

    /// `re_lambda,sigma_abs,h_star` with one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_lambda,sigma_abs,h_star\n");
        for (i, re) in self.re_lambda.iter().enumerate() {
            for (j, s) in self.sigma.iter().enumerate() {
                let _ = writeln!(out, "{re},{s},{}", self.cell(i, j).csv_value());
            }
        }
        out
    }
}

/// `h*` for real `λ` and real `σ ≥ 0` on every grid cell, in parallel.
pub fn stability_map(
    scheme: MsScheme,
    re_lambda: GridRange,
    sigma: GridRange,
    gamma: f64,
    cap: f64,
) -> Result<StabilityGrid> {
    let res = re_lambda.points();
    let sigmas = sigma.points();
    let pairs: Vec<(f64, f64)> = res
        .iter()
        .flat_map(|&r| sigmas.iter().map(move |&s| (r, s)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(r, s)| {
            if 2.0 * r + s * s >= 0.0 {
                return Ok(StabilityCell::Unstable);
            }
            h_star_with(scheme, Complex64::new(r, 0.0), Complex64::new(s, 0.0), gamma, cap).map(StabilityCell::Bound)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityGrid {
        scheme,
        gamma,
        cap,
        re_lambda: res,
        sigma: sigmas,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 2.0 - std::f64::consts::SQRT_2;

    #[test]
    fn range_parsing() {
        let r: GridRange = "-200:0:50".parse().unwrap();
        let p = r.points();
        assert_eq!((p.len(), p[0], p[1]), (50, -200.0, -196.0));
        assert!("1:0:3".parse::<GridRange>().is_err());
        assert!("0:1".parse::<GridRange>().is_err());
        assert!("0:1:0".parse::<GridRange>().is_err());
    }

    #[test]
    fn small_grid_layout_and_sentinels() {
        let g = stability_map(
            MsScheme::TRBDF2,
            GridRange::new(-20.0, 0.0, 4).unwrap(),
            GridRange::new(0.0, 8.0, 4).unwrap(),
            G,
            1e3,
        )
        .unwrap();
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with("re_lambda,sigma_abs,h_star\n-20,0,inf\n"));
        // Re λ = −5, |σ| = 6: 2·(−5) + 36 > 0
        assert_eq!(g.cell(3, 3), StabilityCell::Unstable);
        assert!(csv.contains("-5,6,-1"));
    }
}
