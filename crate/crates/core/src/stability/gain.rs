//! Mean-square gain `E|R|²` on the multiplicative test equation.
//!
//! Every random factor of `R` is a linear combination `Σ_α c_α(h)·I_α` over `A_2` (with
//! `I_v = 1`) whose coefficients are affine in `h`, so `E[X·conj Y]` is a Hermitian form in
//! the pair moments. TR-BDF2 gives `R·D₁D₂ = U·W + V·D₁` with `U, V` built on the first
//! segment and `W` on the second; independence yields
//! `E|R·D₁D₂|² = E|U|²·E|W|² + 2·Re(E[U·conj V]·E[W]·conj D₁) + |D₁|²·E|V|²`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrals::{MomentTable, Truncation};
use crate::model::gbm;
use crate::multiindex::{order_two_set, MultiIndex};
use crate::rng::{experiment_id, RngStream};
use crate::scalar::KahanSum;
use crate::schemes::{PathIntegrator, Scheme, SchemeConfig, Variant};

/// Schemes covered by the mean-square analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MsScheme {
    TrBdf2(Variant),
    It2,
}

impl MsScheme {
    pub const TRBDF2: MsScheme = MsScheme::TrBdf2(Variant::Full);

    /// Degree of `P` for `γ = 2−√2`.
    pub fn degree(self) -> usize {
        match self {
            MsScheme::TrBdf2(_) => 7,
            MsScheme::It2 => 3,
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            MsScheme::TrBdf2(v) => Scheme::TrBdf2(v),
            MsScheme::It2 => Scheme::IT2,
        }
    }
}

impl TryFrom<Scheme> for MsScheme {
    type Error = Error;

    fn try_from(s: Scheme) -> Result<Self> {
        match s {
            Scheme::TrBdf2(v) => Ok(MsScheme::TrBdf2(v)),
            Scheme::IT2 => Ok(MsScheme::It2),
            other => Err(Error::InvalidParameter(format!(
                "mean-square analysis covers trbdf2 and it2, not {other}"
            ))),
        }
    }
}

impl fmt::Display for MsScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.scheme(), f)
    }
}

impl FromStr for MsScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<Scheme>()?.try_into()
    }
}

/// Words of `A_2` for one noise with their pair moments.
struct Words {
    words: Vec<MultiIndex>,
    /// `E[I_α I_β]` polynomial coefficients, row-major, each padded to `MAX_POW + 1`.
    coeffs: Vec<[f64; MAX_POW + 1]>,
}

/// `E[I_α I_β]` has degree `(l(α)+n(α)+l(β)+n(β))/2 ≤ 4` in the interval length.
const MAX_POW: usize = 4;

fn words() -> &'static Words {
    static WORDS: OnceLock<Words> = OnceLock::new();
    WORDS.get_or_init(|| {
        let words: Vec<MultiIndex> = order_two_set(1).into_iter().collect();
        let table = MomentTable::new(&words);
        let n = words.len();
        let mut coeffs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut c = [0.0; MAX_POW + 1];
                for (k, r) in table.poly(i, j).coefficients().iter().enumerate() {
                    c[k] = *r.numer() as f64 / *r.denom() as f64;
                }
                coeffs.push(c);
            }
        }
        Words { words, coeffs }
    })
}

fn slot(alpha: &MultiIndex) -> usize {
    words()
        .words
        .iter()
        .position(|w| w == alpha)
        .expect("word in A_2")
}

/// `Σ_α (a_α + b_α·h)·I_α`.
#[derive(Debug, Clone)]
pub(crate) struct Affine {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl Affine {
    fn zero() -> Self {
        let n = words().words.len();
        Self {
            a: vec![Complex64::new(0.0, 0.0); n],
            b: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn at(&self, h: f64) -> Vec<Complex64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + b * h).collect()
    }
}

/// Random factors of `R` for one parameter point.
pub(crate) enum Factors {
    It2 {
        r: Affine,
    },
    TrBdf2 {
        u: Affine,
        v: Affine,
        w: Affine,
        /// `D₁ = 1 + d1·h`, `D₂ = 1 + d2·h`
        d1: Complex64,
        d2: Complex64,
        gamma: f64,
    },
}

/// `_αF/x = λ^{n(α)}·σ^{l(α)−n(α)}` for the test equation.
fn phi(alpha: &MultiIndex, lambda: Complex64, sigma: Complex64) -> Complex64 {
    let n = alpha.zeros() as i32;
    lambda.powi(n) * sigma.powi(alpha.len() as i32 - n)
}

pub(crate) fn factors(scheme: MsScheme, lambda: Complex64, sigma: Complex64, gamma: f64) -> Result<Factors> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} outside (0, 1)")));
    }
    if !(lambda.is_finite() && sigma.is_finite()) {
        return Err(Error::NonFinite);
    }
    let ws = &words().words;
    match scheme {
        MsScheme::It2 => {
            let mut r = Affine::zero();
            for (k, alpha) in ws.iter().enumerate() {
                r.a[k] = phi(alpha, lambda, sigma);
            }
            Ok(Factors::It2 { r })
        }
        MsScheme::TrBdf2(variant) => {
            let g2 = (1.0 - gamma) / (2.0 - gamma);
            let g3 = 1.0 / (gamma * (2.0 - gamma));
            let weights = variant.weights();
            let keep = |b: bool| if b { 1.0 } else { 0.0 };
            let (v_slot, i1, i11) = (slot(&MultiIndex::empty()), slot(&MultiIndex::new(&[1])), slot(&MultiIndex::new(&[1, 1])));
            let la = lambda * sigma;
            let lla = lambda * sigma * sigma;
            // S₂ over the stochastic words, scaled by `scale`, minus `c·h·(k₁·La·I_(1) + k₂·LLa·I_(1,1))`
            let build = |scale: f64, constant: Complex64, c: f64, (k1, k2): (bool, bool)| {
                let mut f = Affine::zero();
                for (k, alpha) in ws.iter().enumerate() {
                    if !alpha.is_deterministic() {
                        f.a[k] = phi(alpha, lambda, sigma) * scale;
                    }
                }
                f.a[v_slot] = constant;
                f.b[i1] -= la * (c * keep(k1));
                f.b[i11] -= lla * (c * keep(k2));
                f
            };
            let mut u = build(1.0, Complex64::new(1.0, 0.0), 0.5 * gamma, weights[0]);
            u.b[v_slot] = lambda * (0.5 * gamma);
            let v = build(1.0 - g3, Complex64::new(1.0 - g3, 0.0), (1.0 - g3) * gamma, weights[1]);
            let w = build(1.0, Complex64::new(g3, 0.0), g2, weights[2]);
            Ok(Factors::TrBdf2 {
                u,
                v,
                w,
                d1: -lambda * (0.5 * gamma),
                d2: -lambda * g2,
                gamma,
            })
        }
    }
}

/// `E[X·conj Y]` for coefficient vectors on a segment of length `delta`.
fn hermitian(x: &[Complex64], y: &[Complex64], delta: f64) -> Complex64 {
    let w = words();
    let n = x.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        if x[i] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let c = &w.coeffs[i * n + j];
            let m = c.iter().rev().fold(0.0, |acc, &ck| acc * delta + ck);
            if m != 0.0 {
                row += y[j].conj() * m;
            }
        }
        acc += x[i] * row;
    }
    acc
}

/// Copy of `x` with the deterministic words removed: a zero-mean combination.
fn centred(x: &[Complex64]) -> Vec<Complex64> {
    words()
        .words
        .iter()
        .zip(x)
        .map(|(a, &c)| if a.is_deterministic() { Complex64::new(0.0, 0.0) } else { c })
        .collect()
}

/// `Σ c_α·I_α` over the deterministic words other than `v`; `I_(0,…,0) = δᵏ/k!`.
fn deterministic_tail(x: &[Complex64], delta: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, &c) in words().words.iter().zip(x) {
        if a.is_deterministic() && !a.is_empty() {
            let k = a.len() as i32;
            let fact: f64 = (1..=k).map(f64::from).product();
            acc += c * (delta.powi(k) / fact);
        }
    }
    acc
}

/// Returns `(E|R·D|² − |D|², |D|²)` evaluated directly at `h`.
///
/// Writing `R·D = D + e + X̃` with deterministic `e` and zero-mean `X̃` gives
/// `E|R·D|² − |D|² = 2·Re(e·conj D) + |e|² + E|X̃|²`; the constant part of `e` vanishes
/// identically, so the gap carries no cancellation for small `h`.
fn direct(f: &Factors, h: f64) -> (f64, f64) {
    match f {
        Factors::It2 { r } => {
            let r = r.at(h);
            let e = deterministic_tail(&r, h);
            let rt = centred(&r);
            (2.0 * e.re + e.norm_sqr() + hermitian(&rt, &rt, h).re, 1.0)
        }
        Factors::TrBdf2 { u, v, w, d1, d2, gamma } => {
            let vs = slot(&MultiIndex::empty());
            let d = (1.0 + d1 * h) * (1.0 + d2 * h);
            let (u0, w0, v0) = (u.a[vs] + u.b[vs] * h, w.a[vs], v.a[vs]);
            // U₀W₀ + V₀D₁ − D₁D₂ with W₀ + V₀ = 1
            let e = h * (u.b[vs] * w0 + v0 * d1 - d1 - d2) - d1 * d2 * h * h;
            let (s1, s2) = (gamma * h, (1.0 - gamma) * h);
            let (ut, vt, wt) = (centred(&u.at(h)), centred(&v.at(h)), centred(&w.at(h)));
            let d1h = 1.0 + d1 * h;
            let uu = hermitian(&ut, &ut, s1).re;
            let vv = hermitian(&vt, &vt, s1).re;
            let uv = hermitian(&ut, &vt, s1);
            let ww = hermitian(&wt, &wt, s2).re;
            let seg1 = w0.norm_sqr() * uu + 2.0 * (w0 * d1h.conj() * uv).re + d1h.norm_sqr() * vv;
            let stoch = seg1 + u0.norm_sqr() * ww + uu * ww;
            (2.0 * (e * d.conj()).re + e.norm_sqr() + stoch, d.norm_sqr())
        }
    }
}

/// `E|R|²` for one step of size `h`.
pub fn ms_gain(scheme: MsScheme, h: f64, lambda: Complex64, sigma: Complex64, gamma: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step h = {h}")));
    }
    let f = factors(scheme, lambda, sigma, gamma)?;
    let (gap, den) = direct(&f, h);
    if den <= f64::EPSILON * f64::EPSILON {
        return Err(Error::Pole(format!("implicit divisor vanishes at h = {h}, lambda = {lambda}")));
    }
    Ok(1.0 + gap / den)
}

/// `E|R·D|² − |D|²`, used for sign decisions without the divisor.
pub(crate) fn cleared_gap(f: &Factors, h: f64) -> f64 {
    direct(f, h).0
}

/// Complex polynomial in `h`, lowest power first.
#[derive(Debug, Clone)]
struct CPoly(Vec<Complex64>);

impl CPoly {
    fn affine(a: Complex64, b: Complex64) -> Self {
        CPoly(vec![a, b])
    }

    fn mul(&self, o: &CPoly) -> CPoly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly(out)
    }

    fn conj(&self) -> CPoly {
        CPoly(self.0.iter().map(|c| c.conj()).collect())
    }

    fn add_assign(&mut self, o: &CPoly) {
        if o.0.len() > self.0.len() {
            self.0.resize(o.0.len(), Complex64::new(0.0, 0.0));
        }
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += b;
        }
    }

    fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }
}

/// `E[X·conj Y]` as a polynomial in `h` on a segment of length `ratio·h`.
fn hermitian_poly(x: &Affine, y: &Affine, ratio: f64) -> CPoly {
    let w = words();
    let n = x.a.len();
    let mut acc = CPoly(vec![Complex64::new(0.0, 0.0)]);
    for i in 0..n {
        let xi = CPoly::affine(x.a[i], x.b[i]);
        for j in 0..n {
            let c = &w.coeffs[i * n + j];
            if c.iter().all(|&v| v == 0.0) {
                continue;
            }
            let m = CPoly(
                c.iter()
                    .enumerate()
                    .map(|(k, &ck)| Complex64::new(ck * ratio.powi(k as i32), 0.0))
                    .collect(),
            );
            let yj = CPoly::affine(y.a[j], y.b[j]).conj();
            acc.add_assign(&xi.mul(&yj).mul(&m));
        }
    }
    acc
}

/// `E|R·D|²` and `|D|²` expanded as real polynomials in `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsExpansion {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl MsExpansion {
    /// Coefficients of `P(h) = (numerator − denominator)/h`; the constant terms cancel.
    pub fn p_coefficients(&self) -> Vec<f64> {
        let n = self.numerator.len().max(self.denominator.len());
        let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        let mut p: Vec<f64> = (1..n).map(|k| get(&self.numerator, k) - get(&self.denominator, k)).collect();
        while p.len() > 1 && p.last() == Some(&0.0) {
            p.pop();
        }
        p
    }

    /// `P(h)` by Horner's rule.
    pub fn p_eval(&self, h: f64) -> f64 {
        self.p_coefficients().iter().rev().fold(0.0, |acc, &c| acc * h + c)
    }
}

/// Expands `E|R·D|²` and `|D|²` as polynomials in `h` by moment accounting.
pub fn ms_expansion(scheme: MsScheme, lambda: Complex64, sigma: Complex64, gamma: f64) -> Result<MsExpansion> {
    let f = factors(scheme, lambda, sigma, gamma)?;
    Ok(expand(&f))
}

pub(crate) fn expand(f: &Factors) -> MsExpansion {
    match f {
        Factors::It2 { r } => MsExpansion {
            numerator: hermitian_poly(r, r, 1.0).re(),
            denominator: vec![1.0],
        },
        Factors::TrBdf2 { u, v, w, d1, d2, gamma } => {
            let one = Complex64::new(1.0, 0.0);
            let p1 = CPoly::affine(one, *d1);
            let p2 = CPoly::affine(one, *d2);
            let (r1, r2) = (*gamma, 1.0 - gamma);
            let uu = hermitian_poly(u, u, r1);
            let vv = hermitian_poly(v, v, r1);
            let uv = hermitian_poly(u, v, r1);
            let ww = hermitian_poly(w, w, r2);
            let mut unit = Affine::zero();
            unit.a[slot(&MultiIndex::empty())] = one;
            let ew = hermitian_poly(w, &unit, r2);
            let cross = uv.mul(&ew).mul(&p1.conj());
            let mut num = uu.mul(&ww);
            num.add_assign(&cross);
            num.add_assign(&cross.conj());
            num.add_assign(&p1.mul(&p1.conj()).mul(&vv));
            let d = p1.mul(&p2);
            MsExpansion {
                numerator: num.re(),
                denominator: d.mul(&d.conj()).re(),
            }
        }
    }
}

/// Monte Carlo estimate of `E|Y₁/Y₀|²` with its standard error, running the actual one-step
/// map on the real `2×2` form of the test equation from `Y₀ = 1`.
///
/// Samples are split into fixed chunks with their own streams and summed in chunk order, so
/// the result does not depend on the thread count.
pub fn ms_gain_mc(
    scheme: MsScheme,
    h: f64,
    lambda: Complex64,
    sigma: Complex64,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("samples = {samples}")));
    }
    let model = gbm(lambda, sigma)?;
    let mut cfg = SchemeConfig::<f64>::with_gamma(gamma)?;
    cfg.truncation = Truncation::Fixed(64);
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let exp = experiment_id("ms-gain-mc");
    let partial: Vec<Result<(KahanSum<f64>, KahanSum<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut integ = PathIntegrator::new(&model, scheme.scheme(), h, h, cfg)?;
            let mut stream = RngStream::from_parts(seed, exp, c as u64, 0);
            let (mut s1, mut s2) = (KahanSum::new(), KahanSum::new());
            for _ in (c * CHUNK)..((c + 1) * CHUNK).min(samples) {
                let y = integ.run(&[1.0, 0.0], &mut stream, false)?.terminal;
                let g = y[0] * y[0] + y[1] * y[1];
                s1.add(g);
                s2.add(g * g);
            }
            Ok((s1, s2))
        })
        .collect();
    let (mut s1, mut s2) = (KahanSum::new(), KahanSum::new());
    for p in partial {
        let (a, b) = p?;
        s1.add(a.value());
        s2.add(b.value());
    }
    let n = samples as f64;
    let mean = s1.value() / n;
    let var = ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::amplification;

    const G: f64 = 2.0 - std::f64::consts::SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn deterministic_reduction() {
        for (l, h) in [(c(-1.0, 0.0), 0.1), (c(-3.0, 2.0), 0.7), (c(-50.0, -10.0), 2.0)] {
            let g = amplification(l * h, G).unwrap().norm_sqr();
            let got = ms_gain(MsScheme::TRBDF2, h, l, c(0.0, 0.0), G).unwrap();
            assert!((got - g).abs() < 1e-14 * g.max(1.0), "{l} {h}");
        }
    }

    #[test]
    fn it2_deterministic_is_taylor_polynomial() {
        let (l, h) = (c(-2.0, 1.0), 0.3);
        let z = l * h;
        let r = 1.0 + z + z * z / 2.0;
        let got = ms_gain(MsScheme::It2, h, l, c(0.0, 0.0), G).unwrap();
        assert!((got - r.norm_sqr()).abs() < 1e-15);
    }

    /// `E|R|²` for Itô–Taylor 2.0 written out from the pair-moment table directly.
    #[test]
    fn it2_matches_table_quadratic_form() {
        let (l, s, h) = (c(-1.5, 0.5), c(0.3, 0.8), 0.4);
        let w = words();
        let m = MomentTable::new(&w.words).eval(h);
        let n = w.words.len();
        let phis: Vec<Complex64> = w.words.iter().map(|a| phi(a, l, s)).collect();
        let mut expect = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                expect += phis[i] * phis[j].conj() * m[i * n + j];
            }
        }
        let got = ms_gain(MsScheme::It2, h, l, s, G).unwrap();
        assert!((got - expect.re).abs() < 1e-13 && expect.im.abs() < 1e-13);
    }

    #[test]
    fn expansion_agrees_with_direct_evaluation() {
        for scheme in [MsScheme::TRBDF2, MsScheme::It2, MsScheme::TrBdf2(Variant::R4)] {
            let (l, s) = (c(-7.0, 3.0), c(1.5, -2.0));
            let e = ms_expansion(scheme, l, s, G).unwrap();
            let f = factors(scheme, l, s, G).unwrap();
            for h in [1e-3, 0.05, 0.3, 2.0] {
                let (gap, den) = direct(&f, h);
                let horner = |p: &[f64]| p.iter().rev().fold(0.0, |acc, &c| acc * h + c);
                let num = horner(&e.numerator);
                assert!((num - horner(&e.denominator) - gap).abs() < 1e-10 * num.abs().max(1.0));
                assert!((e.p_eval(h) * h - gap).abs() < 1e-10 * num.abs().max(1.0));
                assert!((horner(&e.denominator) - den).abs() < 1e-12 * den.max(1.0));
            }
        }
    }

    #[test]
    fn small_step_gain_tends_to_one() {
        let (l, s) = (c(-1.0, 0.4), c(0.5, 0.5));
        for scheme in [MsScheme::TRBDF2, MsScheme::It2] {
            let slope = (ms_gain(scheme, 1e-6, l, s, G).unwrap() - 1.0) / 1e-6;
            assert!((slope - (2.0 * l.re + s.norm_sqr())).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_noise_monte_carlo_is_exact() {
        let (mean, se) = ms_gain_mc(MsScheme::TRBDF2, 0.2, c(-1.0, 0.0), c(0.0, 0.0), G, 100, 1).unwrap();
        let g = amplification(c(-0.2, 0.0), G).unwrap().norm_sqr();
        assert!((mean - g).abs() < 1e-14 && se < 1e-14);
    }

    #[test]
    fn monte_carlo_agrees_at_moderate_sample_size() {
        let (l, s, h) = (c(-1.0, 0.0), c(1.0, 0.0), 0.5);
        for scheme in [MsScheme::TRBDF2, MsScheme::It2] {
            let exact = ms_gain(scheme, h, l, s, G).unwrap();
            let (mean, se) = ms_gain_mc(scheme, h, l, s, G, 40_000, 3).unwrap();
            assert!((mean - exact).abs() < 4.0 * se, "{scheme}: {mean} ± {se} vs {exact}");
        }
    }

    #[test]
    fn scheme_names() {
        assert_eq!("it2".parse::<MsScheme>().unwrap(), MsScheme::It2);
        assert_eq!("trbdf2-r3".parse::<MsScheme>().unwrap(), MsScheme::TrBdf2(Variant::R3));
        assert!("em".parse::<MsScheme>().is_err());
    }
}
