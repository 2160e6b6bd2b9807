//! Multiple Itô integrals on one sub-interval: joint sampling, exact second moments and the
//! closed forms available for a single noise.
//!
//! For one noise `j` every entry of `A_2` is a function of three path functionals:
//! `ΔW`, `ΔZ = ∫W ds` and `Q = ∫W² ds`:
//!
//! ```text
//! I(j,j)     = (ΔW² − δ)/2            I(0,j)   = δΔW − ΔZ
//! I(j,j,j)   = (ΔW³ − 3δΔW)/6          I(j,j,0) = Q/2 − δ²/4
//! I(j,j,j,j) = (ΔW⁴ − 6δΔW² + 3δ²)/24  I(j,0,j) = ΔZ·ΔW − Q
//! I(0,j,j)   = δ·I(j,j) − I(j,0,j) − I(j,j,0)
//! ```
//!
//! `Q` is drawn from the sine expansion of the Brownian bridge `W_s − (s/δ)ΔW`, truncated
//! after `p` terms. The Gaussian part of the tail is sampled exactly, so `ΔZ` keeps its
//! exact law; only the quadratic tail of `Q` is replaced by its mean.
//!
//! Words mixing two or more noises have no such reduction. They are approximated by
//! left-point sums on `p` sub-steps of a bridge pinned to the exact `ΔW`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiindex::{order_two_set, IndexSet, MultiIndex};
use crate::rng::RngStream;
use crate::scalar::Real;

/// How many bridge terms to use for a sub-interval of length `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Truncation {
    /// `p = ceil(K/δ)`.
    InverseDelta(f64),
    /// `p = ceil(K/√δ)`.
    InverseSqrtDelta(f64),
    Fixed(usize),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::InverseSqrtDelta(1.0)
    }
}

impl Truncation {
    pub fn terms(&self, delta: f64) -> usize {
        let p = match *self {
            Truncation::InverseDelta(k) => (k / delta).ceil(),
            Truncation::InverseSqrtDelta(k) => (k / delta.sqrt()).ceil(),
            Truncation::Fixed(p) => return p,
        };
        if p.is_finite() {
            (p as usize).max(1)
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EntryKind {
    Unit,
    Time(usize),
    W(usize),
    Z(usize),
    TimeW(usize),
    WW(usize),
    WWW(usize),
    WWWW(usize),
    WZeroW(usize),
    WWZero(usize),
    ZeroWW(usize),
    Mixed(usize),
}

impl EntryKind {
    fn classify(alpha: &MultiIndex) -> Self {
        if alpha.is_empty() {
            return EntryKind::Unit;
        }
        if alpha.is_deterministic() {
            return EntryKind::Time(alpha.len());
        }
        let noises = alpha.noises();
        if noises.len() > 1 {
            return EntryKind::Mixed(usize::MAX);
        }
        let j = noises[0];
        let pattern: Vec<u8> = alpha.letters().iter().map(|&x| u8::from(x == j)).collect();
        let j = j as usize - 1;
        match pattern.as_slice() {
            [1] => EntryKind::W(j),
            [1, 0] => EntryKind::Z(j),
            [0, 1] => EntryKind::TimeW(j),
            [1, 1] => EntryKind::WW(j),
            [1, 1, 1] => EntryKind::WWW(j),
            [1, 1, 1, 1] => EntryKind::WWWW(j),
            [1, 0, 1] => EntryKind::WZeroW(j),
            [1, 1, 0] => EntryKind::WWZero(j),
            [0, 1, 1] => EntryKind::ZeroWW(j),
            _ => EntryKind::Mixed(usize::MAX),
        }
    }

    fn needs_area(self) -> bool {
        matches!(
            self,
            EntryKind::WZeroW(_) | EntryKind::WWZero(_) | EntryKind::ZeroWW(_) | EntryKind::Mixed(_)
        )
    }
}

/// Node of the fine-grid recursion used for mixed words.
#[derive(Debug, Clone)]
struct FineNode {
    parent: Option<usize>,
    letter: u8,
}

/// The fixed, ordered list of integrals a sampler produces.
#[derive(Debug, Clone)]
pub struct IntegralLayout {
    m: usize,
    indices: Vec<MultiIndex>,
    kinds: Vec<EntryKind>,
    needs_area: Vec<bool>,
    fine_nodes: Vec<FineNode>,
    fine_noises: Vec<bool>,
}

impl IntegralLayout {
    /// Builds a layout for the requested indices, which must lie in `A_2` for `m` noises.
    pub fn new<'a>(m: usize, required: impl IntoIterator<Item = &'a MultiIndex>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("noise count must be positive".into()));
        }
        let a2 = order_two_set(m);
        let mut indices: Vec<MultiIndex> = Vec::new();
        for alpha in required {
            if !a2.contains(alpha) {
                return Err(Error::InvalidIndex {
                    index: alpha.to_string(),
                    reason: format!("not in A_2 for m = {m}"),
                });
            }
            indices.push(alpha.clone());
        }
        indices.sort();
        indices.dedup();

        let mut kinds: Vec<EntryKind> = indices.iter().map(EntryKind::classify).collect();
        let mut needs_area = vec![false; m];
        let mut fine_noises = vec![false; m];
        let mut fine_nodes: Vec<FineNode> = Vec::new();
        let mut node_of: HashMap<MultiIndex, usize> = HashMap::new();

        for (alpha, kind) in indices.iter().zip(kinds.iter_mut()) {
            if kind.needs_area() {
                for j in alpha.noises() {
                    needs_area[j as usize - 1] = true;
                }
            }
            if let EntryKind::Mixed(_) = kind {
                for j in alpha.noises() {
                    fine_noises[j as usize - 1] = true;
                }
                let mut parent = None;
                for len in 1..=alpha.len() {
                    let prefix = MultiIndex::new(&alpha.letters()[..len]);
                    let id = match node_of.get(&prefix) {
                        Some(&id) => id,
                        None => {
                            fine_nodes.push(FineNode {
                                parent,
                                letter: prefix.last().expect("non-empty prefix"),
                            });
                            node_of.insert(prefix, fine_nodes.len() - 1);
                            fine_nodes.len() - 1
                        }
                    };
                    parent = Some(id);
                }
                *kind = EntryKind::Mixed(parent.expect("mixed word is non-empty"));
            }
        }

        Ok(Self {
            m,
            indices,
            kinds,
            needs_area,
            fine_nodes,
            fine_noises,
        })
    }

    /// Every index of `A_2` (including `v`) for `m` noises.
    pub fn full(m: usize) -> Result<Self> {
        Self::new(m, order_two_set(m).iter())
    }

    /// The stochastic part of `A_2`, dropping words the predicate reports as identically
    /// multiplied by zero. Deterministic entries are always kept.
    pub fn order_two_filtered(m: usize, is_zero: impl Fn(&MultiIndex) -> bool) -> Result<Self> {
        let set: IndexSet = order_two_set(m)
            .into_iter()
            .filter(|a| !a.is_empty() && (a.is_deterministic() || !is_zero(a)))
            .collect();
        Self::new(m, set.iter())
    }

    pub fn noises(&self) -> usize {
        self.m
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(alpha).ok()
    }

    /// True when some entry is produced by truncation rather than exactly.
    pub fn has_approximate_entries(&self) -> bool {
        self.needs_area.iter().any(|&b| b)
    }
}

/// One joint draw of the requested multiple integrals over an interval of length `delta`.
#[derive(Debug, Clone)]
pub struct SegmentIntegrals<T> {
    pub delta: T,
    /// `ΔW^j`, one per noise.
    pub dw: Vec<T>,
    /// `I_(j,0)`, one per noise.
    pub dz: Vec<T>,
    layout: Arc<IntegralLayout>,
    values: Vec<T>,
}

#[derive(Serialize)]
struct SegmentDump {
    delta: f64,
    entries: std::collections::BTreeMap<String, f64>,
}

impl<T: Real> SegmentIntegrals<T> {
    fn blank(layout: Arc<IntegralLayout>, delta: T) -> Self {
        let m = layout.m;
        let n = layout.len();
        Self {
            delta,
            dw: vec![T::zero(); m],
            dz: vec![T::zero(); m],
            layout,
            values: vec![T::zero(); n],
        }
    }

    /// Builds a segment from given per-noise `(ΔW, ΔZ, Q)` values; mixed words are set to zero.
    /// Used to replay fixed draws through the schemes.
    pub fn from_functionals(
        layout: Arc<IntegralLayout>,
        delta: T,
        dw: &[T],
        dz: &[T],
        q: &[T],
    ) -> Result<Self> {
        let m = layout.m;
        if dw.len() != m || dz.len() != m || q.len() != m {
            return Err(Error::Dimension(format!("expected {m} per-noise values")));
        }
        let mut seg = Self::blank(layout, delta);
        seg.dw.copy_from_slice(dw);
        seg.dz.copy_from_slice(dz);
        seg.fill_entries(q);
        Ok(seg)
    }

    /// Segment whose stochastic entries are all zero and deterministic entries exact.
    pub fn deterministic(layout: Arc<IntegralLayout>, delta: T) -> Self {
        let m = layout.m;
        let zeros = vec![T::zero(); m];
        let q = vec![T::zero(); m];
        let mut seg = Self::blank(layout, delta);
        seg.fill_entries(&q);
        // the Q-based entries above pick up -δ²/4 offsets; zero every stochastic entry
        for (v, alpha) in seg.values.iter_mut().zip(seg.layout.indices.iter()) {
            if !alpha.is_deterministic() {
                *v = T::zero();
            }
        }
        seg.dw.copy_from_slice(&zeros);
        seg
    }

    pub fn layout(&self) -> &Arc<IntegralLayout> {
        &self.layout
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<T> {
        self.layout.position(alpha).map(|i| self.values[i])
    }

    /// Value at a layout position.
    #[inline]
    pub fn at(&self, pos: usize) -> T {
        self.values[pos]
    }

    pub fn require(&self, alpha: &MultiIndex) -> Result<T> {
        self.get(alpha)
            .ok_or_else(|| Error::MissingIntegral(alpha.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, T)> {
        self.layout.indices.iter().zip(self.values.iter().copied())
    }

    /// Debug dump `{"delta": …, "entries": {"(1)": …, …}}`.
    pub fn to_json(&self) -> Result<String> {
        let dump = SegmentDump {
            delta: self.delta.to_f64_lossy(),
            entries: self
                .entries()
                .map(|(a, v)| (a.to_string(), v.to_f64_lossy()))
                .collect(),
        };
        Ok(serde_json::to_string(&dump)?)
    }

    fn fill_entries(&mut self, q: &[T]) {
        let d = self.delta;
        let half = T::lit(0.5);
        for (i, kind) in self.layout.kinds.iter().enumerate() {
            self.values[i] = match *kind {
                EntryKind::Unit => T::one(),
                EntryKind::Time(k) => time_integral(d, k),
                EntryKind::W(j) => self.dw[j],
                EntryKind::Z(j) => self.dz[j],
                EntryKind::TimeW(j) => d * self.dw[j] - self.dz[j],
                EntryKind::WW(j) => hermite2(self.dw[j], d),
                EntryKind::WWW(j) => hermite3(self.dw[j], d),
                EntryKind::WWWW(j) => hermite4(self.dw[j], d),
                EntryKind::WWZero(j) => half * q[j] - d * d * T::lit(0.25),
                EntryKind::WZeroW(j) => self.dz[j] * self.dw[j] - q[j],
                EntryKind::ZeroWW(j) => {
                    let ww = hermite2(self.dw[j], d);
                    let wzw = self.dz[j] * self.dw[j] - q[j];
                    let wwz = half * q[j] - d * d * T::lit(0.25);
                    d * ww - wzw - wwz
                }
                EntryKind::Mixed(_) => T::zero(),
            };
        }
    }
}

fn time_integral<T: Real>(delta: T, k: usize) -> T {
    let mut v = T::one();
    for i in 1..=k {
        v = v * delta / T::from_usize_lossy(i);
    }
    v
}

fn hermite2<T: Real>(w: T, d: T) -> T {
    (w * w - d) * T::lit(0.5)
}

fn hermite3<T: Real>(w: T, d: T) -> T {
    (w * w * w - T::lit(3.0) * d * w) / T::lit(6.0)
}

fn hermite4<T: Real>(w: T, d: T) -> T {
    let w2 = w * w;
    (w2 * w2 - T::lit(6.0) * d * w2 + T::lit(3.0) * d * d) / T::lit(24.0)
}

/// Coefficients of the truncated bridge expansion for a fixed `(δ, p)`.
#[derive(Debug, Clone)]
struct BridgeCoefficients<T> {
    terms: usize,
    /// weight of ξ_k in ∫B ds (odd k only)
    g_mean: Vec<T>,
    /// weight of ξ_k in ∫sB ds
    g_moment: Vec<T>,
    /// weight of ξ_k² in ∫B² ds
    g_square: Vec<T>,
    /// lower Cholesky factor of the Gaussian tail covariance of (∫B, ∫sB)
    tail_chol: [T; 3],
    /// mean of the dropped part of ∫B² ds
    square_tail_mean: T,
}

impl<T: Real> BridgeCoefficients<T> {
    fn new(delta: f64, terms: usize) -> Self {
        let pi2 = PI * PI;
        let pi4 = pi2 * pi2;
        let mut g_mean = Vec::with_capacity(terms);
        let mut g_moment = Vec::with_capacity(terms);
        let mut g_square = Vec::with_capacity(terms);
        let mut head4 = 0.0;
        let mut head4_odd = 0.0;
        let mut head2 = 0.0;
        // summed smallest-first further down for accuracy of the tails
        for k in 1..=terms {
            let kf = k as f64;
            let k2 = kf * kf;
            let odd = k % 2 == 1;
            g_mean.push(T::lit(if odd {
                2.0 * 2f64.sqrt() * delta.powf(1.5) / (k2 * pi2)
            } else {
                0.0
            }));
            let sign = if odd { 1.0 } else { -1.0 };
            g_moment.push(T::lit(sign * 2f64.sqrt() * delta.powf(2.5) / (k2 * pi2)));
            g_square.push(T::lit(delta * delta / (k2 * pi2)));
        }
        for k in (1..=terms).rev() {
            let k2 = (k as f64) * (k as f64);
            head2 += 1.0 / k2;
            head4 += 1.0 / (k2 * k2);
            if k % 2 == 1 {
                head4_odd += 1.0 / (k2 * k2);
            }
        }
        let tail4 = (pi4 / 90.0 - head4).max(0.0);
        let tail4_odd = (pi4 / 96.0 - head4_odd).max(0.0);
        let tail2 = (pi2 / 6.0 - head2).max(0.0);

        let var_mean = 8.0 * delta.powi(3) / pi4 * tail4_odd;
        let var_moment = 2.0 * delta.powi(5) / pi4 * tail4;
        let cov = 4.0 * delta.powi(4) / pi4 * tail4_odd;
        let l11 = var_mean.sqrt();
        let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
        let l22 = (var_moment - l21 * l21).max(0.0).sqrt();

        Self {
            terms,
            g_mean,
            g_moment,
            g_square,
            tail_chol: [T::lit(l11), T::lit(l21), T::lit(l22)],
            square_tail_mean: T::lit(delta * delta / pi2 * tail2),
        }
    }

    /// Returns `(∫B ds, ∫sB ds, ∫B² ds)`.
    fn draw(&self, stream: &mut RngStream) -> (T, T, T) {
        let mut mean = T::zero();
        let mut moment = T::zero();
        let mut square = self.square_tail_mean;
        for k in 0..self.terms {
            let xi: T = stream.normal();
            mean += self.g_mean[k] * xi;
            moment += self.g_moment[k] * xi;
            square += self.g_square[k] * xi * xi;
        }
        let (z1, z2): (T, T) = (stream.normal(), stream.normal());
        let [l11, l21, l22] = self.tail_chol;
        (mean + l11 * z1, moment + l21 * z1 + l22 * z2, square)
    }
}

/// Reusable sampler for one layout and one interval length.
#[derive(Debug, Clone)]
pub struct SegmentSampler<T> {
    layout: Arc<IntegralLayout>,
    delta: T,
    sqrt_delta: T,
    bridge: Option<BridgeCoefficients<T>>,
    q: Vec<T>,
    fine: Vec<T>,
    fine_inc: Vec<Vec<T>>,
}

impl<T: Real> SegmentSampler<T> {
    pub fn new(layout: Arc<IntegralLayout>, delta: T, p_trunc: usize) -> Result<Self> {
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("segment length {delta}")));
        }
        let bridge = if layout.has_approximate_entries() {
            if p_trunc == 0 {
                return Err(Error::InvalidTruncation);
            }
            Some(BridgeCoefficients::new(delta.to_f64_lossy(), p_trunc))
        } else {
            None
        };
        let m = layout.m;
        let nodes = layout.fine_nodes.len();
        Ok(Self {
            delta,
            sqrt_delta: delta.sqrt(),
            bridge,
            q: vec![T::zero(); m],
            fine: vec![T::zero(); nodes],
            fine_inc: vec![Vec::new(); m + 1],
            layout,
        })
    }

    pub fn layout(&self) -> &Arc<IntegralLayout> {
        &self.layout
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn truncation_terms(&self) -> usize {
        self.bridge.as_ref().map_or(0, |b| b.terms)
    }

    pub fn blank(&self) -> SegmentIntegrals<T> {
        SegmentIntegrals::blank(self.layout.clone(), self.delta)
    }

    pub fn sample(&mut self, stream: &mut RngStream) -> SegmentIntegrals<T> {
        let mut out = self.blank();
        self.sample_into(stream, &mut out);
        out
    }

    /// Overwrites `out` with a fresh joint draw. `out` must come from this sampler.
    pub fn sample_into(&mut self, stream: &mut RngStream, out: &mut SegmentIntegrals<T>) {
        debug_assert!(Arc::ptr_eq(&out.layout, &self.layout));
        let d = self.delta;
        let half = T::lit(0.5);
        let third = T::one() / T::lit(3.0);
        let inv_sqrt12 = T::one() / T::lit(12.0).sqrt();
        out.delta = d;
        for j in 0..self.layout.m {
            let w = self.sqrt_delta * stream.normal::<T>();
            out.dw[j] = w;
            match (&self.bridge, self.layout.needs_area[j]) {
                (Some(bridge), true) => {
                    let (area, moment, square) = bridge.draw(stream);
                    out.dz[j] = half * d * w + area;
                    self.q[j] = w * w * d * third + T::lit(2.0) * w * moment / d + square;
                }
                _ => {
                    let zeta: T = stream.normal();
                    out.dz[j] = half * d * w + d * self.sqrt_delta * inv_sqrt12 * zeta;
                    self.q[j] = T::zero();
                }
            }
        }
        out.fill_entries(&self.q);
        if !self.layout.fine_nodes.is_empty() {
            self.fill_mixed(stream, out);
        }
    }

    fn fill_mixed(&mut self, stream: &mut RngStream, out: &mut SegmentIntegrals<T>) {
        let steps = self.bridge.as_ref().map_or(1, |b| b.terms);
        let n = T::from_usize_lossy(steps);
        let dt = self.delta / n;
        let sd = dt.sqrt();
        for j in 0..self.layout.m {
            if !self.layout.fine_noises[j] {
                continue;
            }
            let inc = &mut self.fine_inc[j + 1];
            inc.clear();
            let mut total = T::zero();
            for _ in 0..steps {
                let x = sd * stream.normal::<T>();
                total += x;
                inc.push(x);
            }
            let shift = (out.dw[j] - total) / n;
            for x in inc.iter_mut() {
                *x += shift;
            }
        }
        self.fine.iter_mut().for_each(|v| *v = T::zero());
        let nodes = &self.layout.fine_nodes;
        for s in 0..steps {
            // deeper nodes first so each update reads its parent's left-point value
            for id in (0..nodes.len()).rev() {
                let node = &nodes[id];
                let increment = if node.letter == 0 {
                    dt
                } else {
                    self.fine_inc[node.letter as usize][s]
                };
                let parent = node.parent.map_or(T::one(), |p| self.fine[p]);
                self.fine[id] += parent * increment;
            }
        }
        for (i, kind) in self.layout.kinds.iter().enumerate() {
            if let EntryKind::Mixed(node) = *kind {
                out.values[i] = self.fine[node];
            }
        }
    }
}

/// One joint draw of the integrals in `required` over an interval of length `delta`.
pub fn sample_segment<T: Real>(
    delta: T,
    m: usize,
    required: &IndexSet,
    p_trunc: usize,
    stream: &mut RngStream,
) -> Result<SegmentIntegrals<T>> {
    let layout = Arc::new(IntegralLayout::new(m, required.iter())?);
    let mut sampler = SegmentSampler::new(layout, delta, p_trunc)?;
    Ok(sampler.sample(stream))
}

/// Exact value of `I_α` in terms of `(ΔW, ΔZ, δ)` for a single noise, when one exists.
pub fn closed_form_m1<T: Real>(alpha: &MultiIndex, dw: T, dz: T, delta: T) -> Result<Option<T>> {
    if !order_two_set(1).contains(alpha) {
        return Err(Error::InvalidIndex {
            index: alpha.to_string(),
            reason: "not in A_2 for m = 1".into(),
        });
    }
    Ok(match EntryKind::classify(alpha) {
        EntryKind::Unit => Some(T::one()),
        EntryKind::Time(k) => Some(time_integral(delta, k)),
        EntryKind::W(_) => Some(dw),
        EntryKind::Z(_) => Some(dz),
        EntryKind::TimeW(_) => Some(delta * dw - dz),
        EntryKind::WW(_) => Some(hermite2(dw, delta)),
        EntryKind::WWW(_) => Some(hermite3(dw, delta)),
        EntryKind::WWWW(_) => Some(hermite4(dw, delta)),
        _ => None,
    })
}

/// `E[I_α(t) I_β(t)]` as an exact polynomial in `t` (coefficient `k` multiplies `t^k`).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPoly {
    coeffs: Vec<Rational64>,
}

impl MomentPoly {
    fn constant(c: Rational64) -> Self {
        Self { coeffs: vec![c] }
    }

    fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    fn add_assign(&mut self, other: &Self) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), Rational64::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    fn integrate(&self) -> Self {
        let mut coeffs = vec![Rational64::zero()];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c / Rational64::from_integer(k as i64 + 1));
        }
        let mut out = Self { coeffs };
        out.trim();
        out
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn coefficients(&self) -> &[Rational64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval<T: Real>(&self, t: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| {
            acc * t + T::lit(c.to_f64().expect("finite rational"))
        })
    }
}

fn moment_rec(a: &MultiIndex, b: &MultiIndex, memo: &mut HashMap<(MultiIndex, MultiIndex), MomentPoly>) -> MomentPoly {
    if a.is_empty() && b.is_empty() {
        return MomentPoly::constant(Rational64::one());
    }
    let key = if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    };
    if let Some(p) = memo.get(&key) {
        return p.clone();
    }
    let mut rate = MomentPoly::zero();
    if a.last() == Some(0) {
        rate.add_assign(&moment_rec(&a.drop_last(), b, memo));
    }
    if b.last() == Some(0) {
        rate.add_assign(&moment_rec(a, &b.drop_last(), memo));
    }
    if let (Some(ja), Some(jb)) = (a.last(), b.last()) {
        if ja == jb && ja != 0 {
            rate.add_assign(&moment_rec(&a.drop_last(), &b.drop_last(), memo));
        }
    }
    let out = rate.integrate();
    memo.insert(key, out.clone());
    out
}

/// Exact `E[I_α I_β]` on an interval starting at the origin, as a polynomial in its length.
pub fn pair_moment_poly(alpha: &MultiIndex, beta: &MultiIndex) -> MomentPoly {
    moment_rec(alpha, beta, &mut HashMap::new())
}

/// `E[I_{α,0,δ} I_{β,0,δ}]`.
pub fn pair_moment<T: Real>(alpha: &MultiIndex, beta: &MultiIndex, delta: T) -> T {
    pair_moment_poly(alpha, beta).eval(delta)
}

/// Pair moments for every pair of a fixed index list, evaluated on demand.
#[derive(Debug, Clone)]
pub struct MomentTable {
    indices: Vec<MultiIndex>,
    polys: Vec<MomentPoly>,
}

impl MomentTable {
    pub fn new(indices: &[MultiIndex]) -> Self {
        let mut memo = HashMap::new();
        let n = indices.len();
        let mut polys = Vec::with_capacity(n * n);
        for a in indices {
            for b in indices {
                polys.push(moment_rec(a, b, &mut memo));
            }
        }
        Self {
            indices: indices.to_vec(),
            polys,
        }
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn poly(&self, i: usize, j: usize) -> &MomentPoly {
        &self.polys[i * self.indices.len() + j]
    }

    /// Row-major matrix of moments at interval length `delta`.
    pub fn eval<T: Real>(&self, delta: T) -> Vec<T> {
        self.polys.iter().map(|p| p.eval(delta)).collect()
    }
}
