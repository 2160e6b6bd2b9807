//! Multi-indices over `{0, …, m}` and the hierarchical / remainder sets built from them.
//!
//! Letter `0` stands for integration against time, letter `j ≥ 1` for the `j`-th Wiener
//! process. The empty word `v` is the unit of the algebra.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A finite word `(j1, …, jl)`. Ordered lexicographically, so sets and maps keyed by
/// multi-indices iterate deterministically.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(SmallVec<[u8; 4]>);

/// A set of multi-indices with deterministic iteration order.
pub type IndexSet = BTreeSet<MultiIndex>;

impl MultiIndex {
    /// The empty index `v`.
    pub fn empty() -> Self {
        Self(SmallVec::new())
    }

    pub fn new(letters: &[u8]) -> Self {
        Self(SmallVec::from_slice(letters))
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    /// `l(α)`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `n(α)`: number of zero letters.
    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|&&j| j == 0).count()
    }

    /// True when every letter is 0, i.e. `I_α` is deterministic (includes `v`).
    pub fn is_deterministic(&self) -> bool {
        self.zeros() == self.len()
    }

    pub fn first(&self) -> Option<u8> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }

    pub fn max_letter(&self) -> u8 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// `⁻α`: drops the first letter. `v` maps to `v`.
    pub fn drop_first(&self) -> Self {
        Self(self.0.iter().skip(1).copied().collect())
    }

    /// `α⁻`: drops the last letter. `v` maps to `v`.
    pub fn drop_last(&self) -> Self {
        let mut w = self.0.clone();
        w.pop();
        Self(w)
    }

    /// `(j, α)`.
    pub fn prepend(&self, j: u8) -> Self {
        let mut w = SmallVec::with_capacity(self.len() + 1);
        w.push(j);
        w.extend_from_slice(&self.0);
        Self(w)
    }

    /// `(α, j)`.
    pub fn append(&self, j: u8) -> Self {
        let mut w = self.0.clone();
        w.push(j);
        Self(w)
    }

    /// Distinct nonzero letters, ascending.
    pub fn noises(&self) -> Vec<u8> {
        let set: BTreeSet<u8> = self.0.iter().copied().filter(|&j| j != 0).collect();
        set.into_iter().collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidIndex {
            index: s.to_string(),
            reason: "expected a form like (1,0,1) or ()".into(),
        };
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        if inner.trim().is_empty() {
            return Ok(Self::empty());
        }
        inner
            .split(',')
            .map(|t| t.trim().parse::<u8>().map_err(|_| bad()))
            .collect::<Result<SmallVec<_>>>()
            .map(Self)
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[macro_export]
macro_rules! mi {
    () => { $crate::multiindex::MultiIndex::empty() };
    ($($j:expr),+ $(,)?) => { $crate::multiindex::MultiIndex::new(&[$($j),+]) };
}

fn twice_order(p: f64) -> Result<usize> {
    let twice = 2.0 * p;
    if !(twice.is_finite() && twice >= 1.0 && twice.fract() == 0.0) {
        return Err(Error::InvalidOrder(p));
    }
    Ok(twice as usize)
}

/// `A_p = {α : l(α)+n(α) ≤ 2p  or  l(α) = n(α) = p + ½} ∪ {v}` over the alphabet `{0,…,m}`.
pub fn hierarchical_set(p: f64, m: usize) -> Result<IndexSet> {
    let twice_p = twice_order(p)?;
    if m == 0 || m > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!("noise count m = {m}")));
    }
    // l = n = p + 1/2 only has solutions when 2p is odd.
    let all_zero_len = (twice_p % 2 == 1).then_some(twice_p.div_ceil(2));
    let mut out = IndexSet::new();
    let mut frontier = vec![MultiIndex::empty()];
    while let Some(word) = frontier.pop() {
        for j in 0..=m as u8 {
            let next = word.append(j);
            let weight = next.len() + next.zeros();
            let keep_sum = weight <= twice_p;
            let keep_zero = all_zero_len == Some(next.len()) && next.is_deterministic();
            let may_grow = next.len() < twice_p.max(all_zero_len.unwrap_or(0));
            if keep_sum || keep_zero {
                out.insert(next.clone());
            }
            if may_grow {
                frontier.push(next);
            }
        }
    }
    out.insert(MultiIndex::empty());
    Ok(out)
}

/// `A_2` for `m` noises: the index set of every order-2 scheme in this crate.
pub fn order_two_set(m: usize) -> IndexSet {
    hierarchical_set(2.0, m).expect("valid order")
}

/// Checks the hierarchical-set axioms; returns the first violation.
pub fn check_hierarchical(set: &IndexSet, m: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::NotHierarchical("empty set".into()));
    }
    for alpha in set {
        if alpha.max_letter() as usize > m {
            return Err(Error::NotHierarchical(format!(
                "{alpha} uses a letter above m = {m}"
            )));
        }
        if !alpha.is_empty() && !set.contains(&alpha.drop_first()) {
            return Err(Error::NotHierarchical(format!(
                "{alpha} present but {} missing",
                alpha.drop_first()
            )));
        }
    }
    Ok(())
}

/// `B(A) = {α ∉ A : ⁻α ∈ A}`.
pub fn remainder_set(set: &IndexSet, m: usize) -> Result<IndexSet> {
    check_hierarchical(set, m)?;
    let mut out = IndexSet::new();
    for beta in set {
        for j in 0..=m as u8 {
            let alpha = beta.prepend(j);
            if !set.contains(&alpha) {
                out.insert(alpha);
            }
        }
    }
    Ok(out)
}

/// Mean-square exponent of the summed remainder contribution of `α`:
/// `2l−2` when all letters are zero, `l+n−1` otherwise.
pub fn phi(alpha: &MultiIndex) -> Result<usize> {
    let l = alpha.len();
    if l == 0 {
        return Err(Error::EmptyMultiIndex);
    }
    let n = alpha.zeros();
    Ok(if l == n { 2 * l - 2 } else { l + n - 1 })
}
