//! Probability distributions over the subset lattice `P([n])`.
//!
//! A subset of `[n] = {1, ..., n}` is stored as a bitmask where element `i`
//! lives at bit `i - 1`, so for `n = 2` the mask order is `∅, {1}, {2}, {1,2}`.
//! All information measures are in bits.

use std::fmt;
use std::ops::{AddAssign, SubAssign};

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Largest ground-set size supported by the dense representation.
pub const MAX_N: u32 = 20;

/// Tolerance for the sum-to-one check.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Entries in `[-NEGATIVE_SLACK, 0)` are treated as rounding noise and clamped to zero.
pub const NEGATIVE_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("ground-set size {0} exceeds the supported maximum of {MAX_N}")]
    TooLarge(u32),
    #[error("expected {expected} probabilities, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("negative mass {value} at mask {mask}")]
    NegativeMass { mask: usize, value: f64 },
    #[error("non-finite value at mask {mask}")]
    NonFinite { mask: usize },
    #[error("probabilities sum to {sum}, not 1")]
    BadSum { sum: f64 },
    #[error("element {element} is outside [1, {n}]")]
    IndexOutOfRange { element: u32, n: u32 },
    #[error("ground-set sizes differ ({left} vs {right})")]
    DimensionMismatch { left: u32, right: u32 },
}

/// A subset of `[n]` as a little-endian bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// Builds a mask from 1-based element labels.
    pub fn from_elements<I: IntoIterator<Item = u32>>(elements: I) -> Self {
        SubsetMask(elements.into_iter().fold(0, |acc, e| acc | (1 << (e - 1))))
    }

    /// The full set `[n]`.
    pub fn full(n: u32) -> Self {
        SubsetMask(((1u64 << n) - 1) as u32)
    }

    pub fn contains(self, element: u32) -> bool {
        (1..=32).contains(&element) && self.0 & (1 << (element - 1)) != 0
    }

    pub fn union(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn fits(self, n: u32) -> bool {
        (self.0 as u64) < (1u64 << n)
    }

    /// Elements in increasing order, 1-based.
    pub fn elements(self) -> impl Iterator<Item = u32> {
        (0..32).filter(move |b| self.0 & (1 << b) != 0).map(|b| b + 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, e) in self.elements().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// A real number or `+∞`.
///
/// Divergence and cross-entropy are infinite when `q` charges a set outside
/// the support of `p`. Serializes finite values as JSON numbers and `+∞` as
/// the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    /// `+∞` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn plus(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }

    pub fn sub_finite(self, rhs: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(a) => ExtendedReal::Finite(a - rhs),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }

    /// Total order with `+∞` above every finite value.
    pub fn total_cmp(&self, other: &ExtendedReal) -> std::cmp::Ordering {
        self.to_f64().total_cmp(&other.to_f64())
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(v)
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => serializer.serialize_f64(*v),
            ExtendedReal::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(ExtendedReal::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(ExtendedReal::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct RawDistribution {
    n: u32,
    probs: Vec<f64>,
}

/// Dense probability vector over all `2^n` subsets of `[n]`, indexed by mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct SetDistribution {
    n: u32,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for SetDistribution {
    type Error = DistError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        make_distribution(raw.n, raw.probs)
    }
}

/// Validates `probs` as a distribution over `P([n])`. Never renormalizes.
pub fn make_distribution(n: u32, mut probs: Vec<f64>) -> Result<SetDistribution, DistError> {
    if n > MAX_N {
        return Err(DistError::TooLarge(n));
    }
    let expected = 1usize << n;
    if probs.len() != expected {
        return Err(DistError::BadLength {
            expected,
            got: probs.len(),
        });
    }
    for (mask, v) in probs.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(DistError::NonFinite { mask });
        }
        if *v < -NEGATIVE_SLACK {
            return Err(DistError::NegativeMass { mask, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(DistError::BadSum { sum });
    }
    Ok(SetDistribution { n, probs })
}

impl SetDistribution {
    /// Wraps a vector already known to be a distribution up to rounding.
    pub(crate) fn from_parts_unchecked(n: u32, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), 1 << n);
        debug_assert!(probs.iter().all(|&v| v >= 0.0));
        SetDistribution { n, probs }
    }

    /// Point mass on `set`.
    pub fn point_mass(n: u32, set: SubsetMask) -> Result<Self, DistError> {
        if n > MAX_N {
            return Err(DistError::TooLarge(n));
        }
        let mut probs = vec![0.0; 1 << n];
        let slot = probs.get_mut(set.index()).ok_or(DistError::BadLength {
            expected: 1 << n,
            got: set.index() + 1,
        })?;
        *slot = 1.0;
        Ok(SetDistribution { n, probs })
    }

    /// Uniform distribution over all `2^n` subsets.
    pub fn uniform(n: u32) -> Result<Self, DistError> {
        if n > MAX_N {
            return Err(DistError::TooLarge(n));
        }
        let len = 1usize << n;
        Ok(SetDistribution {
            n,
            probs: vec![1.0 / len as f64; len],
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn prob(&self, set: SubsetMask) -> f64 {
        self.probs.get(set.index()).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = SubsetMask> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(m, _)| SubsetMask(m as u32))
    }

    /// Probability that a sample contains `element` (1-based).
    pub fn marginal(&self, element: u32) -> Result<f64, DistError> {
        if element == 0 || element > self.n {
            return Err(DistError::IndexOutOfRange { element, n: self.n });
        }
        let bit = 1usize << (element - 1);
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|(m, _)| m & bit != 0)
            .map(|(_, v)| v)
            .sum())
    }

    /// All `n` marginals in element order.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n as usize];
        for (m, &v) in self.probs.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (i, slot) in out.iter_mut().enumerate() {
                if m & (1 << i) != 0 {
                    *slot += v;
                }
            }
        }
        out
    }

    /// Shannon entropy in bits, with `0 log(1/0) = 0`.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
    }

    /// Relabels the ground set: element `i` of `self` becomes element `perm[i-1]`.
    pub fn relabel(&self, perm: &[u32]) -> Result<SetDistribution, DistError> {
        if perm.len() != self.n as usize {
            return Err(DistError::DimensionMismatch {
                left: self.n,
                right: perm.len() as u32,
            });
        }
        let mut probs = vec![0.0; self.probs.len()];
        for (m, &v) in self.probs.iter().enumerate() {
            let image = SubsetMask(m as u32)
                .elements()
                .fold(0usize, |acc, e| acc | (1 << (perm[(e - 1) as usize] - 1)));
            probs[image] += v;
        }
        Ok(SetDistribution { n: self.n, probs })
    }
}

fn same_n(a: &SetDistribution, b: &SetDistribution) -> Result<(), DistError> {
    if a.n != b.n {
        return Err(DistError::DimensionMismatch { left: a.n, right: b.n });
    }
    Ok(())
}

pub fn marginal(p: &SetDistribution, element: u32) -> Result<f64, DistError> {
    p.marginal(element)
}

pub fn entropy(p: &SetDistribution) -> f64 {
    p.entropy()
}

/// `D(q || p)` in bits; `+∞` if `q` charges a set `p` does not.
pub fn kl_divergence(q: &SetDistribution, p: &SetDistribution) -> Result<ExtendedReal, DistError> {
    same_n(q, p)?;
    let mut acc = 0.0;
    for (&qx, &px) in q.probs.iter().zip(&p.probs) {
        if qx == 0.0 {
            continue;
        }
        if px == 0.0 {
            return Ok(ExtendedReal::Infinite);
        }
        acc += qx * (qx / px).log2();
    }
    Ok(ExtendedReal::Finite(acc))
}

/// `Σ q_x log2(1/p_x)`; `+∞` if `q` charges a set `p` does not.
pub fn cross_entropy(q: &SetDistribution, p: &SetDistribution) -> Result<ExtendedReal, DistError> {
    same_n(q, p)?;
    let mut acc = 0.0;
    for (&qx, &px) in q.probs.iter().zip(&p.probs) {
        if qx == 0.0 {
            continue;
        }
        if px == 0.0 {
            return Ok(ExtendedReal::Infinite);
        }
        acc -= qx * px.log2();
    }
    Ok(ExtendedReal::Finite(acc))
}

/// In-place subset-sum (zeta) transform over any additive group.
pub(crate) fn zeta_in_place<T: Copy + AddAssign>(xs: &mut [T]) {
    debug_assert!(xs.len().is_power_of_two());
    let mut half = 1;
    while half < xs.len() {
        for block in xs.chunks_exact_mut(half * 2) {
            let (lo, hi) = block.split_at_mut(half);
            for (o, z) in hi.iter_mut().zip(lo.iter()) {
                *o += *z;
            }
        }
        half *= 2;
    }
}

/// In-place Möbius inversion, the exact inverse of [`zeta_in_place`].
pub(crate) fn mobius_in_place<T: Copy + SubAssign>(xs: &mut [T]) {
    debug_assert!(xs.len().is_power_of_two());
    let mut half = 1;
    while half < xs.len() {
        for block in xs.chunks_exact_mut(half * 2) {
            let (lo, hi) = block.split_at_mut(half);
            for (o, z) in hi.iter_mut().zip(lo.iter()) {
                *o -= *z;
            }
        }
        half *= 2;
    }
}

fn check_pow2(len: usize) -> Result<(), DistError> {
    if len == 0 || !len.is_power_of_two() || len > 1 << MAX_N {
        return Err(DistError::BadLength {
            expected: len.max(1).next_power_of_two(),
            got: len,
        });
    }
    Ok(())
}

/// `out[S] = Σ_{T ⊆ S} v[T]`.
pub fn zeta_transform(v: &[f64]) -> Result<Vec<f64>, DistError> {
    check_pow2(v.len())?;
    let mut out = v.to_vec();
    zeta_in_place(&mut out);
    Ok(out)
}

/// Inverse of [`zeta_transform`].
pub fn mobius_transform(v: &[f64]) -> Result<Vec<f64>, DistError> {
    check_pow2(v.len())?;
    let mut out = v.to_vec();
    mobius_in_place(&mut out);
    Ok(out)
}

/// Law of `A ∪ B` for independent `A ~ p`, `B ~ r`, via zeta transform,
/// pointwise product and Möbius inversion in `O(n 2^n)`.
///
/// Sets no pair of support points can reach are exactly zero in the output;
/// this is decided by an exact integer convolution of the support indicators
/// when either input has zeros.
pub fn union_convolve(p: &SetDistribution, r: &SetDistribution) -> Result<SetDistribution, DistError> {
    same_n(p, r)?;
    let mut zp = p.probs.clone();
    let mut zr = r.probs.clone();
    zeta_in_place(&mut zp);
    zeta_in_place(&mut zr);
    for (a, b) in zp.iter_mut().zip(&zr) {
        *a *= *b;
    }
    mobius_in_place(&mut zp);

    let full_support = p.probs.iter().chain(&r.probs).all(|&v| v > 0.0);
    if full_support {
        for v in zp.iter_mut() {
            *v = v.max(0.0);
        }
    } else {
        let reach = union_support_counts(p, r);
        for (v, &c) in zp.iter_mut().zip(&reach) {
            *v = if c == 0 { 0.0 } else { v.max(0.0) };
        }
    }
    Ok(SetDistribution::from_parts_unchecked(p.n, zp))
}

/// Number of support pairs `(T, U)` with `T ∪ U = S`, computed exactly.
fn union_support_counts(p: &SetDistribution, r: &SetDistribution) -> Vec<i64> {
    let indicator = |d: &SetDistribution| -> Vec<i64> { d.probs.iter().map(|&v| i64::from(v > 0.0)).collect() };
    let mut a = indicator(p);
    let mut b = indicator(r);
    zeta_in_place(&mut a);
    zeta_in_place(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    mobius_in_place(&mut a);
    a
}

/// Reference `O(4^n)` accumulation over all pairs of subsets.
pub fn union_convolve_naive(p: &SetDistribution, r: &SetDistribution) -> Result<SetDistribution, DistError> {
    same_n(p, r)?;
    let mut q = vec![0.0; p.probs.len()];
    for (t, &pt) in p.probs.iter().enumerate() {
        if pt == 0.0 {
            continue;
        }
        for (u, &ru) in r.probs.iter().enumerate() {
            q[t | u] += pt * ru;
        }
    }
    Ok(SetDistribution::from_parts_unchecked(p.n, q))
}
