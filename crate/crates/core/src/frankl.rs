//! Union-closed families of subsets of `[n]` and small-scale checks of the
//! union-closed sets conjecture: every union-closed `F ≠ {∅}` has an element
//! in at least half of its members.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::setdist::{zeta_in_place, SubsetMask};

/// Largest ground set accepted by [`SetFamily`].
pub const MAX_FAMILY_N: u32 = 16;

/// Largest ground set for full enumeration of all `2^(2^n)` families.
pub const MAX_EXHAUSTIVE_N: u32 = 4;

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Frequency the conjecture promises.
pub const HALF: f64 = 0.5;

/// Frequency guaranteed by Gilmer's theorem.
pub const GILMER_BOUND: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FranklError {
    #[error("n = {n} is outside [{min}, {max}]")]
    OutOfRange { n: u32, min: u32, max: u32 },
    #[error("mask {mask} does not fit in n = {n}")]
    MaskTooLarge { mask: u32, n: u32 },
    #[error("mask {0} listed twice")]
    Duplicate(u32),
    #[error("family is empty")]
    EmptyFamily,
}

#[derive(Deserialize)]
struct RawFamily {
    n: u32,
    members: Vec<SubsetMask>,
}

/// A set of distinct subsets of `[n]`, kept in increasing mask order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFamily")]
pub struct SetFamily {
    n: u32,
    members: Vec<SubsetMask>,
}

impl TryFrom<RawFamily> for SetFamily {
    type Error = FranklError;

    fn try_from(raw: RawFamily) -> Result<Self, Self::Error> {
        SetFamily::new(raw.n, raw.members)
    }
}

impl SetFamily {
    pub fn new(n: u32, mut members: Vec<SubsetMask>) -> Result<Self, FranklError> {
        if !(1..=MAX_FAMILY_N).contains(&n) {
            return Err(FranklError::OutOfRange {
                n,
                min: 1,
                max: MAX_FAMILY_N,
            });
        }
        if let Some(m) = members.iter().find(|m| !m.fits(n)) {
            return Err(FranklError::MaskTooLarge { mask: m.0, n });
        }
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(FranklError::Duplicate(w[0].0));
        }
        Ok(SetFamily { n, members })
    }

    /// Family whose members are the set bits of `index` (bit `m` ⇔ mask `m`).
    fn from_index(n: u32, index: u64) -> Self {
        let members = (0..1u32 << n).filter(|m| index >> m & 1 == 1).map(SubsetMask).collect();
        SetFamily { n, members }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn members(&self) -> &[SubsetMask] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True for the single family the conjecture excludes.
    pub fn is_empty_set_only(&self) -> bool {
        self.members == [SubsetMask::EMPTY]
    }

    fn indicator(&self) -> Vec<bool> {
        let mut present = vec![false; 1 << self.n];
        for m in &self.members {
            present[m.index()] = true;
        }
        present
    }
}

/// Checks every pair of members.
pub fn is_union_closed(f: &SetFamily) -> bool {
    let present = f.indicator();
    f.members
        .iter()
        .enumerate()
        .all(|(k, a)| f.members[k + 1..].iter().all(|b| present[a.union(*b).index()]))
}

/// Smallest union-closed family containing `f`.
///
/// A nonempty `S` is a union of members iff the OR of all members below it
/// is `S` itself; that OR is a zeta transform over the `(|, 0)` monoid.
pub fn union_closure(f: &SetFamily) -> SetFamily {
    let mut below: Vec<OrMask> = vec![OrMask(0); 1 << f.n];
    for m in &f.members {
        below[m.index()] = OrMask(m.0);
    }
    zeta_in_place(&mut below);
    let has_empty = f.members.first() == Some(&SubsetMask::EMPTY);
    let mut members = Vec::new();
    if has_empty {
        members.push(SubsetMask::EMPTY);
    }
    members.extend(
        below
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(s, or)| or.0 as usize == *s)
            .map(|(s, _)| SubsetMask(s as u32)),
    );
    SetFamily { n: f.n, members }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OrMask(u32);

// the subset-sum "addition" for this monoid is bitwise OR
#[allow(clippy::suspicious_op_assign_impl)]
impl std::ops::AddAssign for OrMask {
    fn add_assign(&mut self, rhs: Self) {
        self.0 |= rhs.0;
    }
}

/// The most frequent element and the fraction of members containing it,
/// ties going to the smallest element.
pub fn max_frequency(f: &SetFamily) -> Result<(u32, f64), FranklError> {
    if f.is_empty() {
        return Err(FranklError::EmptyFamily);
    }
    let mut best = (1u32, 0usize);
    for element in 1..=f.n {
        let count = f.members.iter().filter(|m| m.contains(element)).count();
        if count > best.1 {
            best = (element, count);
        }
    }
    Ok((best.0, best.1 as f64 / f.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Exhaustive,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FranklReport {
    pub n: u32,
    pub mode: CheckMode,
    /// Candidate families enumerated, or generator sets drawn.
    pub candidates: u64,
    /// Union-closed families `≠ {∅}` whose frequency was checked.
    pub families_checked: u64,
    pub min_ratio: f64,
    pub min_ratio_family: Option<SetFamily>,
    /// Families whose best element is in fewer than half the members.
    pub violations: Vec<SetFamily>,
    /// Families whose best element is in fewer than 1% of the members.
    pub gilmer_violations: Vec<SetFamily>,
}

impl FranklReport {
    fn new(n: u32, mode: CheckMode) -> Self {
        FranklReport {
            n,
            mode,
            candidates: 0,
            families_checked: 0,
            min_ratio: f64::INFINITY,
            min_ratio_family: None,
            violations: Vec::new(),
            gilmer_violations: Vec::new(),
        }
    }

    fn record(&mut self, f: &SetFamily) {
        let (_, ratio) = max_frequency(f).expect("checked families are nonempty");
        self.families_checked += 1;
        if ratio < self.min_ratio {
            self.min_ratio = ratio;
            self.min_ratio_family = Some(f.clone());
        }
        if ratio < HALF {
            self.violations.push(f.clone());
        }
        if ratio < GILMER_BOUND {
            self.gilmer_violations.push(f.clone());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.gilmer_violations.is_empty()
    }
}

/// Enumerates every family of subsets of `[n]` for `n ≤ 4` and checks each
/// union-closed one other than `∅` and `{∅}`.
pub fn check_conjecture_exhaustive(n: u32) -> Result<FranklReport, FranklError> {
    if !(1..=MAX_EXHAUSTIVE_N).contains(&n) {
        return Err(FranklError::OutOfRange {
            n,
            min: 1,
            max: MAX_EXHAUSTIVE_N,
        });
    }
    let mut report = FranklReport::new(n, CheckMode::Exhaustive);
    let total = 1u64 << (1u32 << n);
    for index in 0..total {
        report.candidates += 1;
        let f = SetFamily::from_index(n, index);
        if f.is_empty() || f.is_empty_set_only() || !is_union_closed(&f) {
            continue;
        }
        report.record(&f);
    }
    Ok(report)
}

/// Checks the union closures of `samples` random generator sets.
///
/// Each sample draws a density `d`, a generator count in `1..=2n`, and
/// generators whose elements are included independently with probability `d`.
pub fn check_conjecture_sampled(n: u32, samples: usize, seed: u64) -> Result<FranklReport, FranklError> {
    if !(1..=MAX_FAMILY_N).contains(&n) {
        return Err(FranklError::OutOfRange {
            n,
            min: 1,
            max: MAX_FAMILY_N,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FranklReport::new(n, CheckMode::Sample);
    for _ in 0..samples {
        report.candidates += 1;
        let density: f64 = rng.gen();
        let count = rng.gen_range(1..=2 * n as usize);
        let mut generators: Vec<SubsetMask> = (0..count)
            .map(|_| SubsetMask((0..n).filter(|_| rng.gen_bool(density)).fold(0, |acc, b| acc | 1 << b)))
            .collect();
        generators.sort_unstable();
        generators.dedup();
        let f = union_closure(&SetFamily { n, members: generators });
        if f.is_empty_set_only() {
            continue;
        }
        report.record(&f);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(n: u32, sets: &[&[u32]]) -> SetFamily {
        SetFamily::new(
            n,
            sets.iter()
                .map(|s| SubsetMask::from_elements(s.iter().copied()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn union_closed_examples() {
        assert!(is_union_closed(&fam(2, &[&[1], &[1, 2]])));
        assert!(!is_union_closed(&fam(2, &[&[1], &[2]])));
        assert!(is_union_closed(&fam(2, &[&[]])));
    }

    #[test]
    fn closure_examples() {
        assert_eq!(union_closure(&fam(2, &[&[1], &[2]])), fam(2, &[&[1], &[2], &[1, 2]]));
        let closed = fam(3, &[&[], &[1], &[1, 2], &[1, 2, 3]]);
        assert_eq!(union_closure(&closed), closed);
        let all = union_closure(&fam(3, &[&[1], &[2], &[3]]));
        assert_eq!(all.members(), (1..8).map(SubsetMask).collect::<Vec<_>>());
        assert_eq!(union_closure(&fam(2, &[&[]])), fam(2, &[&[]]));
    }

    #[test]
    fn closure_matches_pairwise_fixpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let mut members: Vec<SubsetMask> = (0..rng.gen_range(0..6))
                .map(|_| SubsetMask(rng.gen_range(0..1 << n)))
                .collect();
            members.sort_unstable();
            members.dedup();
            let f = SetFamily::new(n, members).unwrap();
            let mut naive = f.members().to_vec();
            loop {
                let mut grew = false;
                for a in naive.clone() {
                    for b in naive.clone() {
                        if !naive.contains(&a.union(b)) {
                            naive.push(a.union(b));
                            grew = true;
                        }
                    }
                }
                if !grew {
                    break;
                }
            }
            assert_eq!(union_closure(&f), SetFamily::new(n, naive).unwrap());
        }
    }

    #[test]
    fn max_frequency_examples() {
        assert_eq!(max_frequency(&fam(2, &[&[], &[1], &[1, 2]])).unwrap(), (1, 2.0 / 3.0));
        assert_eq!(max_frequency(&fam(2, &[&[]])).unwrap(), (1, 0.0));
        assert_eq!(max_frequency(&fam(2, &[&[1, 2], &[1], &[2], &[]])).unwrap(), (1, 0.5));
        assert_eq!(max_frequency(&fam(3, &[&[3], &[2, 3]])).unwrap(), (3, 1.0));
        assert_eq!(
            max_frequency(&SetFamily::new(2, vec![]).unwrap()),
            Err(FranklError::EmptyFamily)
        );
    }

    #[test]
    fn family_validation() {
        assert!(matches!(
            SetFamily::new(2, vec![SubsetMask(4)]),
            Err(FranklError::MaskTooLarge { .. })
        ));
        assert!(matches!(
            SetFamily::new(2, vec![SubsetMask(1), SubsetMask(1)]),
            Err(FranklError::Duplicate(1))
        ));
        assert!(matches!(SetFamily::new(0, vec![]), Err(FranklError::OutOfRange { .. })));
        assert!(matches!(
            SetFamily::new(17, vec![]),
            Err(FranklError::OutOfRange { .. })
        ));
        let f: SetFamily = serde_json::from_str(r#"{"n":2,"members":[3,1]}"#).unwrap();
        assert_eq!(f.members(), &[SubsetMask(1), SubsetMask(3)]);
        assert_eq!(serde_json::to_string(&f).unwrap(), r#"{"n":2,"members":[1,3]}"#);
        assert!(serde_json::from_str::<SetFamily>(r#"{"n":1,"members":[2]}"#).is_err());
    }

    #[test]
    fn exhaustive_n1() {
        let r = check_conjecture_exhaustive(1).unwrap();
        assert_eq!(r.candidates, 4);
        // {{1}} and {∅, {1}}
        assert_eq!(r.families_checked, 2);
        assert_eq!(r.min_ratio, 0.5);
        assert!(r.passed());
    }

    #[test]
    fn exhaustive_small() {
        for n in 2..=3 {
            let r = check_conjecture_exhaustive(n).unwrap();
            assert!(r.passed(), "{:?}", r.violations);
            assert!(r.min_ratio >= 0.5);
        }
        assert!(check_conjecture_exhaustive(0).is_err());
        assert!(check_conjecture_exhaustive(5).is_err());
    }

    #[test]
    fn exhaustive_counts_match_known_totals() {
        // union-closed families on [n], counting ∅ and {∅}: 4, 14, 122, 4960
        for (n, total) in [(1, 4), (2, 14), (3, 122), (4, 4960)] {
            let r = check_conjecture_exhaustive(n).unwrap();
            assert_eq!(r.families_checked, total - 2, "n = {n}");
            assert!(r.passed());
            assert_eq!(r.min_ratio, 0.5);
        }
    }

    #[test]
    fn sampled_is_deterministic() {
        let a = check_conjecture_sampled(4, 500, 1).unwrap();
        let b = check_conjecture_sampled(4, 500, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.passed());
        assert!(check_conjecture_sampled(17, 1, 0).is_err());
    }
}
