//! Derivative-free search for distributions with a non-positive gap under
//! the marginal constraint `Pr[i ∈ A] ≤ cap < 1/2`.
//!
//! Each restart runs a coordinate-pair descent: move `step` of mass between
//! two subsets, project back to the simplex, pull mass toward `∅` until the
//! marginal cap holds, and keep the move if the gap strictly drops. A full
//! sweep without progress shrinks the step.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gilmer::{analyze, gilmer_gap, GapReport};
use crate::setdist::{make_distribution, DistError, ExtendedReal, SetDistribution};

/// Largest number of candidate pairs tried per sweep.
const MAX_SWEEP: usize = 4096;

/// Slack allowed on the marginal cap for intermediate iterates.
pub const CAP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("cannot project an empty vector")]
    EmptyInput,
    #[error("non-finite entry in projection input")]
    NonFinite,
    #[error("no distribution has every marginal <= {0}")]
    InfeasibleCap(f64),
    #[error("start is infeasible: {0}")]
    InfeasibleStart(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n: u32,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub step_shrink: f64,
    pub tol: f64,
    pub marginal_cap: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n: 2,
            seed: 0,
            restarts: 100,
            max_iters: 5000,
            step_init: 0.05,
            step_shrink: 0.5,
            tol: 1e-7,
            marginal_cap: 0.5 - 1e-6,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: String| Err(SearchError::InvalidConfig(msg));
        if !(2..=10).contains(&self.n) {
            return bad(format!("n = {} must lie in [2, 10]", self.n));
        }
        if self.restarts == 0 {
            return bad("restarts must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad(format!("step_init = {} must be positive", self.step_init));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad(format!("step_shrink = {} must lie in (0, 1)", self.step_shrink));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(self.marginal_cap > 0.0 && self.marginal_cap <= 0.5) {
            return bad(format!("marginal_cap = {} must lie in (0, 1/2]", self.marginal_cap));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: GapReport,
    pub best_gap: ExtendedReal,
    /// Number of iterates on the accepted path, the start included.
    pub param_trace_length: usize,
    /// Objective evaluations spent.
    pub iterations: usize,
    pub seed_used: u64,
}

/// Euclidean projection onto `{w : w ≥ 0, Σ w = 1}` by sorting and shifting.
pub fn project_to_simplex(v: &[f64]) -> Result<Vec<f64>, SearchError> {
    if v.is_empty() {
        return Err(SearchError::EmptyInput);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SearchError::NonFinite);
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - tau).max(0.0)).collect())
}

fn max_marginal(n: u32, probs: &[f64]) -> f64 {
    let mut marg = vec![0.0; n as usize];
    for (m, &v) in probs.iter().enumerate() {
        for (i, slot) in marg.iter_mut().enumerate() {
            if m & (1 << i) != 0 {
                *slot += v;
            }
        }
    }
    marg.into_iter().fold(0.0, f64::max)
}

/// Shrinks all non-empty mass toward `∅` until every marginal is within `cap`.
fn repair_cap(n: u32, probs: &mut [f64], cap: f64) {
    let worst = max_marginal(n, probs);
    if worst <= cap {
        return;
    }
    // one ulp-scale margin so the rescaled marginal cannot round above cap
    let scale = cap / worst * (1.0 - 4.0 * f64::EPSILON);
    let mut rest = 0.0;
    for v in probs.iter_mut().skip(1) {
        *v *= scale;
        rest += *v;
    }
    probs[0] = (1.0 - rest).max(0.0);
}

/// A seeded random distribution on `P([n])` with every marginal at most `cap`.
///
/// Draws a uniform point of the simplex, then mixes it with `δ_∅` just enough
/// to meet the cap, so `cap = 0` yields `δ_∅`.
pub fn random_feasible(n: u32, seed: u64, cap: f64) -> Result<SetDistribution, SearchError> {
    if !(1..=10).contains(&n) {
        return Err(SearchError::InvalidConfig(format!("n = {n} must lie in [1, 10]")));
    }
    if cap.is_nan() || cap < 0.0 {
        return Err(SearchError::InfeasibleCap(cap));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..1usize << n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    repair_cap(n, &mut w, cap);
    Ok(make_distribution(n, w)?)
}

fn is_feasible(p: &SetDistribution, cap: f64) -> bool {
    max_marginal(p.n(), p.probs()) <= cap + CAP_SLACK
}

/// Coordinate-pair descent on the gap from `start`, seeded by `cfg.seed`.
pub fn local_search(start: &SetDistribution, cfg: &SearchConfig) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    if start.n() != cfg.n {
        return Err(SearchError::InfeasibleStart(format!(
            "start has n = {} but config has n = {}",
            start.n(),
            cfg.n
        )));
    }
    if !is_feasible(start, cfg.marginal_cap) {
        return Err(SearchError::InfeasibleStart(format!(
            "a marginal exceeds the cap {}",
            cfg.marginal_cap
        )));
    }

    let n = start.n();
    let len = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let enumerate_all = len * (len - 1) / 2 <= MAX_SWEEP;
    if enumerate_all {
        for i in 0..len {
            for j in i + 1..len {
                pairs.push((i, j));
            }
        }
    }

    let mut current = start.clone();
    let mut current_gap = gilmer_gap(&current).to_f64();
    let mut step = cfg.step_init;
    let mut iterations = 0;
    let mut accepted = 0;
    let mut candidate = vec![0.0; len];

    'outer: while step >= cfg.tol && iterations < cfg.max_iters {
        if enumerate_all {
            pairs.shuffle(&mut rng);
        } else {
            pairs.clear();
            while pairs.len() < MAX_SWEEP {
                let i = rng.gen_range(0..len);
                let j = rng.gen_range(0..len);
                if i != j {
                    pairs.push((i, j));
                }
            }
        }
        let mut improved = false;
        for &(i, j) in &pairs {
            for (from, to) in [(i, j), (j, i)] {
                if iterations >= cfg.max_iters {
                    break 'outer;
                }
                iterations += 1;
                candidate.copy_from_slice(current.probs());
                candidate[from] -= step;
                candidate[to] += step;
                let mut projected = project_to_simplex(&candidate)?;
                repair_cap(n, &mut projected, cfg.marginal_cap);
                let Ok(next) = make_distribution(n, projected) else {
                    continue;
                };
                let gap = gilmer_gap(&next).to_f64();
                if gap < current_gap {
                    debug_assert!(is_feasible(&next, cfg.marginal_cap));
                    current = next;
                    current_gap = gap;
                    accepted += 1;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= cfg.step_shrink;
        }
    }

    let best = analyze(&current);
    Ok(SearchResult {
        best_gap: best.gap,
        best,
        param_trace_length: accepted + 1,
        iterations,
        seed_used: cfg.seed,
    })
}

/// Runs `cfg.restarts` independent descents from seeded random starts
/// (restart `r` uses seed `cfg.seed + r`) and keeps the lowest gap, breaking
/// ties by restart index. Restarts run in parallel; the result does not
/// depend on scheduling.
pub fn multistart_search(cfg: &SearchConfig) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let start = random_feasible(cfg.n, seed, cfg.marginal_cap)?;
            local_search(&start, &SearchConfig { seed, ..cfg.clone() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ra, a), (rb, b)| a.best_gap.total_cmp(&b.best_gap).then(ra.cmp(rb)))
        .map(|(_, result)| result)
        .expect("restarts >= 1");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gilmer::{perturbed_distribution, FamilyParam};
    use crate::setdist::SubsetMask;

    fn quick_cfg(n: u32) -> SearchConfig {
        SearchConfig {
            n,
            restarts: 4,
            max_iters: 400,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn projection_examples() {
        let p = project_to_simplex(&[0.8, 0.8, 0.0, 0.0]).unwrap();
        for (a, b) in p.iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(project_to_simplex(&[0.25; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(
            project_to_simplex(&[2.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(project_to_simplex(&[]), Err(SearchError::EmptyInput));
        assert_eq!(project_to_simplex(&[f64::NAN]), Err(SearchError::NonFinite));
    }

    #[test]
    fn random_feasible_respects_cap() {
        for seed in 0..20 {
            let p = random_feasible(2, seed, 0.499999).unwrap();
            assert!(p.marginals().iter().all(|&m| m <= 0.499999));
        }
        for n in 1..=5 {
            let p = random_feasible(n, 7, 0.0).unwrap();
            assert_eq!(p, SetDistribution::point_mass(n, SubsetMask::EMPTY).unwrap());
        }
        assert_eq!(
            random_feasible(3, 11, 0.3).unwrap(),
            random_feasible(3, 11, 0.3).unwrap()
        );
        assert_ne!(
            random_feasible(3, 11, 0.3).unwrap(),
            random_feasible(3, 12, 0.3).unwrap()
        );
        assert!(matches!(
            random_feasible(2, 0, -0.1),
            Err(SearchError::InfeasibleCap(_))
        ));
        assert!(random_feasible(0, 0, 0.4).is_err());
        assert!(random_feasible(11, 0, 0.4).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = [
            SearchConfig {
                n: 1,
                ..SearchConfig::default()
            },
            SearchConfig {
                n: 11,
                ..SearchConfig::default()
            },
            SearchConfig {
                restarts: 0,
                ..SearchConfig::default()
            },
            SearchConfig {
                max_iters: 0,
                ..SearchConfig::default()
            },
            SearchConfig {
                step_init: 0.0,
                ..SearchConfig::default()
            },
            SearchConfig {
                step_shrink: 1.0,
                ..SearchConfig::default()
            },
            SearchConfig {
                tol: -1.0,
                ..SearchConfig::default()
            },
            SearchConfig {
                marginal_cap: 0.6,
                ..SearchConfig::default()
            },
            SearchConfig {
                marginal_cap: 0.0,
                ..SearchConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(SearchError::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn search_from_perturbed_start_does_not_worsen() {
        let start = perturbed_distribution(FamilyParam::new(0.3, 1e-4).unwrap()).unwrap();
        let start_gap = gilmer_gap(&start).to_f64();
        let r = local_search(&start, &quick_cfg(2)).unwrap();
        assert!(r.best_gap.to_f64() <= start_gap + 1e-12);
        assert!(r.best_gap.to_f64() <= -0.046);
        assert!(r.best.hypotheses_strict);
    }

    #[test]
    fn search_from_point_mass() {
        let start = SetDistribution::point_mass(2, SubsetMask::EMPTY).unwrap();
        let r = local_search(&start, &quick_cfg(2)).unwrap();
        assert!(r.best_gap.to_f64() <= 0.0);
    }

    #[test]
    fn search_is_deterministic() {
        let start = random_feasible(3, 5, 0.45).unwrap();
        let cfg = SearchConfig {
            marginal_cap: 0.45,
            ..quick_cfg(3)
        };
        assert_eq!(local_search(&start, &cfg).unwrap(), local_search(&start, &cfg).unwrap());
    }

    #[test]
    fn infeasible_start_rejected() {
        let start = SetDistribution::point_mass(2, SubsetMask::full(2)).unwrap();
        assert!(matches!(
            local_search(&start, &quick_cfg(2)),
            Err(SearchError::InfeasibleStart(_))
        ));
        let start = SetDistribution::point_mass(3, SubsetMask::EMPTY).unwrap();
        assert!(matches!(
            local_search(&start, &quick_cfg(2)),
            Err(SearchError::InfeasibleStart(_))
        ));
    }

    #[test]
    fn infinite_start_gap_can_improve() {
        // q charges {1,2}, which p does not
        let start = make_distribution(2, vec![0.2, 0.4, 0.4, 0.0]).unwrap();
        assert_eq!(gilmer_gap(&start), ExtendedReal::Infinite);
        let r = local_search(&start, &quick_cfg(2)).unwrap();
        assert!(r.best_gap.is_finite());
    }

    #[test]
    fn single_restart_matches_local_search() {
        let cfg = SearchConfig {
            restarts: 1,
            seed: 9,
            ..quick_cfg(2)
        };
        let start = random_feasible(2, 9, cfg.marginal_cap).unwrap();
        assert_eq!(multistart_search(&cfg).unwrap(), local_search(&start, &cfg).unwrap());
    }

    #[test]
    fn large_n_uses_sampled_sweeps() {
        let cfg = SearchConfig {
            n: 7,
            restarts: 1,
            max_iters: 50,
            marginal_cap: 0.4,
            ..SearchConfig::default()
        };
        let r = multistart_search(&cfg).unwrap();
        assert!(r.iterations <= 50);
        assert!(r.best.marginals.iter().all(|&m| m <= 0.4 + CAP_SLACK));
    }
}
