//! The entropy functional of Gilmer's conjecture and the two-parameter
//! family of distributions on `P([2])` that violates it.
//!
//! For `A, B` i.i.d. with law `p` and `q` the law of `A ∪ B`, the conjecture
//! asserts `H(q) + D(q || p) > H(p)` whenever every marginal is below `1/2`
//! and `H(p) > 0`. Since `H(q) + D(q || p)` is the cross-entropy of `q`
//! relative to `p`, this is the same as asking the gap
//!
//! ```text
//! Φ(p) = Σ_S q_S log2(1/p_S) − Σ_S p_S log2(1/p_S)
//! ```
//!
//! to be strictly positive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::setdist::{cross_entropy, kl_divergence, make_distribution, union_convolve, ExtendedReal, SetDistribution};

/// Slack used when comparing marginals that should equal `1/2` exactly.
pub const MARGINAL_EXACT_TOL: f64 = 1e-15;

/// Perturbation used to make every marginal strictly below `1/2`.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// The `x` used for the reference counterexample.
pub const REFERENCE_X: f64 = 0.3;

/// Upper bound on the gap claimed for the reference counterexample.
pub const CLAIMED_GAP_BOUND: f64 = -0.04;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
}

fn out_of_range(msg: impl Into<String>) -> ParamError {
    ParamError::ParamOutOfRange(msg.into())
}

/// Parameters of the symmetric family on `P([2])`.
///
/// `x` is the mass on `∅` (and on `{1,2}` when unperturbed); `epsilon`
/// moves `2ε` of mass from `{1,2}` to the singletons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParam {
    pub x: f64,
    pub epsilon: f64,
}

impl FamilyParam {
    pub fn new(x: f64, epsilon: f64) -> Result<Self, ParamError> {
        let param = FamilyParam { x, epsilon };
        param.validate()?;
        Ok(param)
    }

    pub fn unperturbed(x: f64) -> Result<Self, ParamError> {
        Self::new(x, 0.0)
    }

    fn validate(&self) -> Result<(), ParamError> {
        check_x(self.x)?;
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(out_of_range(format!("epsilon = {} must be >= 0", self.epsilon)));
        }
        let limit = (self.x / 2.0).min(0.5 - self.x);
        if self.epsilon > 0.0 && self.epsilon >= limit {
            return Err(out_of_range(format!(
                "epsilon = {} must be below min(x/2, 1/2 - x) = {limit}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn check_x(x: f64) -> Result<(), ParamError> {
    if !(x > 0.0 && x < 0.5) {
        return Err(out_of_range(format!("x = {x} must lie in (0, 1/2)")));
    }
    Ok(())
}

/// Everything needed to judge one distribution against the conjecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub distribution: SetDistribution,
    pub union_distribution: SetDistribution,
    pub marginals: Vec<f64>,
    pub entropy_p: f64,
    pub entropy_q: f64,
    pub kl_q_p: ExtendedReal,
    pub gap: ExtendedReal,
    /// Every marginal `< 1/2` and `H(p) > 0`.
    pub hypotheses_strict: bool,
    /// `hypotheses_strict` and `gap <= 0`.
    pub violates_conjecture: bool,
}

/// `Φ(p) = Σ q log2(1/p) − H(p)` with `q = p ∪ p`.
pub fn gilmer_gap(p: &SetDistribution) -> ExtendedReal {
    let q = self_union(p);
    gap_from_union(p, &q)
}

fn self_union(p: &SetDistribution) -> SetDistribution {
    union_convolve(p, p).expect("a distribution always matches its own ground set")
}

fn gap_from_union(p: &SetDistribution, q: &SetDistribution) -> ExtendedReal {
    cross_entropy(q, p).expect("same ground set").sub_finite(p.entropy())
}

/// Left-hand side of the conjectured inequality, `H(q) + D(q || p)`.
pub fn gilmer_lhs(p: &SetDistribution) -> ExtendedReal {
    let q = self_union(p);
    kl_divergence(&q, p)
        .expect("same ground set")
        .plus(ExtendedReal::Finite(q.entropy()))
}

pub fn analyze(p: &SetDistribution) -> GapReport {
    let q = self_union(p);
    let marginals = p.marginals();
    let entropy_p = p.entropy();
    let entropy_q = q.entropy();
    let kl_q_p = kl_divergence(&q, p).expect("same ground set");
    let gap = gap_from_union(p, &q);
    let hypotheses_strict = marginals.iter().all(|&m| m < 0.5) && entropy_p > 0.0;
    let violates_conjecture = hypotheses_strict && matches!(gap, ExtendedReal::Finite(g) if g <= 0.0);
    GapReport {
        distribution: p.clone(),
        union_distribution: q,
        marginals,
        entropy_p,
        entropy_q,
        kl_q_p,
        gap,
        hypotheses_strict,
        violates_conjecture,
    }
}

/// `(x, 1/2 − x, 1/2 − x, x)` on `∅, {1}, {2}, {1,2}`.
pub fn counterexample_distribution(param: FamilyParam) -> Result<SetDistribution, ParamError> {
    param.validate()?;
    if param.epsilon != 0.0 {
        return Err(out_of_range("the unperturbed family takes epsilon = 0"));
    }
    let x = param.x;
    let single = 0.5 - x;
    make_distribution(2, vec![x, single, single, x]).map_err(|e| out_of_range(e.to_string()))
}

/// `(x, 1/2 + ε − x, 1/2 + ε − x, x − 2ε)`; both marginals equal `1/2 − ε`.
pub fn perturbed_distribution(param: FamilyParam) -> Result<SetDistribution, ParamError> {
    param.validate()?;
    if param.epsilon.is_nan() || param.epsilon <= 0.0 {
        return Err(out_of_range("the perturbed family needs epsilon > 0"));
    }
    let FamilyParam { x, epsilon } = param;
    let single = 0.5 + epsilon - x;
    let top = x - 2.0 * epsilon;
    make_distribution(2, vec![x, single, single, top]).map_err(|e| out_of_range(e.to_string()))
}

/// Closed form of `Φ` along the unperturbed family:
/// `(1/2 + 2x² − 2x)·log2(1/x) + (−1/2 − 2x² + 2x)·log2(1/(1/2 − x))`.
pub fn gap_closed_form(x: f64) -> Result<f64, ParamError> {
    check_x(x)?;
    let coeff = 0.5 + 2.0 * x * x - 2.0 * x;
    Ok(coeff * (1.0 / x).log2() - coeff * (1.0 / (0.5 - x)).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub x: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    /// Adjacent grid points `[x_a, x_b]` where the gap has strictly opposite signs.
    pub sign_changes: Vec<[f64; 2]>,
    /// Grid points where the gap is zero within `1e-12`.
    pub zeros: Vec<f64>,
}

/// Evaluates [`gap_closed_form`] on an inclusive uniform grid of `steps` points.
pub fn scan_gap(x_from: f64, x_to: f64, steps: usize) -> Result<ScanReport, ParamError> {
    if !(x_from > 0.0 && x_from < x_to && x_to < 0.5) {
        return Err(out_of_range(format!(
            "need 0 < from < to < 1/2, got [{x_from}, {x_to}]"
        )));
    }
    if steps < 2 {
        return Err(out_of_range(format!("steps = {steps} must be at least 2")));
    }
    let width = x_to - x_from;
    let last = (steps - 1) as f64;
    let points = (0..steps)
        .map(|k| {
            let x = if k == steps - 1 {
                x_to
            } else {
                x_from + width * (k as f64) / last
            };
            gap_closed_form(x).map(|gap| ScanPoint { x, gap })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sign_changes = points
        .windows(2)
        .filter(|w| w[0].gap * w[1].gap < 0.0)
        .map(|w| [w[0].x, w[1].x])
        .collect();
    let zeros = points.iter().filter(|p| p.gap.abs() <= 1e-12).map(|p| p.x).collect();
    Ok(ScanReport {
        points,
        sign_changes,
        zeros,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`verify_counterexample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub pass: bool,
    pub x: f64,
    pub epsilon: f64,
    pub closed_form_gap: f64,
    pub report: GapReport,
    pub perturbed_report: GapReport,
    pub checks: Vec<Check>,
}

/// Rebuilds the counterexample at `x = 0.3` and checks every claimed fact:
/// the law of `A ∪ B`, marginals of exactly `1/2`, the `< −0.04` gap, the
/// closed form against the generic pipeline, and that an `ε = 1e-4`
/// perturbation satisfies the strict hypotheses with the same bound.
pub fn verify_counterexample() -> Verification {
    let x = REFERENCE_X;
    let epsilon = DEFAULT_EPSILON;
    let p = counterexample_distribution(FamilyParam { x, epsilon: 0.0 }).expect("x = 0.3 is in range");
    let report = analyze(&p);
    let closed = gap_closed_form(x).expect("x = 0.3 is in range");
    let mut checks = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    let expected_q = [x * x, 0.25 - x * x, 0.25 - x * x, 0.5 + x * x];
    let q_err = report
        .union_distribution
        .probs()
        .iter()
        .zip(expected_q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        "union_law",
        q_err <= 1e-12,
        format!("max |q - (x^2, 1/4 - x^2, 1/4 - x^2, 1/2 + x^2)| = {q_err:e}"),
    );

    let m_err = report.marginals.iter().map(|m| (m - 0.5).abs()).fold(0.0, f64::max);
    check(
        "marginals_half",
        m_err <= MARGINAL_EXACT_TOL,
        format!("max |marginal - 1/2| = {m_err:e}"),
    );

    let gap = report.gap.to_f64();
    check("gap_below_bound", gap < CLAIMED_GAP_BOUND, format!("gap = {gap}"));

    let agree = (gap - closed).abs();
    check(
        "closed_form_agrees",
        agree < 1e-9,
        format!("|pipeline - closed form| = {agree:e}"),
    );

    let perturbed = perturbed_distribution(FamilyParam { x, epsilon }).expect("epsilon = 1e-4 is in range");
    let perturbed_report = analyze(&perturbed);
    check(
        "perturbed_hypotheses_strict",
        perturbed_report.hypotheses_strict,
        format!(
            "marginals = {:?}, H(p) = {}",
            perturbed_report.marginals, perturbed_report.entropy_p
        ),
    );
    let pgap = perturbed_report.gap.to_f64();
    check(
        "perturbed_gap_below_bound",
        pgap < CLAIMED_GAP_BOUND,
        format!("gap = {pgap}"),
    );

    let pass = checks.iter().all(|c| c.passed);
    Verification {
        pass,
        x,
        epsilon,
        closed_form_gap: closed,
        report,
        perturbed_report,
        checks,
    }
}
