//! Diameter distortion under quasisymmetric maps between b-metric spaces.
//!
//! For `A ⊆ B` with `diam A > 0` and an `eta`-quasisymmetric `f` between spaces
//! with relaxation constants `K1` (source) and `K2` (target):
//!
//! ```text
//! 1 / (2 K2 eta(diam B / diam A))  <=  diam f(A) / diam f(B)  <=  eta(2 K1 diam A / diam B)
//! ```
//!
//! For metric spaces both constants are 1 and the bounds reduce to the classical
//! metric-space estimate. Combining both sides gives `2 K2 eta(2 K1 t) eta(1/t) >= 1`
//! for `t = diam A / diam B`, checked by [`check_ratio_inequality`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moduli::Modulus;
use crate::quasisym::{require_quasisymmetric, MapError, PointMap};
use crate::report::{Basis, CheckReport, Witness};
use crate::spaces::{diameter, relaxation_constant, SpaceError, Subset};
use crate::tolerance::Tolerance;

/// Largest space the exhaustive nested-pair sweep accepts.
pub const EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistortionError {
    #[error("NotNested: A is not a subset of B")]
    NotNested,
    #[error("DegenerateA: diam A = 0")]
    DegenerateA,
    #[error("InvalidRatio({0}): t must lie in (0, 1]")]
    InvalidRatio(f64),
    #[error("coefficient {name} must be >= 1, got {value}")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("TooLargeForExhaustive: {n} points exceeds the limit of {EXHAUSTIVE_LIMIT}")]
    TooLargeForExhaustive { n: usize },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// The three members of the double inequality for one nested pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub a: Subset,
    pub b: Subset,
    pub diam_a: f64,
    pub diam_b: f64,
    pub diam_fa: f64,
    pub diam_fb: f64,
    pub lower_bound: f64,
    pub ratio: f64,
    pub upper_bound: f64,
    pub holds: bool,
}

/// Where the constants `K1`, `K2` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    /// Clamped relaxation constants of the actual spaces.
    Computed,
    /// Supplied by the caller; not verified against the spaces.
    Override,
}

/// A verified `eta`-quasisymmetric map with the constants needed for the bounds.
#[derive(Debug, Clone)]
pub struct DistortionCheck<'a> {
    f: &'a PointMap,
    eta: &'a Modulus,
    pub k1: f64,
    pub k2: f64,
    pub coefficients: CoefficientSource,
    tol: Tolerance,
}

impl<'a> DistortionCheck<'a> {
    /// Verifies quasisymmetry and computes `K1`, `K2` from the spaces.
    pub fn new(f: &'a PointMap, eta: &'a Modulus, tol: Tolerance) -> Result<Self, DistortionError> {
        require_quasisymmetric(f, eta, tol)?;
        Ok(Self {
            f,
            eta,
            k1: relaxation_constant(f.source()).coefficient,
            k2: relaxation_constant(f.target()).coefficient,
            coefficients: CoefficientSource::Computed,
            tol,
        })
    }

    /// Replaces the computed constants.
    pub fn with_coefficients(mut self, k1: f64, k2: f64) -> Result<Self, DistortionError> {
        require_coefficient("K1", k1)?;
        require_coefficient("K2", k2)?;
        self.k1 = k1;
        self.k2 = k2;
        self.coefficients = CoefficientSource::Override;
        Ok(self)
    }

    pub fn check(&self, a: &Subset, b: &Subset) -> Result<DistortionReport, DistortionError> {
        if !a.is_subset_of(b) {
            return Err(DistortionError::NotNested);
        }
        let diam_a = diameter(self.f.source(), a)?;
        let diam_b = diameter(self.f.source(), b)?;
        if diam_a == 0.0 {
            return Err(DistortionError::DegenerateA);
        }
        let assignment = self.f.assignment();
        let diam_fa = diameter(self.f.target(), &a.map(assignment))?;
        let diam_fb = diameter(self.f.target(), &b.map(assignment))?;
        let ratio = diam_fa / diam_fb;
        let lower_bound = 1.0 / (2.0 * self.k2 * self.eta.eval(diam_b / diam_a));
        let upper_bound = self.eta.eval(2.0 * self.k1 * diam_a / diam_b);
        let holds = self.tol.le(lower_bound, ratio) && self.tol.le(ratio, upper_bound);
        Ok(DistortionReport {
            a: a.clone(),
            b: b.clone(),
            diam_a,
            diam_b,
            diam_fa,
            diam_fb,
            lower_bound,
            ratio,
            upper_bound,
            holds,
        })
    }
}

fn require_coefficient(name: &'static str, value: f64) -> Result<(), DistortionError> {
    if value >= 1.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DistortionError::InvalidCoefficient { name, value })
    }
}

/// Checks the diameter double inequality for one nested pair, with constants
/// computed from the spaces.
pub fn check_diameter_distortion(
    f: &PointMap,
    eta: &Modulus,
    a: &Subset,
    b: &Subset,
    tol: Tolerance,
) -> Result<DistortionReport, DistortionError> {
    DistortionCheck::new(f, eta, tol)?.check(a, b)
}

/// `2 K2 eta(2 K1 t) eta(1/t) >= 1` for `t = diam A / diam B`.
pub fn check_ratio_inequality(
    eta: &Modulus,
    k1: f64,
    k2: f64,
    t: f64,
    tol: Tolerance,
) -> Result<CheckReport, DistortionError> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(DistortionError::InvalidRatio(t));
    }
    require_coefficient("K1", k1)?;
    require_coefficient("K2", k2)?;
    let lhs = 2.0 * k2 * eta.eval(2.0 * k1 * t) * eta.eval(1.0 / t);
    let mut report = CheckReport::new("diameter_ratio_inequality", Basis::Exact)
        .with_value("lhs", lhs)
        .with_value("t", t)
        .with_value("K1", k1)
        .with_value("K2", k2);
    report.holds = tol.ge(lhs, 1.0);
    report.max_violation = Some(1.0 - lhs);
    report.witness = Some(Witness::args([t]));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStrategy {
    /// Every nested pair of nonempty subsets; `n <= 8` only.
    Exhaustive,
    /// `count` random nested pairs drawn from a seeded generator.
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub k1: f64,
    pub k2: f64,
    pub coefficients: CoefficientSource,
    /// Nested pairs enumerated or drawn, including degenerate ones.
    pub pairs_considered: usize,
    /// Pairs skipped because `diam A = 0`.
    pub skipped_degenerate: usize,
    pub holds_count: usize,
    pub violations: usize,
    pub reports: Vec<DistortionReport>,
}

impl SweepReport {
    pub fn all_hold(&self) -> bool {
        self.violations == 0
    }
}

fn nested_pairs(n: usize, strategy: SweepStrategy) -> Result<Vec<(Subset, Subset)>, DistortionError> {
    match strategy {
        SweepStrategy::Exhaustive => {
            if n > EXHAUSTIVE_LIMIT {
                return Err(DistortionError::TooLargeForExhaustive { n });
            }
            let mut out = Vec::new();
            for b in 1u64..(1 << n) {
                // Nonempty submasks of b in increasing order.
                let mut a = b & b.wrapping_neg();
                loop {
                    out.push((Subset::from_mask(a), Subset::from_mask(b)));
                    if a == b {
                        break;
                    }
                    a = (a.wrapping_sub(b)) & b;
                }
            }
            Ok(out)
        }
        SweepStrategy::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |from: &[usize], min: usize| loop {
                let v: Vec<usize> = from.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                if v.len() >= min {
                    break v;
                }
            };
            let everything: Vec<usize> = (0..n).collect();
            let min_b = n.min(2);
            Ok((0..count)
                .map(|_| {
                    let b = draw(&everything, min_b);
                    let a = draw(&b, 1);
                    (Subset::new(a, n).expect("valid"), Subset::new(b, n).expect("valid"))
                })
                .collect())
        }
    }
}

/// Checks the diameter double inequality over many nested pairs.
pub fn sweep_subsets(
    check: &DistortionCheck<'_>,
    strategy: SweepStrategy,
) -> Result<SweepReport, DistortionError> {
    let pairs = nested_pairs(check.f.source().len(), strategy)?;
    let pairs_considered = pairs.len();
    let results: Vec<Option<DistortionReport>> = pairs
        .par_iter()
        .map(|(a, b)| match check.check(a, b) {
            Ok(r) => Ok(Some(r)),
            Err(DistortionError::DegenerateA) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let skipped_degenerate = results.iter().filter(|r| r.is_none()).count();
    let reports: Vec<DistortionReport> = results.into_iter().flatten().collect();
    let holds_count = reports.iter().filter(|r| r.holds).count();
    Ok(SweepReport {
        k1: check.k1,
        k2: check.k2,
        coefficients: check.coefficients,
        pairs_considered,
        skipped_degenerate,
        holds_count,
        violations: reports.len() - holds_count,
        reports,
    })
}
