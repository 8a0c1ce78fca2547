//! Four-point (additive) metrics and their images under quasisymmetric maps.
//!
//! A metric is additive when every four points `x, y, z, u` satisfy
//! `d(x,y) + d(z,u) <= max(d(x,z) + d(y,u), d(x,u) + d(y,z))`, i.e. among the
//! three pairing sums the two largest are equal. Finite additive metrics are
//! exactly tree metrics; ultrametrics are additive.
//!
//! Dividing the four-point inequality by `d(x,y)` gives a condition on the
//! five ratios
//!
//! ```text
//! t1 = d(x,y)/d(x,z)  t2 = d(x,y)/d(y,u)  t3 = d(x,y)/d(x,u)  t4 = d(x,y)/d(y,z)  t5 = d(z,x)/d(z,u)
//! ```
//!
//! namely `1 + (1/t1)(1/t5) <= max(1/t1 + 1/t2, 1/t3 + 1/t4)`. An
//! `eta`-quasisymmetric surjection preserves additivity whenever this premise
//! implies `1 + eta(1/t1) eta(1/t5) <= max(1/eta(t1) + 1/eta(t2), 1/eta(t3) + 1/eta(t4))`.
//! The conclusion is evaluated exactly in that form: `eta(1/t1) eta(1/t5)`
//! bounds `rho(z,u)/rho(x,y)` from above and each `1/eta(ti)` bounds the matching
//! `rho` ratio from below, so the implication on a single realized tuple
//! already forces the four-point inequality on its image quadruple.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moduli::Modulus;
use crate::quasisym::{require_quasisymmetric, MapError, PointMap};
use crate::report::{Basis, Worst};
use crate::spaces::Space;
use crate::tolerance::Tolerance;

/// Largest space whose ordered quadruples are swept exhaustively by default.
pub const EXHAUSTIVE_QUAD_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdditiveError {
    #[error("RepeatedIndex: quadruple {0:?} must have four distinct points")]
    RepeatedIndex([usize; 4]),
    #[error("IndexOutOfRange: quadruple {quad:?} in a space of {n} points")]
    IndexOutOfRange { quad: [usize; 4], n: usize },
    #[error("tuple entries must be positive and finite, got {0:?}")]
    InvalidSample([f64; 5]),
    #[error("NotAdditiveSource: quadruple {0:?} violates the four-point condition")]
    NotAdditiveSource([usize; 4]),
    #[error("sampling range must satisfy 0 < lo < hi")]
    InvalidRange,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// The three pairing sums `xy|zu`, `xz|yu`, `xu|yz`.
#[inline]
pub fn pairing_sums(space: &Space, [x, y, z, u]: [usize; 4]) -> [f64; 3] {
    [
        space.d(x, y) + space.d(z, u),
        space.d(x, z) + space.d(y, u),
        space.d(x, u) + space.d(y, z),
    ]
}

/// `(largest, second largest)` of three sums.
#[inline]
fn top_two([a, b, c]: [f64; 3]) -> (f64, f64) {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if c >= hi {
        (c, hi)
    } else {
        (hi, lo.max(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadWitness {
    pub points: [usize; 4],
    pub sums: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub holds: bool,
    /// Quadruple with the largest relative gap between its two largest sums
    /// (lowest lexicographic on ties); `None` below four points.
    pub witness: Option<QuadWitness>,
    /// Absolute gap between the witness's two largest sums.
    pub slack: f64,
    pub quadruples: usize,
}

/// Checks the four-point condition on every unordered quadruple.
///
/// Work is split by the leading pair `(i, j)` and reduced in order, so the
/// witness does not depend on the number of workers.
pub fn is_additive(space: &Space, tol: Tolerance) -> AdditivityReport {
    let n = space.len();
    let leading: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let worst = leading
        .par_iter()
        .map(|&(i, j)| {
            let mut w = Worst::empty();
            for k in j + 1..n {
                for l in k + 1..n {
                    let quad = [i, j, k, l];
                    let sums = pairing_sums(space, quad);
                    let (hi, second) = top_two(sums);
                    let gap = hi - second;
                    w.observe(gap / hi, gap <= tol.slack(hi, second), QuadWitness { points: quad, sums });
                }
            }
            w
        })
        .reduce(Worst::empty, Worst::merge);
    let quadruples = if n < 4 { 0 } else { n * (n - 1) * (n - 2) * (n - 3) / 24 };
    AdditivityReport {
        holds: worst.holds,
        slack: worst.at.map_or(0.0, |w| {
            let (hi, second) = top_two(w.sums);
            hi - second
        }),
        witness: worst.at,
        quadruples,
    }
}

/// Five positive ratios `t1..t5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleSample(pub [f64; 5]);

impl TupleSample {
    pub fn new(t: [f64; 5]) -> Result<Self, AdditiveError> {
        if t.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(Self(t))
        } else {
            Err(AdditiveError::InvalidSample(t))
        }
    }
}

/// The five ratios of an ordered quadruple `(x, y, z, u)` of distinct points.
pub fn tuples_from_space(space: &Space, quad: [usize; 4]) -> Result<TupleSample, AdditiveError> {
    let n = space.len();
    if quad.iter().any(|&i| i >= n) {
        return Err(AdditiveError::IndexOutOfRange { quad, n });
    }
    let [x, y, z, u] = quad;
    if x == y || x == z || x == u || y == z || y == u || z == u {
        return Err(AdditiveError::RepeatedIndex(quad));
    }
    let dxy = space.d(x, y);
    Ok(TupleSample([
        dxy / space.d(x, z),
        dxy / space.d(y, u),
        dxy / space.d(x, u),
        dxy / space.d(y, z),
        space.d(z, x) / space.d(z, u),
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleOutcome {
    Holds,
    PremiseNotApplicable,
    ConclusionFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleCheck {
    pub outcome: TupleOutcome,
    /// `(lhs, rhs)` of the ratio premise.
    pub premise: (f64, f64),
    /// `(lhs, rhs)` of the modulus conclusion, when the premise holds.
    pub conclusion: Option<(f64, f64)>,
}

/// Evaluates the tuple implication for one sample.
pub fn check_tuple_implication(eta: &Modulus, sample: &TupleSample, tol: Tolerance) -> TupleCheck {
    let [t1, t2, t3, t4, t5] = sample.0;
    let premise = (1.0 + (1.0 / t1) * (1.0 / t5), (1.0 / t1 + 1.0 / t2).max(1.0 / t3 + 1.0 / t4));
    if !tol.le(premise.0, premise.1) {
        return TupleCheck { outcome: TupleOutcome::PremiseNotApplicable, premise, conclusion: None };
    }
    let e = |t: f64| eta.eval(t);
    let lhs = 1.0 + e(1.0 / t1) * e(1.0 / t5);
    let rhs = (1.0 / e(t1) + 1.0 / e(t2)).max(1.0 / e(t3) + 1.0 / e(t4));
    let outcome = if tol.le(lhs, rhs) { TupleOutcome::Holds } else { TupleOutcome::ConclusionFailed };
    TupleCheck { outcome, premise, conclusion: Some((lhs, rhs)) }
}

/// How quadruples of a space are visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadSweep {
    /// Every ordered quadruple of distinct points.
    Exhaustive,
    /// `count` ordered quadruples drawn from a seeded generator.
    Sampled { count: usize, seed: u64 },
}

impl QuadSweep {
    /// Exhaustive up to [`EXHAUSTIVE_QUAD_LIMIT`] points, sampled above.
    pub fn auto(n: usize, count: usize, seed: u64) -> Self {
        if n <= EXHAUSTIVE_QUAD_LIMIT {
            QuadSweep::Exhaustive
        } else {
            QuadSweep::Sampled { count, seed }
        }
    }

    fn quadruples(self, n: usize) -> Vec<[usize; 4]> {
        match self {
            QuadSweep::Exhaustive => {
                let mut out = Vec::new();
                for x in 0..n {
                    for y in (0..n).filter(|&y| y != x) {
                        for z in (0..n).filter(|&z| z != x && z != y) {
                            for u in (0..n).filter(|&u| u != x && u != y && u != z) {
                                out.push([x, y, z, u]);
                            }
                        }
                    }
                }
                out
            }
            QuadSweep::Sampled { count, seed } => {
                if n < 4 {
                    return Vec::new();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        let mut q = [0usize; 4];
                        for k in 0..4 {
                            q[k] = loop {
                                let c = rng.gen_range(0..n);
                                if !q[..k].contains(&c) {
                                    break c;
                                }
                            };
                        }
                        q
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAdditivityReport {
    pub basis: Basis,
    pub quadruples_checked: usize,
    /// Realized tuples whose premise failed (zero for an additive source up to rounding).
    pub premise_failures: usize,
    pub conclusion_failures: usize,
    /// Premise held and the conclusion held on every realized tuple.
    pub tuple_condition_everywhere: bool,
    pub first_failure: Option<([usize; 4], TupleCheck)>,
    pub image: AdditivityReport,
    /// Exhaustive sweep, tuple condition held everywhere, yet the image is not additive.
    pub alarm: bool,
}

impl ImageAdditivityReport {
    pub fn holds(&self) -> bool {
        self.image.holds
    }
}

/// Runs the tuple implication on every realized quadruple of an additive
/// source and checks whether the image is additive.
pub fn check_image_additivity(
    f: &PointMap,
    eta: &Modulus,
    tol: Tolerance,
    sweep: QuadSweep,
) -> Result<ImageAdditivityReport, AdditiveError> {
    let source = is_additive(f.source(), tol);
    if !source.holds {
        return Err(AdditiveError::NotAdditiveSource(source.witness.expect("failure has a witness").points));
    }
    f.require_surjective()?;
    require_quasisymmetric(f, eta, tol)?;
    let quads = sweep.quadruples(f.source().len());
    let checks: Vec<TupleCheck> = quads
        .par_iter()
        .map(|&q| {
            let sample = tuples_from_space(f.source(), q).expect("sweeps produce distinct in-range points");
            check_tuple_implication(eta, &sample, tol)
        })
        .collect();
    let count = |o: TupleOutcome| checks.iter().filter(|c| c.outcome == o).count();
    let premise_failures = count(TupleOutcome::PremiseNotApplicable);
    let conclusion_failures = count(TupleOutcome::ConclusionFailed);
    let first_failure = quads
        .iter()
        .zip(&checks)
        .find(|(_, c)| c.outcome != TupleOutcome::Holds)
        .map(|(q, c)| (*q, *c));
    let tuple_condition_everywhere = premise_failures == 0 && conclusion_failures == 0;
    let image = is_additive(f.target(), tol);
    Ok(ImageAdditivityReport {
        basis: match sweep {
            QuadSweep::Exhaustive => Basis::Exact,
            QuadSweep::Sampled { .. } => Basis::Sampled,
        },
        quadruples_checked: quads.len(),
        premise_failures,
        conclusion_failures,
        tuple_condition_everywhere,
        first_failure,
        alarm: sweep == QuadSweep::Exhaustive && tuple_condition_everywhere && !image.holds,
        image,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleScanReport {
    pub draws: usize,
    pub premise_true: usize,
    pub conclusion_failed: usize,
    pub first_failure: Option<(TupleSample, TupleCheck)>,
    pub seed: u64,
    pub range: (f64, f64),
}

impl TupleScanReport {
    pub fn holds(&self) -> bool {
        self.conclusion_failed == 0
    }
}

/// Draws `draws` tuples with entries log-uniform on `[lo, hi]` and evaluates
/// the implication on each. Samples are drawn sequentially from one seeded
/// stream, then evaluated in parallel.
pub fn scan_tuple_implication(
    eta: &Modulus,
    draws: usize,
    seed: u64,
    (lo, hi): (f64, f64),
    tol: Tolerance,
) -> Result<TupleScanReport, AdditiveError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(AdditiveError::InvalidRange);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (lo.ln(), hi.ln());
    let samples: Vec<TupleSample> = (0..draws)
        .map(|_| TupleSample(std::array::from_fn(|_| rng.gen_range(a..=b).exp())))
        .collect();
    let checks: Vec<TupleCheck> = samples.par_iter().map(|s| check_tuple_implication(eta, s, tol)).collect();
    Ok(TupleScanReport {
        draws,
        premise_true: checks.iter().filter(|c| c.outcome != TupleOutcome::PremiseNotApplicable).count(),
        conclusion_failed: checks.iter().filter(|c| c.outcome == TupleOutcome::ConclusionFailed).count(),
        first_failure: samples
            .iter()
            .zip(&checks)
            .find(|(_, c)| c.outcome == TupleOutcome::ConclusionFailed)
            .map(|(s, c)| (*s, *c)),
        seed,
        range: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::snowflake;

    /// Leaves x, y in one cherry and z, u in the other, unit edges.
    pub(crate) fn two_cherry() -> Space {
        Space::unlabeled(vec![
            0., 2., 3., 3., //
            2., 0., 3., 3., //
            3., 3., 0., 2., //
            3., 3., 2., 0.,
        ])
        .unwrap()
    }

    /// Unit 4-cycle in cyclic order.
    fn four_cycle() -> Space {
        Space::unlabeled(vec![
            0., 1., 2., 1., //
            1., 0., 1., 2., //
            2., 1., 0., 1., //
            1., 2., 1., 0.,
        ])
        .unwrap()
    }

    #[test]
    fn four_point_examples() {
        let tol = Tolerance::default();
        assert_eq!(pairing_sums(&two_cherry(), [0, 1, 2, 3]), [4.0, 6.0, 6.0]);
        let r = is_additive(&two_cherry(), tol);
        assert!(r.holds);
        assert_eq!(r.slack, 0.0);
        assert_eq!(r.quadruples, 1);

        let r = is_additive(&four_cycle(), tol);
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.points, [0, 1, 2, 3]);
        assert_eq!(w.sums, [2.0, 4.0, 2.0]);
        assert_eq!(r.slack, 2.0);

        let three = Space::unlabeled(vec![0., 4., 1., 4., 0., 1., 1., 1., 0.]).unwrap();
        assert!(is_additive(&three, tol).holds);
        assert_eq!(is_additive(&three, tol).witness, None);
    }

    #[test]
    fn top_two_orders() {
        for (sums, want) in [([1., 2., 3.], (3., 2.)), ([3., 2., 1.], (3., 2.)), ([2., 3., 1.], (3., 2.)), ([3., 3., 1.], (3., 3.))] {
            assert_eq!(top_two(sums), want);
        }
    }

    #[test]
    fn tuple_examples() {
        let eq = Space::from_fn(crate::spaces::default_labels(4), |_, _| 1.0).unwrap();
        assert_eq!(tuples_from_space(&eq, [0, 1, 2, 3]).unwrap().0, [1.0; 5]);
        let t = tuples_from_space(&two_cherry(), [0, 1, 2, 3]).unwrap().0;
        assert_eq!(t, [2. / 3., 2. / 3., 2. / 3., 2. / 3., 1.5]);
        assert_eq!(tuples_from_space(&eq, [0, 1, 1, 3]), Err(AdditiveError::RepeatedIndex([0, 1, 1, 3])));
        assert!(matches!(tuples_from_space(&eq, [0, 1, 2, 4]), Err(AdditiveError::IndexOutOfRange { .. })));
    }

    #[test]
    fn tuple_implication_examples() {
        let tol = Tolerance::default();
        let id = Modulus::identity();
        let s = TupleSample::new([0.1, 100.0, 100.0, 100.0, 0.1]).unwrap();
        let c = check_tuple_implication(&id, &s, tol);
        assert_eq!(c.outcome, TupleOutcome::PremiseNotApplicable);
        assert!((c.premise.0 - 101.0).abs() < 1e-12);
        assert!((c.premise.1 - 10.01).abs() < 1e-12);

        let s = TupleSample::new([2.0, 2.0, 2.0, 2.0, 1.0]).unwrap();
        let c = check_tuple_implication(&id, &s, tol);
        assert_eq!(c.outcome, TupleOutcome::PremiseNotApplicable);
        assert_eq!(c.premise, (1.5, 1.0));

        let cherry = tuples_from_space(&two_cherry(), [0, 1, 2, 3]).unwrap();
        let c = check_tuple_implication(&id, &cherry, tol);
        assert_eq!(c.outcome, TupleOutcome::Holds);
        assert_eq!(c.conclusion.unwrap(), c.premise);

        assert!(TupleSample::new([1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn image_additivity_examples() {
        let tol = Tolerance::default();
        let tree = two_cherry();
        let scaled = Space::unlabeled(tree.flat().iter().map(|v| v * 2.5).collect()).unwrap();
        let f = PointMap::identity(tree.clone(), scaled).unwrap();
        let r = check_image_additivity(&f, &Modulus::identity(), tol, QuadSweep::Exhaustive).unwrap();
        assert!(r.image.holds && r.tuple_condition_everywhere && !r.alarm);
        assert_eq!(r.quadruples_checked, 24);

        let id = PointMap::identity(tree.clone(), tree.clone()).unwrap();
        assert!(check_image_additivity(&id, &Modulus::identity(), tol, QuadSweep::Exhaustive).unwrap().holds());

        // No guarantee for the square-root snowflake; the verdict is reported either way.
        let snow = PointMap::identity(tree.clone(), snowflake(&tree, 0.5).unwrap()).unwrap();
        let r = check_image_additivity(&snow, &Modulus::power(1.0, 0.5).unwrap(), tol, QuadSweep::Exhaustive).unwrap();
        assert!(!r.alarm);

        let cyc = four_cycle();
        let bad = PointMap::identity(cyc.clone(), cyc).unwrap();
        assert!(matches!(
            check_image_additivity(&bad, &Modulus::identity(), tol, QuadSweep::Exhaustive),
            Err(AdditiveError::NotAdditiveSource(_))
        ));
    }

    #[test]
    fn sampled_quadruples_are_distinct_and_reproducible() {
        let sweep = QuadSweep::Sampled { count: 200, seed: 3 };
        let a = sweep.quadruples(20);
        assert_eq!(a, sweep.quadruples(20));
        for q in &a {
            let mut s = q.to_vec();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 4);
        }
        assert_eq!(QuadSweep::Exhaustive.quadruples(5).len(), 120);
        assert_eq!(QuadSweep::auto(13, 10, 0), QuadSweep::Sampled { count: 10, seed: 0 });
    }

    #[test]
    fn tuple_scan_identity_never_fails() {
        let r = scan_tuple_implication(&Modulus::identity(), 5000, 11, (1e-2, 1e2), Tolerance::default()).unwrap();
        assert!(r.premise_true > 0);
        assert_eq!(r.conclusion_failed, 0);
        assert_eq!(r, scan_tuple_implication(&Modulus::identity(), 5000, 11, (1e-2, 1e2), Tolerance::default()).unwrap());
        assert!(scan_tuple_implication(&Modulus::identity(), 1, 0, (1.0, 1.0), Tolerance::default()).is_err());
    }
}
