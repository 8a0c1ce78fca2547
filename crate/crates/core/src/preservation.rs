//! Coefficients of images of b-metric spaces under quasisymmetric maps.
//!
//! If `X` has relaxation constant `K1` and `f: X -> Y` is a surjective
//! `eta`-quasisymmetry, then `Y` has relaxation constant `K2` whenever
//!
//! ```text
//! 1 <= K1 (1/t1 + 1/t2)   implies   1 <= K2 (1/eta(t1) + 1/eta(t2))
//! ```
//!
//! for all positive `t1, t2`. The least such `K2` is the supremum of
//! `g(t1, t2) = eta(t1) eta(t2) / (eta(t1) + eta(t2))` over the feasible region
//! `1/t1 + 1/t2 >= 1/K1`.
//!
//! `g` is strictly increasing in each argument, so any feasible point is
//! dominated by a point on the hyperbola `1/t1 + 1/t2 = 1/K1`, parametrized by
//! `t1 in (K1, inf)` with `t2 = K1 t1 / (t1 - K1)`. As `t1 -> inf`, `t2 -> K1`
//! and `g -> eta(K1)`. [`minimal_k2`] scans a log grid along the hyperbola and
//! adds that limit value. The result is a numeric estimate, never a proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moduli::{check_scaling_bound, check_subadditive, check_supermultiplicative, LogGrid, Modulus, ModulusError};
use crate::quasisym::{require_quasisymmetric, MapError, PointMap};
use crate::report::{Basis, CheckReport};
use crate::spaces::{relaxation_constant, Space};
use crate::tolerance::Tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreservationError {
    #[error("coefficient K1 must be >= 1, got {0}")]
    InvalidK1(f64),
    #[error("boundary grid needs at least 2 points and 1 < lo_factor < hi_factor")]
    InvalidGrid,
    #[error(transparent)]
    Modulus(#[from] ModulusError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Log-spaced `t1` values over `(K1 lo_factor, K1 hi_factor]` on the feasibility boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub count: usize,
    pub lo_factor: f64,
    pub hi_factor: f64,
}

impl Default for BoundaryGrid {
    fn default() -> Self {
        Self { count: 4096, lo_factor: 1.0 + 1e-6, hi_factor: 1e8 }
    }
}

impl BoundaryGrid {
    pub fn with_count(count: usize) -> Self {
        Self { count, ..Self::default() }
    }

    fn validate(&self) -> Result<(), PreservationError> {
        let ok = self.count >= 2 && self.lo_factor > 1.0 && self.hi_factor > self.lo_factor && self.hi_factor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(PreservationError::InvalidGrid)
        }
    }
}

/// Which `(t1, t2)` pairs the supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K2Mode {
    /// All positive pairs in the feasible region (boundary scan plus limit).
    Universal(BoundaryGrid),
    /// Only the ratio pairs `(d(x,y)/d(x,z), d(x,y)/d(z,y))` realized by the source space.
    Realizable,
}

impl Default for K2Mode {
    fn default() -> Self {
        K2Mode::Universal(BoundaryGrid::default())
    }
}

/// Location of the supremum of the image-coefficient objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Argmax {
    /// A finite pair `(t1, t2)`.
    Pair { t1: f64, t2: f64 },
    /// The `t1 -> inf` limit, where `t2 -> K1`.
    Limit { t2: f64 },
}

impl Argmax {
    fn from_pair((t1, t2): (f64, f64)) -> Self {
        if t1.is_infinite() {
            Argmax::Limit { t2 }
        } else {
            Argmax::Pair { t1, t2 }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub check: String,
    pub basis: Basis,
    pub k1: f64,
    /// Supremum of the image-coefficient objective (universal or realizable).
    pub k2_estimate: Option<f64>,
    /// `C K1^alpha` for power-law moduli.
    pub k2_closed_form: Option<f64>,
    /// Bound the image coefficient is compared against.
    pub k2_bound: Option<f64>,
    /// Clamped relaxation constant of an actual image space.
    pub k2_empirical: Option<f64>,
    /// Bi-Lipschitz constant of the map, when relevant.
    pub bilipschitz: Option<f64>,
    /// Where the estimate is attained.
    pub argmax: Option<Argmax>,
    pub mode: Option<K2Mode>,
    pub holds: Option<bool>,
}

impl PreservationReport {
    fn new(check: &str, basis: Basis, k1: f64) -> Self {
        Self {
            check: check.to_owned(),
            basis,
            k1,
            k2_estimate: None,
            k2_closed_form: None,
            k2_bound: None,
            k2_empirical: None,
            bilipschitz: None,
            argmax: None,
            mode: None,
            holds: None,
        }
    }
}

/// `eta(t1) eta(t2) / (eta(t1) + eta(t2))`, written to stay finite for huge values.
#[inline]
pub fn coefficient_objective(eta: &Modulus, t1: f64, t2: f64) -> f64 {
    1.0 / (1.0 / eta.eval(t1) + 1.0 / eta.eval(t2))
}

fn require_k1(k1: f64) -> Result<(), PreservationError> {
    if k1 >= 1.0 && k1.is_finite() {
        Ok(())
    } else {
        Err(PreservationError::InvalidK1(k1))
    }
}

fn max_with_arg(best: (f64, (f64, f64)), cur: (f64, (f64, f64))) -> (f64, (f64, f64)) {
    if cur.0 > best.0 {
        cur
    } else {
        best
    }
}

/// Least image coefficient permitted by the `(t1, t2)` implication, as a numeric
/// supremum over the boundary of the feasible region plus its `t1 -> inf` limit.
pub fn minimal_k2(eta: &Modulus, k1: f64, grid: BoundaryGrid) -> Result<PreservationReport, PreservationError> {
    require_k1(k1)?;
    grid.validate()?;
    let ts = LogGrid { lo: k1 * grid.lo_factor, hi: k1 * grid.hi_factor, count: grid.count }.points();
    let limit = (eta.eval(k1), (f64::INFINITY, k1));
    let best = ts
        .par_iter()
        .map(|&t1| {
            let t2 = k1 * t1 / (t1 - k1);
            (coefficient_objective(eta, t1, t2), (t1, t2))
        })
        .reduce(|| (f64::NEG_INFINITY, (f64::NAN, f64::NAN)), max_with_arg);
    let best = max_with_arg(best, limit);
    let mut report = PreservationReport::new("minimal_k2", Basis::NumericEstimate, k1);
    report.k2_estimate = Some(best.0);
    report.k2_bound = Some(best.0.max(1.0));
    report.argmax = Some(Argmax::from_pair(best.1));
    report.k2_closed_form = eta.as_power().map(|(c, alpha)| c * k1.powf(alpha));
    report.mode = Some(K2Mode::Universal(grid));
    Ok(report)
}

/// Supremum of the objective over ratio pairs realized by triples of `space`.
/// A valid image coefficient for maps out of `space`, and never larger than
/// the universal estimate.
pub fn realizable_k2(eta: &Modulus, space: &Space) -> PreservationReport {
    let n = space.len();
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, (f64::NAN, f64::NAN));
            for y in x + 1..n {
                let dxy = space.d(x, y);
                for z in (0..n).filter(|&z| z != x && z != y) {
                    let (t1, t2) = (dxy / space.d(x, z), dxy / space.d(z, y));
                    best = max_with_arg(best, (coefficient_objective(eta, t1, t2), (t1, t2)));
                }
            }
            best
        })
        .reduce(|| (f64::NEG_INFINITY, (f64::NAN, f64::NAN)), max_with_arg);
    let k1 = relaxation_constant(space).coefficient;
    let mut report = PreservationReport::new("realizable_k2", Basis::Exact, k1);
    let estimate = if best.0.is_finite() { best.0 } else { 0.0 };
    report.k2_estimate = Some(estimate);
    report.k2_bound = Some(estimate.max(1.0));
    report.argmax = best.0.is_finite().then(|| Argmax::from_pair(best.1));
    report.k2_closed_form = eta.as_power().map(|(c, alpha)| c * k1.powf(alpha));
    report.mode = Some(K2Mode::Realizable);
    report
}

/// Supermultiplicativity, subadditivity and `eta(K1 t) <= K2 eta(t)` on the grid.
/// Together they imply the `(t1, t2)` implication with the same `K2`.
pub fn check_coefficient_conditions(
    eta: &Modulus,
    k1: f64,
    k2: f64,
    grid: &LogGrid,
    tol: Tolerance,
) -> Result<CheckReport, PreservationError> {
    let parts = vec![
        check_supermultiplicative(eta, grid, tol),
        check_subadditive(eta, grid, tol),
        check_scaling_bound(eta, k1, k2, grid, tol)?,
    ];
    Ok(CheckReport::all("coefficient_conditions", Basis::Grid, parts)
        .with_value("K1", k1)
        .with_value("K2", k2))
}

/// Least `L >= 1` with `d/L <= rho <= L d` on every pair of distinct points.
pub fn bilipschitz_constant(f: &PointMap) -> f64 {
    let n = f.source().len();
    let mut l = 1.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            let (d, rho) = (f.source().d(i, j), f.image_dist(i, j));
            l = l.max(rho / d).max(d / rho);
        }
    }
    l
}

/// Compares the image coefficient with `K1 L^2`.
pub fn check_bilipschitz_coefficient(f: &PointMap, tol: Tolerance) -> Result<PreservationReport, PreservationError> {
    f.require_surjective()?;
    let l = bilipschitz_constant(f);
    let k1 = relaxation_constant(f.source()).coefficient;
    let bound = k1 * l * l;
    let empirical = relaxation_constant(f.target()).coefficient;
    let mut report = PreservationReport::new("bilipschitz_coefficient", Basis::Exact, k1);
    report.bilipschitz = Some(l);
    report.k2_closed_form = Some(bound);
    report.k2_bound = Some(bound);
    report.k2_empirical = Some(empirical);
    report.holds = Some(tol.le(empirical, bound));
    Ok(report)
}

/// Compares the actual image coefficient of a surjective quasisymmetry with the
/// coefficient predicted from `eta` and the source constant.
pub fn check_image_coefficient(
    f: &PointMap,
    eta: &Modulus,
    tol: Tolerance,
    mode: K2Mode,
) -> Result<PreservationReport, PreservationError> {
    f.require_surjective()?;
    require_quasisymmetric(f, eta, tol)?;
    let mut report = match mode {
        K2Mode::Universal(grid) => minimal_k2(eta, relaxation_constant(f.source()).coefficient, grid)?,
        K2Mode::Realizable => realizable_k2(eta, f.source()),
    };
    let empirical = relaxation_constant(f.target()).coefficient;
    let bound = report.k2_bound.expect("estimators set a bound");
    report.check = "image_coefficient".into();
    report.k2_empirical = Some(empirical);
    report.holds = Some(tol.le(empirical, bound));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::snowflake;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn uneven() -> Space {
        Space::unlabeled(vec![
            0., 1.0, 2.5, 3.0, //
            1.0, 0., 2.0, 2.2, //
            2.5, 2.0, 0., 1.7, //
            3.0, 2.2, 1.7, 0.,
        ])
        .unwrap()
    }

    fn scaled(space: &Space, c: f64) -> Space {
        Space::unlabeled(space.flat().iter().map(|v| v * c).collect()).unwrap()
    }

    #[test]
    fn identity_modulus_preserves_metrics() {
        let r = minimal_k2(&Modulus::identity(), 1.0, BoundaryGrid::default()).unwrap();
        assert!(rel(r.k2_estimate.unwrap(), 1.0) < 1e-12);
        // The boundary is flat for the identity: the symmetric point gives 4/4.
        assert_eq!(coefficient_objective(&Modulus::identity(), 2.0, 2.0), 1.0);
        assert_eq!(r.k2_closed_form, Some(1.0));
    }

    #[test]
    fn power_law_estimates_match_closed_form() {
        for (c, alpha, k1) in [(1.0, 0.5, 1.0), (2.0, 0.25, 4.0), (0.5, 1.0, 2.0)] {
            let eta = Modulus::power(c, alpha).unwrap();
            let r = minimal_k2(&eta, k1, BoundaryGrid::default()).unwrap();
            let closed = c * f64::powf(k1, alpha);
            assert_eq!(r.k2_closed_form, Some(closed));
            assert!(rel(r.k2_estimate.unwrap(), closed) <= 1e-3);
        }
    }

    #[test]
    fn superlinear_modulus_peaks_in_the_interior() {
        // For alpha > 1 the symmetric point 2^(alpha-1) K1^alpha beats the limit K1^alpha.
        let eta = Modulus::power(1.0, 2.0).unwrap();
        let r = minimal_k2(&eta, 1.0, BoundaryGrid::default()).unwrap();
        let Some(Argmax::Pair { t1, t2 }) = r.argmax else { panic!("{r:?}") };
        assert!(rel(r.k2_estimate.unwrap(), 2.0) < 1e-4, "{r:?} {t1} {t2}");
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(
            minimal_k2(&Modulus::identity(), 0.5, BoundaryGrid::default()),
            Err(PreservationError::InvalidK1(0.5))
        );
        assert_eq!(
            minimal_k2(&Modulus::identity(), 1.0, BoundaryGrid { count: 1, ..Default::default() }),
            Err(PreservationError::InvalidGrid)
        );
    }

    #[test]
    fn coefficient_conditions_examples() {
        let grid = LogGrid::default();
        let tol = Tolerance::default();
        for alpha in [0.2, 0.5, 1.0] {
            let r = check_coefficient_conditions(&Modulus::power(1.0, alpha).unwrap(), 1.0, 1.0, &grid, tol).unwrap();
            assert!(r.holds, "{alpha}");
            assert_eq!(r.parts.len(), 3);
        }
        let r = check_coefficient_conditions(&Modulus::linear(2.0).unwrap(), 1.0, 2.0, &grid, tol).unwrap();
        assert!(!r.holds);
        assert!(!r.parts[0].holds);
        let r = check_coefficient_conditions(&Modulus::identity(), 2.0, 2.0, &grid, tol).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn bilipschitz_examples() {
        let s = uneven();
        assert_eq!(bilipschitz_constant(&PointMap::identity(s.clone(), s.clone()).unwrap()), 1.0);
        assert_eq!(bilipschitz_constant(&PointMap::identity(s.clone(), scaled(&s, 3.0)).unwrap()), 3.0);
        assert_eq!(bilipschitz_constant(&PointMap::identity(s.clone(), scaled(&s, 0.25)).unwrap()), 4.0);
    }

    #[test]
    fn bilipschitz_coefficient_examples() {
        let tol = Tolerance::default();
        let s = uneven();
        let r = check_bilipschitz_coefficient(&PointMap::identity(s.clone(), s.clone()).unwrap(), tol).unwrap();
        assert_eq!((r.k2_bound, r.k2_empirical, r.holds), (Some(1.0), Some(1.0), Some(true)));

        // d(a,b)=4, d(a,c)=d(c,b)=1 has coefficient 2.
        let b = Space::unlabeled(vec![0., 4., 1., 4., 0., 1., 1., 1., 0.]).unwrap();
        let r = check_bilipschitz_coefficient(&PointMap::identity(b.clone(), scaled(&b, 3.0)).unwrap(), tol).unwrap();
        assert_eq!(r.k2_bound, Some(18.0));
        assert_eq!(r.k2_empirical, Some(2.0));
        assert_eq!(r.holds, Some(true));

        let sub = s.restrict(&crate::spaces::Subset::new([0, 1, 2], 4).unwrap());
        let f = PointMap::new(sub, s, vec![0, 1, 2]).unwrap();
        assert!(matches!(check_bilipschitz_coefficient(&f, tol), Err(PreservationError::Map(MapError::NotSurjective { .. }))));
    }

    #[test]
    fn image_coefficient_examples() {
        let tol = Tolerance::default();
        let s = uneven();
        let snow = PointMap::identity(s.clone(), snowflake(&s, 0.5).unwrap()).unwrap();
        let r = check_image_coefficient(&snow, &Modulus::power(1.0, 0.5).unwrap(), tol, K2Mode::default()).unwrap();
        assert!(rel(r.k2_estimate.unwrap(), 1.0) < 1e-3);
        assert_eq!(r.k2_empirical, Some(1.0));
        assert_eq!(r.holds, Some(true));

        let l = 1.5;
        let lip = PointMap::identity(s.clone(), scaled(&s, l)).unwrap();
        let r = check_image_coefficient(&lip, &Modulus::linear(l * l).unwrap(), tol, K2Mode::default()).unwrap();
        assert!(rel(r.k2_estimate.unwrap(), l * l) < 1e-12);
        assert_eq!(r.holds, Some(true));

        let id = PointMap::identity(s.clone(), s.clone()).unwrap();
        let universal = check_image_coefficient(&id, &Modulus::identity(), tol, K2Mode::default()).unwrap();
        let realizable = check_image_coefficient(&id, &Modulus::identity(), tol, K2Mode::Realizable).unwrap();
        assert_eq!(universal.k2_empirical, Some(1.0));
        assert!(realizable.k2_estimate.unwrap() <= universal.k2_estimate.unwrap() * (1.0 + 1e-12));
        assert_eq!(realizable.holds, Some(true));

        assert!(matches!(
            check_image_coefficient(&id, &Modulus::linear(0.5).unwrap(), tol, K2Mode::default()),
            Err(PreservationError::Map(MapError::NotQuasisymmetric { .. }))
        ));
    }
}
