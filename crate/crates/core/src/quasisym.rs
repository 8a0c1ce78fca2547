//! Quasisymmetry of finite point maps.
//!
//! For a map `f` between finite semimetric spaces, every ordered triple
//! `(x, a, b)` of distinct source points yields a ratio pair
//! `t = d(x,a) / d(x,b)`, `s = rho(fx,fa) / rho(fx,fb)`. Triples with repeated
//! points are vacuous: `b = x` forces `a = x`, and `a = x` makes both sides zero.
//!
//! `f` is `eta`-quasisymmetric iff `s <= eta(t)` for every pair. The direction
//! `=>` takes `t` equal to the pair's own ratio. For `<=`, fix any real `t` and a
//! triple with `d(x,a) <= t d(x,b)`: its ratio satisfies `t_i <= t`, so
//! `s_i <= eta(t_i) <= eta(t)` because `eta` is increasing, and the required
//! inequality `rho(fx,fa) <= eta(t) rho(fx,fb)` follows. Checking the finite
//! pair list is therefore exact; no sampling of `t` is involved.
//!
//! Equivalently, `eta` must dominate the step envelope
//! `H(t) = max { s_i : t_i <= t }` at the envelope's breakpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moduli::{inverse_modulus, LogGrid, Modulus};
use crate::report::{Basis, CheckReport, Witness, Worst};
use crate::spaces::{Space, SpaceError, Subset};
use crate::tolerance::Tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("assignment has {got} entries but the source has {expected} points")]
    AssignmentLength { got: usize, expected: usize },
    #[error("assignment[{index}] = {value} is out of range for a target of {n} points")]
    AssignmentOutOfRange { index: usize, value: usize, n: usize },
    #[error("assignment is not injective: source points {first} and {second} both map to {value}")]
    NotInjective { first: usize, second: usize, value: usize },
    #[error("NotSurjective: {image} of {target} target points are images")]
    NotSurjective { image: usize, target: usize },
    #[error("EmptyControl: the source has fewer than 3 points")]
    EmptyControl,
    #[error("NotQuasisymmetric: triple {witness:?} violates the modulus")]
    NotQuasisymmetric { witness: [usize; 3] },
    #[error("exponent grid must be nonempty and positive")]
    InvalidAlphaGrid,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// An injective map from the points of `source` to the points of `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    source: Space,
    target: Space,
    assignment: Vec<usize>,
}

impl PointMap {
    pub fn new(source: Space, target: Space, assignment: Vec<usize>) -> Result<Self, MapError> {
        if assignment.len() != source.len() {
            return Err(MapError::AssignmentLength { got: assignment.len(), expected: source.len() });
        }
        let mut preimage = vec![usize::MAX; target.len()];
        for (index, &value) in assignment.iter().enumerate() {
            if value >= target.len() {
                return Err(MapError::AssignmentOutOfRange { index, value, n: target.len() });
            }
            if preimage[value] != usize::MAX {
                return Err(MapError::NotInjective { first: preimage[value], second: index, value });
            }
            preimage[value] = index;
        }
        Ok(Self { source, target, assignment })
    }

    /// Point `i` of `source` goes to point `i` of `target`.
    pub fn identity(source: Space, target: Space) -> Result<Self, MapError> {
        let assignment = (0..source.len()).collect();
        Self::new(source, target, assignment)
    }

    pub fn source(&self) -> &Space {
        &self.source
    }

    pub fn target(&self) -> &Space {
        &self.target
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn is_surjective(&self) -> bool {
        self.assignment.len() == self.target.len()
    }

    /// `rho(f(i), f(j))`.
    #[inline]
    pub fn image_dist(&self, i: usize, j: usize) -> f64 {
        self.target.d(self.assignment[i], self.assignment[j])
    }

    pub fn image(&self) -> Subset {
        Subset::full(self.source.len()).map(&self.assignment)
    }

    pub(crate) fn require_surjective(&self) -> Result<(), MapError> {
        if self.is_surjective() {
            Ok(())
        } else {
            Err(MapError::NotSurjective { image: self.assignment.len(), target: self.target.len() })
        }
    }
}

/// One ordered triple of distinct source points and its two distance ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPair {
    pub x: usize,
    pub a: usize,
    pub b: usize,
    pub t: f64,
    pub s: f64,
}

#[inline]
fn pair_at(f: &PointMap, x: usize, a: usize, b: usize) -> ControlPair {
    let t = f.source.d(x, a) / f.source.d(x, b);
    let s = f.image_dist(x, a) / f.image_dist(x, b);
    ControlPair { x, a, b, t, s }
}

/// Calls `visit` on every ordered distinct triple `(x, a, b)` with `x` fixed.
#[inline]
fn for_each_pair_at(f: &PointMap, x: usize, mut visit: impl FnMut(ControlPair)) {
    let n = f.source.len();
    for a in 0..n {
        if a == x {
            continue;
        }
        for b in 0..n {
            if b != x && b != a {
                visit(pair_at(f, x, a, b));
            }
        }
    }
}

/// The ratio pairs of a map and their nondecreasing step envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFunction {
    /// One pair per ordered triple, in lexicographic `(x, a, b)` order.
    pub pairs: Vec<ControlPair>,
    /// `(t, H(t))` at each distinct `t`, ascending in both coordinates' sense:
    /// `t` strictly increasing, `H` nondecreasing.
    pub envelope: Vec<(f64, f64)>,
}

impl ControlFunction {
    /// `H(t) = max { s_i : t_i <= t }`, or `None` below the smallest ratio.
    pub fn envelope_at(&self, t: f64) -> Option<f64> {
        let k = self.envelope.partition_point(|&(ti, _)| ti <= t);
        (k > 0).then(|| self.envelope[k - 1].1)
    }

    /// `eta(t) >= H(t)` at every breakpoint.
    pub fn dominated_by(&self, eta: &Modulus, tol: Tolerance) -> bool {
        self.envelope.iter().all(|&(t, h)| tol.le(h, eta.eval(t)))
    }
}

pub fn control_function(f: &PointMap) -> ControlFunction {
    let n = f.source.len();
    let pairs: Vec<ControlPair> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let mut out = Vec::with_capacity(n.saturating_sub(1) * n.saturating_sub(2));
            for_each_pair_at(f, x, |p| out.push(p));
            out
        })
        .collect();
    let mut sorted: Vec<(f64, f64)> = pairs.iter().map(|p| (p.t, p.s)).collect();
    sorted.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.total_cmp(&r.1)));
    let mut envelope: Vec<(f64, f64)> = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for (t, s) in sorted {
        running = running.max(s);
        match envelope.last_mut() {
            Some(last) if last.0 == t => last.1 = running,
            _ => envelope.push((t, running)),
        }
    }
    ControlFunction { pairs, envelope }
}

/// Decides `eta`-quasisymmetry of `f` exactly over its ratio pairs.
///
/// The witness is the triple with the largest excess `s - eta(t)`, with
/// `args = [t, s, eta(t)]`.
pub fn check_quasisymmetry(f: &PointMap, eta: &Modulus, tol: Tolerance) -> CheckReport {
    let n = f.source.len();
    let worst = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut w = Worst::empty();
            for_each_pair_at(f, x, |p| {
                let bound = eta.eval(p.t);
                w.observe(p.s - bound, tol.le(p.s, bound), p);
            });
            w
        })
        .reduce(Worst::empty, Worst::merge);
    let mut report = CheckReport::new("quasisymmetry", Basis::Exact)
        .with_value("pairs", (n * n.saturating_sub(1) * n.saturating_sub(2)) as f64);
    report.holds = worst.holds;
    report.max_violation = worst.excess();
    report.witness = worst.at.map(|p| Witness {
        points: vec![p.x, p.a, p.b],
        args: vec![p.t, p.s, eta.eval(p.t)],
    });
    report
}

pub(crate) fn require_quasisymmetric(f: &PointMap, eta: &Modulus, tol: Tolerance) -> Result<CheckReport, MapError> {
    let report = check_quasisymmetry(f, eta, tol);
    if report.holds {
        Ok(report)
    } else {
        let p = &report.witness.as_ref().expect("a failing check has a witness").points;
        Err(MapError::NotQuasisymmetric { witness: [p[0], p[1], p[2]] })
    }
}

/// Result of fitting `C t^alpha` above a control function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub scale: f64,
    pub exponent: f64,
    /// `(alpha, C(alpha))` for every exponent tried.
    pub profile: Vec<(f64, f64)>,
}

impl PowerFit {
    pub fn modulus(&self) -> Modulus {
        Modulus::power(self.scale, self.exponent).expect("fitted scale and exponent are positive")
    }
}

/// 200 log-spaced exponents over `[0.05, 4]`, with `1` added.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid = LogGrid { lo: 0.05, hi: 4.0, count: 200 }.points();
    let at = grid.partition_point(|&a| a < 1.0);
    if grid.get(at) != Some(&1.0) {
        grid.insert(at, 1.0);
    }
    grid
}

/// For each exponent, the least `C` with `C t_i^alpha >= s_i` for all pairs,
/// as evaluated by [`Modulus::eval`]; returns the exponent with the smallest `C`
/// (earliest on ties).
pub fn fit_dominating_power(cf: &ControlFunction, alpha_grid: &[f64]) -> Result<PowerFit, MapError> {
    if cf.pairs.is_empty() {
        return Err(MapError::EmptyControl);
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(MapError::InvalidAlphaGrid);
    }
    let profile: Vec<(f64, f64)> = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let unit = Modulus::power(1.0, alpha).expect("validated exponent");
            let mut c = cf
                .envelope
                .iter()
                .map(|&(t, h)| h / unit.eval(t))
                .fold(f64::MIN_POSITIVE, f64::max);
            // Nudge up until the rounded products dominate too.
            loop {
                let eta = Modulus::power(c, alpha).expect("positive scale");
                if cf.envelope.iter().all(|&(t, h)| h <= eta.eval(t)) {
                    break;
                }
                c = c.next_up();
            }
            (alpha, c)
        })
        .collect();
    let &(exponent, scale) = profile
        .iter()
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
        .expect("nonempty grid");
    Ok(PowerFit { scale, exponent, profile })
}

/// The inverse correspondence `f(X) -> X`.
///
/// With `restrict_to_image`, the target is first cut down to the image of `f`;
/// otherwise a non-surjective map is an error.
pub fn inverse_map(f: &PointMap, restrict_to_image: bool) -> Result<PointMap, MapError> {
    if !f.is_surjective() && !restrict_to_image {
        f.require_surjective()?;
    }
    let image = f.image();
    let new_source = if f.is_surjective() { f.target.clone() } else { f.target.restrict(&image) };
    let mut assignment = vec![0; image.len()];
    for (src, &tgt) in f.assignment.iter().enumerate() {
        let k = image.indices().binary_search(&tgt).expect("tgt is in the image");
        assignment[k] = src;
    }
    PointMap::new(new_source, f.source.clone(), assignment)
}

/// Checks that `f^{-1}` is quasisymmetric with the inverse-map modulus of `eta`.
///
/// Fails with [`MapError::NotQuasisymmetric`] if `f` itself is not
/// `eta`-quasisymmetric. The report's parts are the forward and inverse checks.
pub fn verify_inverse_quasisymmetry(f: &PointMap, eta: &Modulus, tol: Tolerance) -> Result<CheckReport, MapError> {
    let inverse = inverse_map(f, false)?;
    let forward = require_quasisymmetric(f, eta, tol)?;
    let dual = inverse_modulus(eta);
    let mut backward = check_quasisymmetry(&inverse, &dual, tol);
    backward.check = "inverse_quasisymmetry".into();
    Ok(CheckReport::all("inverse_map_modulus", Basis::Exact, vec![forward, backward]))
}
