//! Quasisymmetry moduli: increasing homeomorphisms `eta` of `[0, inf)` with `eta(0) = 0`.
//!
//! Only families that are strictly increasing, continuous and unbounded can be
//! constructed, so every [`Modulus`] is a valid control function for the
//! quasisymmetry condition `d(x,a) <= t d(x,b) => rho(fx,fa) <= eta(t) rho(fx,fb)`.
//!
//! The inverse-map modulus is `eta'(t) = 1 / eta^{-1}(1/t)`. For a power law
//! `C t^a` it is again a power law, `C^{1/a} t^{1/a}`; for other families it is
//! evaluated pointwise through [`Modulus::invert`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{Basis, CheckReport, Witness, Worst};
use crate::tolerance::Tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulusError {
    #[error("power-law scale C must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("power-law exponent alpha must be positive and finite, got {0}")]
    InvalidExponent(f64),
    #[error("piecewise-linear anchors must start at (0, 0)")]
    AnchorsNotAtOrigin,
    #[error("piecewise-linear anchors must strictly increase in both coordinates (anchor {0})")]
    AnchorsNotIncreasing(usize),
    #[error("final slope must be positive and finite, got {0}")]
    InvalidFinalSlope(f64),
    #[error("coefficient {name} must be >= 1, got {value}")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("grid needs 0 < lo < hi and at least 2 points")]
    InvalidGrid,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Power { scale: f64, exponent: f64 },
    PiecewiseLinear { anchors: Vec<(f64, f64)>, final_slope: f64 },
    /// `t -> 1 / inner^{-1}(1/t)`, evaluated pointwise.
    Dual(Box<Modulus>),
}

/// A strictly increasing, unbounded homeomorphism of `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModulusFile", into = "ModulusFile")]
pub struct Modulus(Family);

/// On-disk shape of a modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModulusFile {
    #[serde(rename = "power")]
    Power {
        #[serde(rename = "C")]
        c: f64,
        alpha: f64,
    },
    #[serde(rename = "pwl")]
    PiecewiseLinear { anchors: Vec<[f64; 2]>, final_slope: f64 },
    /// Pointwise inverse-map modulus of another modulus.
    #[serde(rename = "dual")]
    Dual { of: Box<ModulusFile> },
}

impl TryFrom<ModulusFile> for Modulus {
    type Error = ModulusError;

    fn try_from(file: ModulusFile) -> Result<Self, ModulusError> {
        match file {
            ModulusFile::Power { c, alpha } => Modulus::power(c, alpha),
            ModulusFile::PiecewiseLinear { anchors, final_slope } => Modulus::piecewise_linear(
                anchors.into_iter().map(|[t, y]| (t, y)).collect(),
                final_slope,
            ),
            ModulusFile::Dual { of } => Ok(Modulus(Family::Dual(Box::new(Modulus::try_from(*of)?)))),
        }
    }
}

impl From<Modulus> for ModulusFile {
    fn from(m: Modulus) -> Self {
        match m.0 {
            Family::Power { scale, exponent } => ModulusFile::Power { c: scale, alpha: exponent },
            Family::PiecewiseLinear { anchors, final_slope } => ModulusFile::PiecewiseLinear {
                anchors: anchors.into_iter().map(|(t, y)| [t, y]).collect(),
                final_slope,
            },
            Family::Dual(inner) => ModulusFile::Dual { of: Box::new((*inner).into()) },
        }
    }
}

impl Modulus {
    /// `C t^alpha`.
    pub fn power(scale: f64, exponent: f64) -> Result<Self, ModulusError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ModulusError::InvalidScale(scale));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(ModulusError::InvalidExponent(exponent));
        }
        Ok(Self(Family::Power { scale, exponent }))
    }

    pub fn identity() -> Self {
        Self(Family::Power { scale: 1.0, exponent: 1.0 })
    }

    /// `c t`; the bi-Lipschitz modulus `L^2 t` is `linear(L * L)`.
    pub fn linear(c: f64) -> Result<Self, ModulusError> {
        Self::power(c, 1.0)
    }

    /// Linear interpolation through `anchors` (which must start at the origin),
    /// continued past the last anchor with `final_slope`.
    pub fn piecewise_linear(anchors: Vec<(f64, f64)>, final_slope: f64) -> Result<Self, ModulusError> {
        if anchors.first() != Some(&(0.0, 0.0)) {
            return Err(ModulusError::AnchorsNotAtOrigin);
        }
        for (k, w) in anchors.windows(2).enumerate() {
            let ok = w[1].0 > w[0].0 && w[1].1 > w[0].1 && w[1].0.is_finite() && w[1].1.is_finite();
            if !ok {
                return Err(ModulusError::AnchorsNotIncreasing(k + 1));
            }
        }
        if !(final_slope > 0.0 && final_slope.is_finite()) {
            return Err(ModulusError::InvalidFinalSlope(final_slope));
        }
        Ok(Self(Family::PiecewiseLinear { anchors, final_slope }))
    }

    /// `(C, alpha)` for power laws.
    pub fn as_power(&self) -> Option<(f64, f64)> {
        match self.0 {
            Family::Power { scale, exponent } => Some((scale, exponent)),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.0 {
            Family::Power { scale, exponent } => {
                if *exponent == 1.0 {
                    scale * t
                } else {
                    scale * t.powf(*exponent)
                }
            }
            Family::PiecewiseLinear { anchors, final_slope } => {
                interpolate(anchors.iter().map(|&(t, y)| (t, y)), anchors.len(), *final_slope, t)
            }
            Family::Dual(inner) => {
                if t == 0.0 {
                    0.0
                } else {
                    1.0 / inner.invert(1.0 / t)
                }
            }
        }
    }

    /// The unique `t` with `eval(t) = s`.
    pub fn invert(&self, s: f64) -> f64 {
        match &self.0 {
            Family::Power { scale, exponent } => {
                if *exponent == 1.0 {
                    s / scale
                } else {
                    (s / scale).powf(exponent.recip())
                }
            }
            Family::PiecewiseLinear { anchors, final_slope } => {
                interpolate(anchors.iter().map(|&(t, y)| (y, t)), anchors.len(), final_slope.recip(), s)
            }
            Family::Dual(inner) => {
                if s == 0.0 {
                    0.0
                } else {
                    1.0 / inner.eval(1.0 / s)
                }
            }
        }
    }
}

/// Piecewise-linear evaluation through increasing knots `(x, y)` starting at the origin.
fn interpolate(
    knots: impl Iterator<Item = (f64, f64)> + Clone,
    len: usize,
    final_slope: f64,
    x: f64,
) -> f64 {
    let upto = knots.clone().take_while(|&(kx, _)| kx <= x).count();
    let k = upto.max(1) - 1;
    let mut it = knots.skip(k);
    let (x0, y0) = it.next().expect("anchors are nonempty");
    if k + 1 == len {
        return y0 + final_slope * (x - x0);
    }
    let (x1, y1) = it.next().expect("checked above");
    y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
}

/// The modulus of the inverse map, `t -> 1 / eta^{-1}(1/t)`.
///
/// Closed form for power laws; the dual of a dual is the original modulus.
pub fn inverse_modulus(eta: &Modulus) -> Modulus {
    match &eta.0 {
        Family::Power { scale, exponent } => {
            let e = exponent.recip();
            Modulus(Family::Power { scale: scale.powf(e), exponent: e })
        }
        Family::Dual(inner) => (**inner).clone(),
        Family::PiecewiseLinear { .. } => inverse_modulus_pointwise(eta),
    }
}

/// The inverse-map modulus evaluated through [`Modulus::invert`], with no closed form.
pub fn inverse_modulus_pointwise(eta: &Modulus) -> Modulus {
    Modulus(Family::Dual(Box::new(eta.clone())))
}

/// Log-spaced points over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        Self { lo: 1e-4, hi: 1e4, count: 128 }
    }
}

impl LogGrid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self, ModulusError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
            return Err(ModulusError::InvalidGrid);
        }
        Ok(Self { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let last = self.count - 1;
        (0..self.count)
            .map(|k| match k {
                0 => self.lo,
                k if k == last => self.hi,
                k => (a + (b - a) * k as f64 / last as f64).exp(),
            })
            .collect()
    }
}

fn require_coefficient(name: &'static str, value: f64) -> Result<(), ModulusError> {
    if value >= 1.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModulusError::InvalidCoefficient { name, value })
    }
}

/// Evaluates `lhs(u, v) <= rhs(u, v)` on the grid squared.
fn pair_check(
    name: &str,
    grid: &LogGrid,
    tol: Tolerance,
    sides: impl Fn(f64, f64) -> (f64, f64) + Sync,
) -> CheckReport {
    let pts = grid.points();
    let worst = pts
        .par_iter()
        .map(|&u| {
            let mut w = Worst::empty();
            for &v in &pts {
                let (lhs, rhs) = sides(u, v);
                w.observe(lhs - rhs, tol.le(lhs, rhs), (u, v));
            }
            w
        })
        .reduce(Worst::empty, Worst::merge);
    let mut report = CheckReport::new(name, Basis::Grid)
        .with_value("grid_lo", grid.lo)
        .with_value("grid_hi", grid.hi)
        .with_value("grid_count", grid.count as f64);
    report.holds = worst.holds;
    report.max_violation = worst.excess();
    report.witness = worst.at.map(|(u, v)| Witness::args([u, v]));
    report
}

/// `eta(u) eta(v) <= eta(uv)` on the grid.
pub fn check_supermultiplicative(eta: &Modulus, grid: &LogGrid, tol: Tolerance) -> CheckReport {
    pair_check("supermultiplicative", grid, tol, |u, v| (eta.eval(u) * eta.eval(v), eta.eval(u * v)))
}

/// `eta(u + v) <= eta(u) + eta(v)` on the grid.
pub fn check_subadditive(eta: &Modulus, grid: &LogGrid, tol: Tolerance) -> CheckReport {
    pair_check("subadditive", grid, tol, |u, v| (eta.eval(u + v), eta.eval(u) + eta.eval(v)))
}

/// `eta(K1 t) <= K2 eta(t)` on the grid.
///
/// Reports the smallest `K2` that works on the grid (`k2_min_on_grid`) and,
/// for power laws, the exact minimum `K1^alpha` (`k2_min_exact`).
pub fn check_scaling_bound(
    eta: &Modulus,
    k1: f64,
    k2: f64,
    grid: &LogGrid,
    tol: Tolerance,
) -> Result<CheckReport, ModulusError> {
    require_coefficient("K1", k1)?;
    require_coefficient("K2", k2)?;
    let mut worst = Worst::empty();
    let mut k2_min = 0.0_f64;
    for t in grid.points() {
        let (lhs, base) = (eta.eval(k1 * t), eta.eval(t));
        let rhs = k2 * base;
        worst.observe(lhs - rhs, tol.le(lhs, rhs), t);
        k2_min = k2_min.max(lhs / base);
    }
    let mut report = CheckReport::new("scaling_bound", Basis::Grid)
        .with_value("K1", k1)
        .with_value("K2", k2)
        .with_value("k2_min_on_grid", k2_min);
    if let Some((_, alpha)) = eta.as_power() {
        report = report.with_value("k2_min_exact", k1.powf(alpha));
    }
    report.holds = worst.holds;
    report.max_violation = worst.excess();
    report.witness = worst.at.map(|t| Witness::args([t]));
    Ok(report)
}
