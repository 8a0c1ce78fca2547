//! Floating-point comparison policy shared by every inequality check.

use serde::{Deserialize, Serialize};

/// Relative tolerance used when nothing else is configured.
pub const DEFAULT_RELATIVE: f64 = 1e-9;
/// Absolute floor applied below the relative band.
pub const DEFAULT_ABSOLUTE: f64 = 1e-12;

/// A comparison tolerance: `lhs <= rhs` is accepted when
/// `lhs <= rhs + max(abs, rel * max(|lhs|, |rhs|))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: DEFAULT_RELATIVE, abs: DEFAULT_ABSOLUTE }
    }
}

impl Tolerance {
    /// Relative tolerance `rel` with the default absolute floor.
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: DEFAULT_ABSOLUTE }
    }

    /// No slack at all; comparisons are plain `<=`.
    pub fn exact() -> Self {
        Self { rel: 0.0, abs: 0.0 }
    }

    /// Allowed slack for comparing two quantities of the given magnitudes.
    #[inline]
    pub fn slack(&self, a: f64, b: f64) -> f64 {
        self.abs.max(self.rel * a.abs().max(b.abs()))
    }

    /// `lhs <= rhs` up to tolerance.
    #[inline]
    pub fn le(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs + self.slack(lhs, rhs)
    }

    /// `lhs >= rhs` up to tolerance.
    #[inline]
    pub fn ge(&self, lhs: f64, rhs: f64) -> bool {
        self.le(rhs, lhs)
    }

    /// `|a - b|` within tolerance.
    #[inline]
    pub fn eq(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.slack(a, b)
    }
}
