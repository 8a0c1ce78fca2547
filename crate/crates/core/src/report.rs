//! Verdict and witness structures shared by the checkers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// How much a verdict actually establishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Every relevant case of a finite instance was evaluated.
    Exact,
    /// A universally quantified condition evaluated on a finite grid ("holds on grid").
    Grid,
    /// A supremum or bound obtained by a numeric search.
    NumericEstimate,
    /// A seeded random sample of the cases.
    Sampled,
}

/// The point at which a check was decided: point indices, real arguments, or both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<f64>,
}

impl Witness {
    pub fn points(points: impl Into<Vec<usize>>) -> Self {
        Self { points: points.into(), args: Vec::new() }
    }

    pub fn args(args: impl Into<Vec<f64>>) -> Self {
        Self { points: Vec::new(), args: args.into() }
    }
}

/// Result of one inequality or axiom check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub holds: bool,
    pub basis: Basis,
    /// Largest observed excess `lhs - rhs` (nonpositive when the check holds
    /// with room); `None` when there was nothing to check.
    pub max_violation: Option<f64>,
    /// On failure, the worst case; on success, the tightest case when one exists.
    pub witness: Option<Witness>,
    /// Named scalar quantities relevant to the verdict.
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    /// Sub-verdicts for conjunctions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<CheckReport>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, basis: Basis) -> Self {
        Self {
            check: check.into(),
            holds: true,
            basis,
            max_violation: None,
            witness: None,
            values: BTreeMap::new(),
            parts: Vec::new(),
        }
    }

    pub fn with_value(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_owned(), value);
        self
    }

    /// Conjunction of sub-checks.
    pub fn all(check: impl Into<String>, basis: Basis, parts: Vec<CheckReport>) -> Self {
        let holds = parts.iter().all(|p| p.holds);
        let max_violation = parts
            .iter()
            .filter_map(|p| p.max_violation)
            .reduce(f64::max);
        Self {
            check: check.into(),
            holds,
            basis,
            max_violation,
            witness: parts.iter().find(|p| !p.holds).and_then(|p| p.witness.clone()),
            values: BTreeMap::new(),
            parts,
        }
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

/// Tracks the worst case seen by a sweep, preferring the earliest on ties.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Worst<W> {
    pub excess: f64,
    pub holds: bool,
    pub at: Option<W>,
}

impl<W: Copy> Worst<W> {
    pub fn empty() -> Self {
        Self { excess: f64::NEG_INFINITY, holds: true, at: None }
    }

    pub fn observe(&mut self, excess: f64, ok: bool, at: W) {
        self.holds &= ok;
        if excess > self.excess || self.at.is_none() {
            self.excess = excess;
            self.at = Some(at);
        }
    }

    /// Combines two partial results where `self` precedes `other` in sweep order.
    /// Excess of the recorded worst case, if any case was observed.
    pub fn excess(&self) -> Option<f64> {
        self.at.map(|_| self.excess)
    }

    pub fn merge(self, other: Self) -> Self {
        let holds = self.holds && other.holds;
        let pick = match (self.at.is_some(), other.at.is_some()) {
            (_, false) => self,
            (false, true) => other,
            (true, true) if other.excess > self.excess => other,
            _ => self,
        };
        Self { holds, ..pick }
    }
}
