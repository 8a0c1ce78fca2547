//! Finite semimetric spaces and their axiom analysis.
//!
//! A [`Space`] is a labeled point set with a symmetric distance matrix whose
//! off-diagonal entries are strictly positive. Nothing about the triangle
//! inequality is assumed; [`relaxation_constant`] measures how far a space is
//! from satisfying it, i.e. the least `K` with `d(x,y) <= K (d(x,z) + d(z,y))`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tolerance::Tolerance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("space must contain at least one point")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("matrix has {rows} rows but {labels} labels were given")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error("duplicate label {label:?} at index {index}")]
    DuplicateLabel { label: String, index: usize },
    #[error("NonFiniteEntry({0},{1})")]
    NonFiniteEntry(usize, usize),
    #[error("NegativeEntry({0},{1})")]
    NegativeEntry(usize, usize),
    #[error("NonzeroDiagonal({0})")]
    NonzeroDiagonal(usize),
    #[error("ZeroOffDiagonal({0},{1})")]
    ZeroOffDiagonal(usize, usize),
    #[error("AsymmetricEntry({0},{1})")]
    AsymmetricEntry(usize, usize),
    #[error("IndexOutOfRange({index}) for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("subset must be nonempty")]
    EmptySubset,
    #[error("NonPositiveAlpha({0})")]
    NonPositiveAlpha(f64),
}

impl SpaceError {
    /// Matrix cell named by the error, if any. Diagonal errors report `(i, i)`.
    pub fn cell(&self) -> Option<(usize, usize)> {
        match *self {
            SpaceError::NonFiniteEntry(i, j)
            | SpaceError::NegativeEntry(i, j)
            | SpaceError::ZeroOffDiagonal(i, j)
            | SpaceError::AsymmetricEntry(i, j) => Some((i, j)),
            SpaceError::NonzeroDiagonal(i) => Some((i, i)),
            SpaceError::NonSquare { row, .. } => Some((row, 0)),
            _ => None,
        }
    }
}

/// A validated finite semimetric space. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    labels: Vec<String>,
    n: usize,
    dist: Vec<f64>,
}

/// On-disk shape of a space: `{"labels": [...], "matrix": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl Space {
    /// Validates a labeled matrix. Cells are scanned row-major and the first
    /// offending cell is reported.
    pub fn new(labels: Vec<String>, matrix: &[Vec<f64>]) -> Result<Self, SpaceError> {
        let n = matrix.len();
        if let Some((row, r)) = matrix.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(SpaceError::NonSquare { row, len: r.len(), expected: n });
        }
        if labels.len() != n {
            return Err(SpaceError::LabelCountMismatch { rows: n, labels: labels.len() });
        }
        let dist = matrix.iter().flatten().copied().collect();
        Self::from_flat(labels, dist)
    }

    /// Validates a row-major `n*n` matrix.
    pub fn from_flat(labels: Vec<String>, dist: Vec<f64>) -> Result<Self, SpaceError> {
        let n = labels.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        if dist.len() != n * n {
            let row = dist.len() / n;
            return Err(SpaceError::NonSquare { row, len: dist.len() % n, expected: n });
        }
        let mut seen = HashSet::with_capacity(n);
        for (index, label) in labels.iter().enumerate() {
            if !seen.insert(label.as_str()) {
                return Err(SpaceError::DuplicateLabel { label: label.clone(), index });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = dist[i * n + j];
                if !v.is_finite() {
                    return Err(SpaceError::NonFiniteEntry(i, j));
                }
                if v < 0.0 {
                    return Err(SpaceError::NegativeEntry(i, j));
                }
                if i == j {
                    if v != 0.0 {
                        return Err(SpaceError::NonzeroDiagonal(i));
                    }
                } else if v == 0.0 {
                    return Err(SpaceError::ZeroOffDiagonal(i, j));
                } else if v != dist[j * n + i] {
                    return Err(SpaceError::AsymmetricEntry(i, j));
                }
            }
        }
        Ok(Self { labels, n, dist })
    }

    /// Labels `p0, p1, ...` for a row-major matrix.
    pub fn unlabeled(dist: Vec<f64>) -> Result<Self, SpaceError> {
        let n = (dist.len() as f64).sqrt().round() as usize;
        Self::from_flat(default_labels(n), dist)
    }

    /// Builds a space from a distance callback on index pairs `i < j`.
    pub fn from_fn(
        labels: Vec<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, SpaceError> {
        let n = labels.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        Self::from_flat(labels, dist)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    /// Row-major distances.
    pub fn flat(&self) -> &[f64] {
        &self.dist
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn to_file(&self) -> SpaceFile {
        SpaceFile { labels: self.labels.clone(), matrix: self.matrix() }
    }

    /// Subspace on the given indices, in subset order.
    pub fn restrict(&self, subset: &Subset) -> Space {
        let idx = subset.indices();
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        let dist = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.d(i, j))
            .collect();
        Space { labels, n: idx.len(), dist }
    }

    /// Same points with indices permuted: point `k` of the result is point `perm[k]` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Space, SpaceError> {
        let labels = perm.iter().map(|&i| self.labels[i].clone()).collect();
        let dist = perm
            .iter()
            .flat_map(|&i| perm.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.d(i, j))
            .collect();
        Space::from_flat(labels, dist)
    }
}

impl TryFrom<SpaceFile> for Space {
    type Error = SpaceError;

    fn try_from(file: SpaceFile) -> Result<Self, SpaceError> {
        Space::new(file.labels, &file.matrix)
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// A nonempty sorted set of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subset(Vec<usize>);

impl Subset {
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self, SpaceError> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(SpaceError::EmptySubset);
        }
        if let Some(&index) = v.iter().find(|&&i| i >= n) {
            return Err(SpaceError::IndexOutOfRange { index, n });
        }
        Ok(Self(v))
    }

    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Subset from a bitmask over at most 64 points.
    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.0.iter().all(|i| other.0.binary_search(i).is_ok())
    }

    /// Image of the subset under an index map.
    pub fn map(&self, assignment: &[usize]) -> Subset {
        let mut v: Vec<usize> = self.0.iter().map(|&i| assignment[i]).collect();
        v.sort_unstable();
        v.dedup();
        Subset(v)
    }
}

/// Smallest relaxation constant of a space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    /// `max d(x,y) / (d(x,z) + d(z,y))` over ordered triples of distinct points; 0 when `n < 3`.
    pub raw_sup: f64,
    /// `max(1, raw_sup)`.
    pub coefficient: f64,
    /// First triple `(x, y, z)` in lexicographic order attaining `raw_sup`.
    pub witness: Option<[usize; 3]>,
}

#[cfg(test)]
fn triangle_ratio(space: &Space, x: usize, y: usize, z: usize) -> f64 {
    space.d(x, y) / (space.d(x, z) + space.d(z, y))
}

/// Relaxation constant of the triangle inequality.
///
/// The ratio is symmetric in `x, y` bit-for-bit, so only `x < y` is scanned;
/// the lexicographically first maximizer over all ordered triples always has
/// `x < y`. Work is split across the current rayon pool by `x` and reduced in
/// order, so the witness does not depend on the thread count.
pub fn relaxation_constant(space: &Space) -> CoefficientReport {
    let n = space.len();
    if n < 3 {
        return CoefficientReport { raw_sup: 0.0, coefficient: 1.0, witness: None };
    }
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let row_x = space.row(x);
            let mut best: (f64, Option<[usize; 3]>) = (f64::NEG_INFINITY, None);
            for y in x + 1..n {
                let dxy = row_x[y];
                let row_y = space.row(y);
                for z in 0..n {
                    if z == x || z == y {
                        continue;
                    }
                    let r = dxy / (row_x[z] + row_y[z]);
                    if r > best.0 {
                        best = (r, Some([x, y, z]));
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, None),
            |a, b| if b.0 > a.0 || a.1.is_none() { b } else { a },
        );
    let raw_sup = best.0;
    CoefficientReport { raw_sup, coefficient: raw_sup.max(1.0), witness: best.1 }
}

/// Checks `d(x,y) <= k (d(x,z) + d(z,y))` on every distinct triple.
/// Returns the first violating triple.
pub fn check_relaxed_triangle(space: &Space, k: f64, tol: Tolerance) -> Option<[usize; 3]> {
    let n = space.len();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if x == y || y == z || x == z {
                    continue;
                }
                if !tol.le(space.d(x, y), k * (space.d(x, z) + space.d(z, y))) {
                    return Some([x, y, z]);
                }
            }
        }
    }
    None
}

/// Largest distance within the subset; 0 for singletons.
pub fn diameter(space: &Space, subset: &Subset) -> Result<f64, SpaceError> {
    let idx = subset.indices();
    if let Some(&index) = idx.iter().find(|&&i| i >= space.len()) {
        return Err(SpaceError::IndexOutOfRange { index, n: space.len() });
    }
    let mut diam = 0.0_f64;
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            diam = diam.max(space.d(i, j));
        }
    }
    Ok(diam)
}

pub fn is_metric(space: &Space, tol: Tolerance) -> bool {
    tol.le(relaxation_constant(space).raw_sup, 1.0)
}

/// First distinct triple violating the strong triangle inequality, if any.
pub fn ultrametric_violation(space: &Space, tol: Tolerance) -> Option<[usize; 3]> {
    let n = space.len();
    for x in 0..n {
        for y in x + 1..n {
            for z in 0..n {
                if z == x || z == y {
                    continue;
                }
                if !tol.le(space.d(x, y), space.d(x, z).max(space.d(z, y))) {
                    return Some([x, y, z]);
                }
            }
        }
    }
    None
}

pub fn is_ultrametric(space: &Space, tol: Tolerance) -> bool {
    ultrametric_violation(space, tol).is_none()
}

/// Entrywise power `d^alpha`.
pub fn snowflake(space: &Space, alpha: f64) -> Result<Space, SpaceError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SpaceError::NonPositiveAlpha(alpha));
    }
    let dist = space.dist.iter().map(|&v| v.powf(alpha)).collect();
    Space::from_flat(space.labels.clone(), dist)
}
