//! Seeded random instances: spaces of known class and maps with known moduli.
//!
//! All randomness comes from a single ChaCha8 stream created with
//! `ChaCha8Rng::seed_from_u64(seed)`. Composite kinds generate their inner
//! instance first and then continue drawing from the same stream. ChaCha is a
//! counter-based cipher, so the output is identical on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moduli::Modulus;
use crate::preservation::bilipschitz_constant;
use crate::quasisym::{MapError, PointMap};
use crate::spaces::{default_labels, snowflake, Space, SpaceError};

/// How many times a disconnected random graph is redrawn before giving up.
const CONNECT_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("DisconnectedGraph after {0} attempts")]
    DisconnectedGraph(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Shortest-path metric of a random connected weighted graph.
    RandomMetric { n: usize, density: f64, weight_range: (f64, f64) },
    /// Leaf-to-leaf path lengths of a random binary tree.
    RandomTreeMetric { leaves: usize, weight_range: (f64, f64) },
    /// Merge heights of a random hierarchical merge sequence.
    RandomUltrametric { n: usize, levels: usize, height_range: (f64, f64) },
    /// Entrywise power of the inner instance, with the identity map onto it.
    SnowflakeOf { inner: Box<GeneratorKind>, alpha: f64 },
    /// Inner distances times independent symmetric multipliers, with the identity map onto it.
    BiLipschitzImage { inner: Box<GeneratorKind>, multiplier_range: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub seed: u64,
}

/// What a generated space is guaranteed to be.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceClass {
    Ultrametric,
    Additive,
    Metric,
    /// Relaxation constant at most the given bound.
    BMetric(f64),
}

impl SpaceClass {
    /// Upper bound on the clamped relaxation constant.
    pub fn coefficient_bound(self) -> f64 {
        match self {
            SpaceClass::BMetric(k) => k,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub space: Space,
    pub class: SpaceClass,
    /// Identity map from the inner instance onto `space`, for image kinds.
    pub map: Option<PointMap>,
    /// A modulus the map is quasisymmetric with: `t^alpha` for snowflakes,
    /// `L^2 t` for bi-Lipschitz images.
    pub modulus: Option<Modulus>,
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<(), GeneratorError> {
    if lo > 0.0 && hi >= lo && hi.is_finite() {
        Ok(())
    } else {
        Err(GeneratorError::InvalidSpec(format!("{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")))
    }
}

fn check_points(name: &str, n: usize) -> Result<(), GeneratorError> {
    if n >= 2 {
        Ok(())
    } else {
        Err(GeneratorError::InvalidSpec(format!("{name} must be at least 2, got {n}")))
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo..=hi)
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated, GeneratorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with(&spec.kind, &mut rng)
}

fn generate_with(kind: &GeneratorKind, rng: &mut ChaCha8Rng) -> Result<Generated, GeneratorError> {
    match kind {
        GeneratorKind::RandomMetric { n, density, weight_range } => {
            check_points("n", *n)?;
            check_range("weight_range", *weight_range)?;
            if !(0.0..=1.0).contains(density) {
                return Err(GeneratorError::InvalidSpec(format!("density must lie in [0, 1], got {density}")));
            }
            let space = (0..CONNECT_ATTEMPTS)
                .find_map(|_| random_graph_metric(rng, *n, *density, *weight_range))
                .ok_or(GeneratorError::DisconnectedGraph(CONNECT_ATTEMPTS))??;
            Ok(Generated { space, class: SpaceClass::Metric, map: None, modulus: None })
        }
        GeneratorKind::RandomTreeMetric { leaves, weight_range } => {
            check_points("leaves", *leaves)?;
            check_range("weight_range", *weight_range)?;
            let space = random_tree_metric(rng, *leaves, *weight_range)?;
            Ok(Generated { space, class: SpaceClass::Additive, map: None, modulus: None })
        }
        GeneratorKind::RandomUltrametric { n, levels, height_range } => {
            check_points("n", *n)?;
            check_range("height_range", *height_range)?;
            if *levels == 0 {
                return Err(GeneratorError::InvalidSpec("levels must be at least 1".into()));
            }
            let space = random_ultrametric(rng, *n, *levels, *height_range)?;
            Ok(Generated { space, class: SpaceClass::Ultrametric, map: None, modulus: None })
        }
        GeneratorKind::SnowflakeOf { inner, alpha } => {
            let base = generate_with(inner, rng)?;
            let target = snowflake(&base.space, *alpha)?;
            let class = match base.class {
                SpaceClass::Ultrametric => SpaceClass::Ultrametric,
                SpaceClass::Metric | SpaceClass::Additive if *alpha <= 1.0 => SpaceClass::Metric,
                other => {
                    // d <= K (a + b) gives d^p <= K^p 2^max(p-1, 0) (a^p + b^p).
                    let k = other.coefficient_bound();
                    SpaceClass::BMetric(k.powf(*alpha) * 2f64.powf((alpha - 1.0).max(0.0)))
                }
            };
            let map = PointMap::identity(base.space, target.clone())?;
            Ok(Generated {
                space: target,
                class,
                map: Some(map),
                modulus: Some(Modulus::power(1.0, *alpha).expect("snowflake validated alpha")),
            })
        }
        GeneratorKind::BiLipschitzImage { inner, multiplier_range } => {
            check_range("multiplier_range", *multiplier_range)?;
            let base = generate_with(inner, rng)?;
            let source = &base.space;
            let mut multipliers = Vec::with_capacity(source.len() * source.len() / 2);
            for _ in 0..source.len() * source.len().saturating_sub(1) / 2 {
                multipliers.push(draw(rng, *multiplier_range));
            }
            let mut next = multipliers.into_iter();
            let target = Space::from_fn(source.labels().to_vec(), |i, j| {
                source.d(i, j) * next.next().expect("one multiplier per pair")
            })?;
            let (lo, hi) = *multiplier_range;
            let declared = hi.max(lo.recip()).max(1.0);
            let class = SpaceClass::BMetric(base.class.coefficient_bound() * declared * declared);
            let map = PointMap::identity(base.space, target.clone())?;
            let l = bilipschitz_constant(&map);
            Ok(Generated {
                space: target,
                class,
                map: Some(map),
                modulus: Some(Modulus::linear(l * l).expect("L >= 1")),
            })
        }
    }
}

/// Random spanning tree plus independent extra edges, completed by Floyd–Warshall.
/// `None` if the graph came out disconnected.
fn random_graph_metric(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    weights: (f64, f64),
) -> Option<Result<Space, GeneratorError>> {
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 1..n {
        let (u, v) = (order[k], order[rng.gen_range(0..k)]);
        let w = draw(rng, weights);
        d[u * n + v] = w;
        d[v * n + u] = w;
    }
    for i in 0..n {
        for j in i + 1..n {
            if d[i * n + j].is_infinite() && rng.gen_bool(density) {
                let w = draw(rng, weights);
                d[i * n + j] = w;
                d[j * n + i] = w;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    if d.iter().any(|v| v.is_infinite()) {
        return None;
    }
    Some(Space::from_fn(default_labels(n), |i, j| d[i * n + j]).map_err(Into::into))
}

fn random_tree_metric(rng: &mut ChaCha8Rng, leaves: usize, weights: (f64, f64)) -> Result<Space, GeneratorError> {
    // Leaves are nodes 0..leaves; internal nodes are numbered after them.
    let mut edges: Vec<(usize, usize, f64)> = vec![(0, 1, draw(rng, weights))];
    let mut next_internal = leaves;
    for leaf in 2..leaves {
        let e = rng.gen_range(0..edges.len());
        let (u, v, _) = edges[e];
        let m = next_internal;
        next_internal += 1;
        edges[e] = (u, m, draw(rng, weights));
        edges.push((m, v, draw(rng, weights)));
        edges.push((m, leaf, draw(rng, weights)));
    }
    let nodes = next_internal;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes];
    for &(u, v, w) in &edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let rows: Vec<Vec<f64>> = (0..leaves)
        .map(|root| {
            let mut dist = vec![f64::NAN; nodes];
            dist[root] = 0.0;
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                for &(v, w) in &adj[u] {
                    if dist[v].is_nan() {
                        dist[v] = dist[u] + w;
                        stack.push(v);
                    }
                }
            }
            dist.truncate(leaves);
            dist
        })
        .collect();
    Ok(Space::from_fn(default_labels(leaves), |i, j| rows[i][j])?)
}

fn random_ultrametric(
    rng: &mut ChaCha8Rng,
    n: usize,
    levels: usize,
    heights: (f64, f64),
) -> Result<Space, GeneratorError> {
    let mut level_heights: Vec<f64> = (0..levels).map(|_| draw(rng, heights)).collect();
    level_heights.sort_by(f64::total_cmp);
    let mut merge_levels: Vec<usize> = (0..n - 1).map(|_| rng.gen_range(0..levels)).collect();
    merge_levels.sort_unstable();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut d = vec![0.0; n * n];
    for level in merge_levels {
        let a = rng.gen_range(0..clusters.len());
        let mut b = rng.gen_range(0..clusters.len() - 1);
        if b >= a {
            b += 1;
        }
        let h = level_heights[level];
        for &i in &clusters[a] {
            for &j in &clusters[b] {
                d[i * n + j] = h;
                d[j * n + i] = h;
            }
        }
        let absorbed = std::mem::take(&mut clusters[b]);
        clusters[a].extend(absorbed);
        clusters.swap_remove(b);
    }
    Ok(Space::from_flat(default_labels(n), d)?)
}
