//! Instance corpora and brute-force reference implementations shared by the
//! integration suites. The references deliberately avoid the library's
//! pruning and parallelism.

#![allow(dead_code)]

use metricforge::generators::{generate, GeneratorKind, GeneratorSpec, Generated};
use metricforge::moduli::Modulus;
use metricforge::quasisym::PointMap;
use metricforge::spaces::Space;
use metricforge::tolerance::Tolerance;
use proptest::prelude::*;

pub fn metric(n: usize) -> GeneratorKind {
    GeneratorKind::RandomMetric { n, density: 0.3, weight_range: (0.5, 3.0) }
}

pub fn tree(leaves: usize) -> GeneratorKind {
    GeneratorKind::RandomTreeMetric { leaves, weight_range: (0.1, 4.0) }
}

pub fn ultrametric(n: usize) -> GeneratorKind {
    GeneratorKind::RandomUltrametric { n, levels: 5, height_range: (0.5, 6.0) }
}

pub fn snowflake(inner: GeneratorKind, alpha: f64) -> GeneratorKind {
    GeneratorKind::SnowflakeOf { inner: Box::new(inner), alpha }
}

pub fn bilipschitz(inner: GeneratorKind, lo: f64, hi: f64) -> GeneratorKind {
    GeneratorKind::BiLipschitzImage { inner: Box::new(inner), multiplier_range: (lo, hi) }
}

pub fn make(kind: GeneratorKind, seed: u64) -> Generated {
    generate(&GeneratorSpec { kind, seed }).expect("corpus specs are valid")
}

/// A map together with the modulus it is known to be quasisymmetric with.
pub struct QsInstance {
    pub seed: u64,
    pub map: PointMap,
    pub eta: Modulus,
}

/// Snowflake and bi-Lipschitz images of metrics, trees and ultrametrics,
/// each with its natural modulus. Exponents and ranges vary with the seed.
pub fn qs_instances(count: usize, max_n: usize, base_seed: u64) -> Vec<QsInstance> {
    (0..count as u64)
        .map(|k| {
            let seed = base_seed + k;
            let n = 3 + (k as usize % (max_n - 2));
            let base = match k % 3 {
                0 => metric(n),
                1 => tree(n),
                _ => ultrametric(n),
            };
            let kind = if k % 2 == 0 {
                let alpha = [0.3, 0.5, 0.8, 1.0, 1.5, 2.0][(k / 2 % 6) as usize];
                snowflake(base, alpha)
            } else {
                let spread = [1.1, 1.5, 2.0, 3.0][(k / 2 % 4) as usize];
                bilipschitz(base, 1.0 / spread, spread)
            };
            let g = make(kind, seed);
            QsInstance { seed, map: g.map.expect("image kind"), eta: g.modulus.expect("image kind") }
        })
        .collect()
}

/// `max over ordered distinct (x, y, z) of d(x,y) / (d(x,z) + d(z,y))`, first
/// maximizer in lexicographic order, with the same per-triple arithmetic.
pub fn naive_relaxation(space: &Space) -> (f64, Option<[usize; 3]>) {
    let n = space.len();
    let mut best = f64::NEG_INFINITY;
    let mut at = None;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if x == y || y == z || x == z {
                    continue;
                }
                let r = space.d(x, y) / (space.d(x, z) + space.d(z, y));
                if r > best {
                    best = r;
                    at = Some([x, y, z]);
                }
            }
        }
    }
    if at.is_none() {
        best = 0.0;
    }
    (best, at)
}

/// Checks `d(x,a) <= t d(x,b) => rho(fx,fa) <= eta(t) rho(fx,fb)` for every
/// ordered triple and every `t` in the finite set of source ratios, in ratio form.
pub fn brute_force_quasisymmetric(f: &PointMap, eta: &Modulus, tol: Tolerance) -> bool {
    let (x_space, n) = (f.source(), f.source().len());
    let mut triples = Vec::new();
    for x in 0..n {
        for a in 0..n {
            for b in 0..n {
                if x != a && x != b && a != b {
                    triples.push((x, a, b));
                }
            }
        }
    }
    let ts: Vec<f64> = triples.iter().map(|&(x, a, b)| x_space.d(x, a) / x_space.d(x, b)).collect();
    ts.iter().all(|&t| {
        let bound = eta.eval(t);
        triples.iter().all(|&(x, a, b)| {
            let r = x_space.d(x, a) / x_space.d(x, b);
            r > t || tol.le(f.image_dist(x, a) / f.image_dist(x, b), bound)
        })
    })
}

/// Four-point condition over all ordered quadruples, sorting each sum triple.
pub fn brute_force_additive(space: &Space, tol: Tolerance) -> bool {
    let n = space.len();
    let d = |i, j| space.d(i, j);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for u in 0..n {
                    let q = [x, y, z, u];
                    if (0..4).any(|i| (i + 1..4).any(|j| q[i] == q[j])) {
                        continue;
                    }
                    let mut s = [d(x, y) + d(z, u), d(x, z) + d(y, u), d(x, u) + d(y, z)];
                    s.sort_by(f64::total_cmp);
                    if s[2] - s[1] > tol.slack(s[2], s[1]) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Arbitrary semimetric: symmetric, zero diagonal, positive off-diagonal.
pub fn arb_space(min_n: usize, max_n: usize) -> impl Strategy<Value = Space> {
    (min_n..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.05f64..20.0, n * (n - 1) / 2).prop_map(move |upper| {
            let mut it = upper.into_iter();
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = it.next().expect("one value per pair");
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            Space::unlabeled(m).expect("valid by construction")
        })
    })
}

/// Log-spaced points over `[lo, hi]`.
pub fn log_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}
