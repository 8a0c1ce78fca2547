use std::path::Path;

use metricforge::additive::{check_image_additivity, is_additive, scan_tuple_implication, AdditivityReport, QuadSweep};
use metricforge::distortion::{check_ratio_inequality, sweep_subsets, DistortionCheck, SweepStrategy, EXHAUSTIVE_LIMIT};
use metricforge::generators::{generate, GeneratorKind, GeneratorSpec};
use metricforge::io::{read_map, read_modulus, read_space, write_map, write_modulus, write_space};
use metricforge::moduli::{LogGrid, Modulus};
use metricforge::preservation::{
    bilipschitz_constant, check_bilipschitz_coefficient, check_coefficient_conditions, check_image_coefficient,
    minimal_k2, Argmax, BoundaryGrid, K2Mode, PreservationReport,
};
use metricforge::quasisym::{check_quasisymmetry, control_function, default_alpha_grid, fit_dominating_power, verify_inverse_quasisymmetry};
use metricforge::report::CheckReport;
use metricforge::spaces::{
    check_relaxed_triangle, diameter, is_metric, is_ultrametric, relaxation_constant, Space, Subset,
};
use metricforge::tolerance::Tolerance;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{BaseKindArg, Command, FileKind, KindArg, ModeArg, Sampling, SpaceClassArg};

/// Any failure that should end the run with exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl<E: std::error::Error> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

/// The JSON document written for every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub command: String,
    /// `None` for commands that compute without checking anything.
    pub holds: Option<bool>,
    pub report: Value,
}

pub struct Outcome {
    pub envelope: Envelope,
    pub human: Vec<String>,
}

impl Outcome {
    fn new(command: &str, holds: Option<bool>, report: impl Serialize, human: Vec<String>) -> Self {
        let report = serde_json::to_value(report).expect("reports serialize");
        Self { envelope: Envelope { command: command.to_owned(), holds, report }, human }
    }
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "VIOLATED"
    }
}

fn check_lines(r: &CheckReport, depth: usize) -> Vec<String> {
    let pad = "  ".repeat(depth);
    let mut out = vec![format!("{pad}{}: {} ({:?})", r.check, verdict(r.holds), r.basis)];
    if let Some(v) = r.max_violation {
        out.push(format!("{pad}  max excess: {}", num(v)));
    }
    for (k, v) in &r.values {
        out.push(format!("{pad}  {k} = {}", num(*v)));
    }
    if let Some(w) = &r.witness {
        out.push(format!("{pad}  witness: points {:?} args {:?}", w.points, w.args));
    }
    for p in &r.parts {
        out.extend(check_lines(p, depth + 1));
    }
    out
}

fn check_outcome(command: &str, r: CheckReport) -> Outcome {
    let human = check_lines(&r, 0);
    Outcome::new(command, Some(r.holds), &r, human)
}

/// Shortest round-trip form, in exponent notation when very small or large.
fn num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e9).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), num)
}

fn preservation_lines(r: &PreservationReport) -> Vec<String> {
    let mut out = vec![format!("{} ({:?})", r.check, r.basis), format!("  K1 = {}", r.k1)];
    out.push(format!("  K2 estimate = {}", opt(r.k2_estimate)));
    out.push(format!("  K2 closed form = {}", opt(r.k2_closed_form)));
    out.push(format!("  K2 bound = {}", opt(r.k2_bound)));
    if r.k2_empirical.is_some() {
        out.push(format!("  K2 empirical = {}", opt(r.k2_empirical)));
    }
    if let Some(l) = r.bilipschitz {
        out.push(format!("  L = {l}"));
    }
    match r.argmax {
        Some(Argmax::Pair { t1, t2 }) => out.push(format!("  attained at t1 = {t1}, t2 = {t2}")),
        Some(Argmax::Limit { t2 }) => out.push(format!("  attained in the limit t1 -> inf, t2 -> {t2}")),
        None => {}
    }
    if let Some(h) = r.holds {
        out.push(format!("  verdict: {}", verdict(h)));
    }
    out
}

fn additivity_lines(r: &AdditivityReport) -> Vec<String> {
    let mut out = vec![format!("additive: {} over {} quadruples", verdict(r.holds), r.quadruples)];
    if let Some(w) = r.witness {
        out.push(format!("  worst quadruple {:?}: sums {:?}, gap {}", w.points, w.sums, r.slack));
    }
    out
}

fn quad_sweep(n: usize, s: &Sampling) -> QuadSweep {
    QuadSweep::auto(n, s.samples, s.seed)
}

fn generator_kind(kind: BaseKindArg, n: usize, range: (f64, f64), density: f64, levels: usize) -> GeneratorKind {
    match kind {
        BaseKindArg::Metric => GeneratorKind::RandomMetric { n, density, weight_range: range },
        BaseKindArg::Tree => GeneratorKind::RandomTreeMetric { leaves: n, weight_range: range },
        BaseKindArg::Ultrametric => GeneratorKind::RandomUltrametric { n, levels, height_range: range },
    }
}

fn load_space(p: &Path) -> Result<Space, InputError> {
    Ok(read_space(p)?)
}

pub fn run(command: &Command, tol: Tolerance) -> Result<Outcome, InputError> {
    match command {
        Command::Validate { path, kind } => {
            let (summary, report) = match kind {
                FileKind::Space => {
                    let s = load_space(path)?;
                    (format!("valid space with {} points", s.len()), json!({ "points": s.len() }))
                }
                FileKind::Map => {
                    let f = read_map(path)?;
                    (
                        format!(
                            "valid map from {} to {} points ({})",
                            f.source().len(),
                            f.target().len(),
                            if f.is_surjective() { "surjective" } else { "not surjective" }
                        ),
                        json!({ "source_points": f.source().len(), "target_points": f.target().len(), "surjective": f.is_surjective() }),
                    )
                }
                FileKind::Modulus => {
                    let eta = read_modulus(path)?;
                    ("valid modulus".to_owned(), serde_json::to_value(&eta)?)
                }
            };
            Ok(Outcome::new("validate", None, report, vec![summary]))
        }
        Command::Coefficient { space, max_k } => {
            let s = load_space(space)?;
            let r = relaxation_constant(&s);
            let mut human = vec![format!("raw sup = {}", r.raw_sup), format!("coefficient = {}", r.coefficient)];
            if let Some([x, y, z]) = r.witness {
                human.push(format!("witness (x, y, z) = ({x}, {y}, {z})"));
            }
            let violation = match max_k {
                Some(k) if !(*k >= 1.0 && k.is_finite()) => return Err(usage(format!("--max-k must be >= 1, got {k}"))),
                Some(k) => check_relaxed_triangle(&s, *k, tol),
                None => None,
            };
            if let (Some(k), Some(w)) = (max_k, violation) {
                human.push(format!("relaxed triangle with K = {k} VIOLATED at {w:?}"));
            }
            let holds = max_k.map(|_| violation.is_none());
            let report = json!({ "coefficient": r, "max_k": max_k, "violation": violation });
            Ok(Outcome::new("coefficient", holds, report, human))
        }
        Command::Diameter { space, subset } => {
            let s = load_space(space)?;
            let subset = match subset {
                Some(ix) => Subset::new(ix.iter().copied(), s.len())?,
                None => Subset::full(s.len()),
            };
            let d = diameter(&s, &subset)?;
            Ok(Outcome::new(
                "diameter",
                None,
                json!({ "subset": subset, "diameter": d }),
                vec![format!("diam {:?} = {d}", subset.indices())],
            ))
        }
        Command::Classify { space, require } => {
            let s = load_space(space)?;
            let metric = is_metric(&s, tol);
            let ultrametric = is_ultrametric(&s, tol);
            let additive = is_additive(&s, tol);
            let coefficient = relaxation_constant(&s).coefficient;
            let holds = require.map(|c| match c {
                SpaceClassArg::Metric => metric,
                SpaceClassArg::Ultrametric => ultrametric,
                SpaceClassArg::Additive => metric && additive.holds,
            });
            let human = vec![
                format!("coefficient = {coefficient}"),
                format!("metric: {metric}"),
                format!("ultrametric: {ultrametric}"),
                format!("four-point condition: {}", additive.holds),
            ];
            let report = json!({
                "coefficient": coefficient,
                "metric": metric,
                "ultrametric": ultrametric,
                "four_point": additive,
            });
            Ok(Outcome::new("classify", holds, report, human))
        }
        Command::QsCheck(io) => {
            let f = read_map(&io.map)?;
            let eta = read_modulus(&io.modulus)?;
            Ok(check_outcome("qs-check", check_quasisymmetry(&f, &eta, tol)))
        }
        Command::QsFit { map, alpha_range, alpha_count, modulus_out } => {
            let f = read_map(map)?;
            let grid = match alpha_range {
                Some((lo, hi)) => LogGrid::new(*lo, *hi, *alpha_count)?.points(),
                None => default_alpha_grid(),
            };
            let fit = fit_dominating_power(&control_function(&f), &grid)?;
            if let Some(p) = modulus_out {
                write_modulus(p, &fit.modulus())?;
            }
            let human = vec![format!("eta(t) = {} t^{}", fit.scale, fit.exponent)];
            Ok(Outcome::new("qs-fit", None, &fit, human))
        }
        Command::QsInverse(io) => {
            let f = read_map(&io.map)?;
            let eta = read_modulus(&io.modulus)?;
            Ok(check_outcome("qs-inverse", verify_inverse_quasisymmetry(&f, &eta, tol)?))
        }
        Command::DistortionSweep { io, sampling, k1, k2 } => {
            let f = read_map(&io.map)?;
            let eta = read_modulus(&io.modulus)?;
            let mut check = DistortionCheck::new(&f, &eta, tol)?;
            if let (Some(k1), Some(k2)) = (k1, k2) {
                check = check.with_coefficients(*k1, *k2)?;
            }
            let strategy = if f.source().len() <= EXHAUSTIVE_LIMIT {
                SweepStrategy::Exhaustive
            } else {
                SweepStrategy::Sampled { count: sampling.samples, seed: sampling.seed }
            };
            let r = sweep_subsets(&check, strategy)?;
            let mut human = vec![format!(
                "K1 = {}, K2 = {} ({:?}); {} pairs, {} with diam A = 0 skipped",
                r.k1, r.k2, r.coefficients, r.pairs_considered, r.skipped_degenerate
            )];
            human.push(format!("{:<20} {:<20} {:>12} {:>12} {:>12} {:>12}", "A", "B", "lower", "ratio", "upper", "verdict"));
            for p in &r.reports {
                human.push(format!(
                    "{:<20} {:<20} {:>12.6} {:>12.6} {:>12.6} {:>12}",
                    format!("{:?}", p.a.indices()),
                    format!("{:?}", p.b.indices()),
                    p.lower_bound,
                    p.ratio,
                    p.upper_bound,
                    verdict(p.holds)
                ));
            }
            human.push(format!("{} hold, {} violated", r.holds_count, r.violations));
            Ok(Outcome::new("distortion-sweep", Some(r.all_hold()), &r, human))
        }
        Command::RatioInequality { modulus, k1, k2, t } => {
            let eta = read_modulus(modulus)?;
            Ok(check_outcome("ratio-inequality", check_ratio_inequality(&eta, *k1, *k2, *t, tol)?))
        }
        Command::PreserveK2 { modulus, k1, map, mode, grid_count } => {
            let eta = read_modulus(modulus)?;
            let grid = BoundaryGrid::with_count(*grid_count);
            let r = match (map, mode) {
                (Some(p), _) => {
                    let f = read_map(p)?;
                    let mode = match mode {
                        ModeArg::Universal => K2Mode::Universal(grid),
                        ModeArg::Realizable => K2Mode::Realizable,
                    };
                    check_image_coefficient(&f, &eta, tol, mode)?
                }
                (None, ModeArg::Universal) => {
                    let k1 = k1.ok_or_else(|| usage("preserve-k2 needs --k1 or --map"))?;
                    minimal_k2(&eta, k1, grid)?
                }
                (None, ModeArg::Realizable) => return Err(usage("realizable mode needs --map")),
            };
            let human = preservation_lines(&r);
            Ok(Outcome::new("preserve-k2", r.holds, &r, human))
        }
        Command::CoefficientConditions { modulus, k1, k2, grid, grid_count } => {
            let eta = read_modulus(modulus)?;
            let grid = LogGrid::new(grid.0, grid.1, *grid_count)?;
            Ok(check_outcome("coefficient-conditions", check_coefficient_conditions(&eta, *k1, *k2, &grid, tol)?))
        }
        Command::Bilip { map, max } => {
            let f = read_map(map)?;
            let l = bilipschitz_constant(&f);
            let holds = max.map(|m| tol.le(l, m));
            let mut human = vec![format!("L = {l}")];
            if let Some(h) = holds {
                human.push(format!("L <= {}: {}", max.unwrap_or_default(), verdict(h)));
            }
            Ok(Outcome::new("bilip", holds, json!({ "bilipschitz": l, "max": max }), human))
        }
        Command::BilipschitzCoefficient { map } => {
            let f = read_map(map)?;
            let r = check_bilipschitz_coefficient(&f, tol)?;
            let human = preservation_lines(&r);
            Ok(Outcome::new("bilipschitz-coefficient", r.holds, &r, human))
        }
        Command::AdditiveCheck { space } => {
            let s = load_space(space)?;
            let r = is_additive(&s, tol);
            let human = additivity_lines(&r);
            Ok(Outcome::new("additive-check", Some(r.holds), &r, human))
        }
        Command::TupleScan { modulus, samples, seed, range } => {
            let eta = read_modulus(modulus)?;
            let r = scan_tuple_implication(&eta, *samples, *seed, *range, tol)?;
            let mut human = vec![format!(
                "{} draws, {} with the premise, {} conclusion failures",
                r.draws, r.premise_true, r.conclusion_failed
            )];
            if let Some((s, c)) = r.first_failure {
                human.push(format!("first failure: t = {:?}, conclusion sides {:?}", s.0, c.conclusion));
            }
            Ok(Outcome::new("tuple-scan", Some(r.holds()), &r, human))
        }
        Command::ImageAdditivity { io, sampling } => {
            let f = read_map(&io.map)?;
            let eta = read_modulus(&io.modulus)?;
            let r = check_image_additivity(&f, &eta, tol, quad_sweep(f.source().len(), sampling))?;
            let mut human = vec![format!(
                "{} quadruples ({:?}): {} premise failures, {} conclusion failures",
                r.quadruples_checked, r.basis, r.premise_failures, r.conclusion_failures
            )];
            human.push(format!("tuple condition everywhere: {}", r.tuple_condition_everywhere));
            human.extend(additivity_lines(&r.image));
            if r.alarm {
                human.push("ALARM: tuple condition held everywhere but the image is not additive".into());
            }
            Ok(Outcome::new("image-additivity", Some(r.holds() && !r.alarm), &r, human))
        }
        Command::Generate { kind, n, seed, alpha, range, density, levels, inner, out, map_out, modulus_out } => {
            let base = |k: BaseKindArg, range: (f64, f64)| generator_kind(k, *n, range, *density, *levels);
            let kind = match kind {
                KindArg::Metric => base(BaseKindArg::Metric, range.unwrap_or((1.0, 2.0))),
                KindArg::Tree => base(BaseKindArg::Tree, range.unwrap_or((1.0, 2.0))),
                KindArg::Ultrametric => base(BaseKindArg::Ultrametric, range.unwrap_or((1.0, 2.0))),
                KindArg::Snowflake => GeneratorKind::SnowflakeOf {
                    inner: Box::new(base(*inner, (1.0, 2.0))),
                    alpha: alpha.ok_or_else(|| usage("--kind snowflake needs --alpha"))?,
                },
                KindArg::Bilipschitz => GeneratorKind::BiLipschitzImage {
                    inner: Box::new(base(*inner, (1.0, 2.0))),
                    multiplier_range: range.unwrap_or((0.5, 2.0)),
                },
            };
            let spec = GeneratorSpec { kind, seed: *seed };
            let g = generate(&spec)?;
            write_space(out, &g.space)?;
            let mut human = vec![format!("wrote {} ({} points, {:?})", out.display(), g.space.len(), g.class)];
            if let (Some(p), Some(f)) = (map_out, &g.map) {
                write_map(p, f)?;
                human.push(format!("wrote map {}", p.display()));
            }
            if let (Some(p), Some(eta)) = (modulus_out, &g.modulus) {
                write_modulus(p, eta)?;
                human.push(format!("wrote modulus {}", p.display()));
            }
            let report = json!({ "spec": spec, "class": g.class, "points": g.space.len(), "modulus": g.modulus.as_ref().map(Modulus::clone) });
            Ok(Outcome::new("generate", None, report, human))
        }
    }
}

