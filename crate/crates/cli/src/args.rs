use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "metricforge", version, about = "Checks relaxed-triangle, quasisymmetry and four-point inequalities on finite spaces")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Relative tolerance for every inequality.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "METRICFORGE_THREADS")]
    pub threads: Option<usize>,
    /// Format of the report printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileKind {
    Space,
    Map,
    Modulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceClassArg {
    Metric,
    Ultrametric,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Universal,
    Realizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Metric,
    Tree,
    Ultrametric,
    Snowflake,
    Bilipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseKindArg {
    Metric,
    Tree,
    Ultrametric,
}

/// Parses `lo,hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

#[derive(Debug, Args)]
pub struct MapModulus {
    /// Map file.
    #[arg(long)]
    pub map: PathBuf,
    /// Modulus file.
    #[arg(long)]
    pub modulus: PathBuf,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Draws used when the space is too large for an exhaustive sweep.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a space, map or modulus file.
    Validate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = FileKind::Space)]
        kind: FileKind,
    },
    /// Relaxation constant of the triangle inequality.
    Coefficient {
        space: PathBuf,
        /// Fail if the relaxed triangle inequality with this constant is violated.
        #[arg(long)]
        max_k: Option<f64>,
    },
    /// Diameter of a subset.
    Diameter {
        space: PathBuf,
        /// Comma-separated point indices; all points when omitted.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
    },
    /// Report whether a space is metric, ultrametric and additive.
    Classify {
        space: PathBuf,
        /// Fail unless the space belongs to this class.
        #[arg(long, value_enum)]
        require: Option<SpaceClassArg>,
    },
    /// Check a map against a modulus on every triple.
    QsCheck(MapModulus),
    /// Fit the smallest dominating power-law modulus to a map.
    QsFit {
        #[arg(long)]
        map: PathBuf,
        /// Exponent range `lo,hi`; the built-in grid when omitted.
        #[arg(long, value_parser = parse_range)]
        alpha_range: Option<(f64, f64)>,
        #[arg(long, default_value_t = 200)]
        alpha_count: usize,
        /// Write the fitted modulus to this file.
        #[arg(long)]
        modulus_out: Option<PathBuf>,
    },
    /// Check the inverse map against the inverse-map modulus.
    QsInverse(MapModulus),
    /// Diameter double inequality over nested subset pairs.
    DistortionSweep {
        #[command(flatten)]
        io: MapModulus,
        #[command(flatten)]
        sampling: Sampling,
        /// Override the source coefficient.
        #[arg(long, requires = "k2")]
        k1: Option<f64>,
        /// Override the target coefficient.
        #[arg(long, requires = "k1")]
        k2: Option<f64>,
    },
    /// `2 K2 eta(2 K1 t) eta(1/t) >= 1` at one ratio `t`.
    #[command(alias = "cor23")]
    RatioInequality {
        #[arg(long)]
        modulus: PathBuf,
        #[arg(long)]
        k1: f64,
        #[arg(long)]
        k2: f64,
        #[arg(long)]
        t: f64,
    },
    /// Least image coefficient allowed by a modulus; with a map, compare it to the actual image.
    PreserveK2 {
        #[arg(long)]
        modulus: PathBuf,
        /// Source coefficient; taken from the map's source when a map is given.
        #[arg(long)]
        k1: Option<f64>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Universal)]
        mode: ModeArg,
        /// Boundary grid size for the universal mode.
        #[arg(long, default_value_t = 4096)]
        grid_count: usize,
    },
    /// Supermultiplicative, subadditive and scaling-bound conditions on a grid.
    #[command(alias = "cor32")]
    CoefficientConditions {
        #[arg(long)]
        modulus: PathBuf,
        #[arg(long)]
        k1: f64,
        #[arg(long)]
        k2: f64,
        #[arg(long, value_parser = parse_range, default_value = "1e-4,1e4")]
        grid: (f64, f64),
        #[arg(long, default_value_t = 128)]
        grid_count: usize,
    },
    /// Bi-Lipschitz constant of a map.
    Bilip {
        #[arg(long)]
        map: PathBuf,
        /// Fail if the constant exceeds this value.
        #[arg(long)]
        max: Option<f64>,
    },
    /// Image coefficient against `K1 L^2`.
    #[command(alias = "cor37")]
    BilipschitzCoefficient {
        #[arg(long)]
        map: PathBuf,
    },
    /// Four-point condition on every quadruple.
    AdditiveCheck { space: PathBuf },
    /// Random five-ratio samples through the tuple implication.
    #[command(alias = "thm41-tuples")]
    TupleScan {
        #[arg(long)]
        modulus: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling range `lo,hi` for each ratio (log-uniform).
        #[arg(long, value_parser = parse_range, default_value = "0.01,100")]
        range: (f64, f64),
    },
    /// Tuple implication over the source's quadruples, then additivity of the image.
    #[command(alias = "thm41-empirical")]
    ImageAdditivity {
        #[command(flatten)]
        io: MapModulus,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Write a seeded random instance.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Points (leaves for trees).
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exponent for snowflakes.
        #[arg(long)]
        alpha: Option<f64>,
        /// Weight, height or multiplier range `lo,hi`.
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
        /// Edge density for random metrics.
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        /// Height levels for ultrametrics.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Base space for snowflakes and bi-Lipschitz images.
        #[arg(long, value_enum, default_value_t = BaseKindArg::Metric)]
        inner: BaseKindArg,
        /// Space file to write.
        #[arg(long)]
        out: PathBuf,
        /// Map file to write for image kinds.
        #[arg(long)]
        map_out: Option<PathBuf>,
        /// Modulus file to write for image kinds.
        #[arg(long)]
        modulus_out: Option<PathBuf>,
    },
}
