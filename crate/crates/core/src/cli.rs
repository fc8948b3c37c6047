//! Command-line front end: flag parsing, config validation and the
//! command dispatch that drives the experiment modules.
//!
//! Exit contract: 0 success, 2 usage/config error, 1 runtime error. No
//! output file is left behind on a nonzero exit.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::error::Error;
use crate::experiments::{
    self, run_divergence, run_heatmap, run_scaling, run_subset_curve, search_subset_curve,
    EstimatorChoice, ExperimentGrid, ExperimentRow, GridKind, SubsetMethod, SweepPoint,
    HEATMAP_DEFAULT_REPLICATES, SUBSET_DEFAULT_N, SUBSET_DEFAULT_P,
};
use crate::fitters::Fitter;
use crate::linalg::DesignMatrix;
use crate::mc::DataModel;
use crate::oracles::{df_axis_pair_reference, df_quadrature, df_trace_linear, QUADRATURE_MAX_DIM};
use crate::output::{render_heatmap_svg, version_string, write_rows, OutputFormat, OutputMeta};

const DEFAULT_REPLICATES: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "dfmc",
    version,
    about = "Monte Carlo degrees-of-freedom lab: estimate DF of fitting procedures and reproduce the non-monotone / unbounded examples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate DF for one (mu, sigma, fitter) triple
    Estimate(EstimateArgs),
    /// DF surface of keep-one-of-two over a square mu grid (sigma = 1, n = 2)
    Heatmap(HeatmapArgs),
    /// DF versus subset size for best-subset or forward-stepwise regression
    SubsetCurve(SubsetCurveArgs),
    /// DF of keep-the-larger-coordinate at mu = (A, A) versus A
    Scaling(ScalingArgs),
    /// DF of a two-point projection as sigma shrinks
    Divergence(DivergenceArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Estimate(_) => "estimate",
            Self::Heatmap(_) => "heatmap",
            Self::SubsetCurve(_) => "subset-curve",
            Self::Scaling(_) => "scaling",
            Self::Divergence(_) => "divergence",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Self::Estimate(a) => &a.common,
            Self::Heatmap(a) => &a.common,
            Self::SubsetCurve(a) => &a.common,
            Self::Scaling(a) => &a.common,
            Self::Divergence(a) => &a.common,
        }
    }

    fn default_replicates(&self) -> u64 {
        match self {
            Self::Heatmap(_) => HEATMAP_DEFAULT_REPLICATES,
            _ => DEFAULT_REPLICATES,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Base RNG seed; identical seeds give byte-identical output files
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Monte Carlo replicates per sweep point
    #[arg(long)]
    pub replicates: Option<u64>,

    /// Worker threads (0 = all cores); never changes output bytes
    #[arg(long, default_value_t = 0)]
    pub workers: usize,

    /// Output file path
    #[arg(long)]
    pub out: PathBuf,

    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,

    /// Omit the timestamp and zero the wallclock column so reruns are
    /// byte-comparable
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Cov,
    Opt,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bsr,
    Fsr,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Fitter spec: ols | ridge:lambda=L | bsr:k=K | fsr:k=K | axis:k=K |
    /// points:file=PATH. bsr without --design reduces to axis on identity.
    #[arg(long)]
    pub fitter: String,

    /// True mean vector, comma separated. Defaults to the standardized
    /// X*1 vector when --design is given.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,

    /// Noise scale sigma
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,

    /// Design matrix: csv:PATH (no header) or gaussian:n=N,p=P,seed=S
    #[arg(long)]
    pub design: Option<String>,

    /// Which estimator(s) to run
    #[arg(long, value_enum, default_value_t = EstimatorArg::Cov)]
    pub estimator: EstimatorArg,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Grid range as lo,hi (applied to both axes)
    #[arg(long, default_value = "-5,5", allow_hyphen_values = true)]
    pub grid_range: String,

    /// Grid step
    #[arg(long, default_value_t = 0.25)]
    pub grid_step: f64,

    /// Also render the surface as an SVG file
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsetCurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Design matrix: csv:PATH or gaussian:n=N,p=P,seed=S
    #[arg(long)]
    pub design: Option<String>,

    /// Shorthand for gaussian:n=50,p=15,seed=S; in search mode, the first
    /// design seed tried
    #[arg(long)]
    pub design_seed: Option<u64>,

    /// Subset method
    #[arg(long, value_enum, default_value_t = MethodArg::Bsr)]
    pub method: MethodArg,

    /// Subset sizes, comma separated (default 0..=p)
    #[arg(long)]
    pub k: Option<String>,

    /// Scan design seeds until some k < p has DF - p > 2 SE, then
    /// re-measure that design at full precision
    #[arg(long)]
    pub search: bool,

    /// Maximum design seeds to try in search mode
    #[arg(long, default_value_t = 20)]
    pub max_seeds: u64,

    /// Replicates for the cheap detection pass in search mode
    #[arg(long, default_value_t = 2000)]
    pub detect_replicates: u64,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Diagonal mean magnitudes A, comma separated
    #[arg(long = "A-values", default_value = "100,1000,10000")]
    pub a_values: String,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Noise scales, comma separated (descending)
    #[arg(long, default_value = "1,0.1,0.01")]
    pub sigma_values: String,

    /// Point set: file=PATH (csv, one point per line). Default {-1, +1}.
    #[arg(long)]
    pub points: Option<String>,

    /// True mean vector (default the midpoint 0)
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
}

/// Errors split by exit code: usage problems exit 2, runtime failures 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(msg) => write!(f, "{msg}"),
            Self::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// What a finished run reports on stdout.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: usize,
    pub out: PathBuf,
    pub notes: Vec<String>,
}

pub fn execute(cli: Cli) -> Result<RunSummary, CliError> {
    let common = cli.command.common();
    let replicates = common.replicates.unwrap_or(cli.command.default_replicates());
    if replicates < 2 {
        return Err(usage(format!(
            "--replicates must be at least 2, got {replicates}"
        )));
    }
    let meta = OutputMeta {
        command: cli.command.name().to_string(),
        seed: common.seed,
        replicates,
        version: version_string(),
        timestamp: if common.no_timestamp {
            None
        } else {
            Some(chrono::Utc::now().to_rfc3339())
        },
    };
    let format = match common.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    let out = common.out.clone();
    let workers = common.workers;
    let seed = common.seed;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        pool = pool.num_threads(workers);
    }
    let pool = pool
        .build()
        .map_err(|e| usage(format!("--workers: cannot build thread pool: {e}")))?;

    let (rows, notes) = pool.install(|| -> Result<(Vec<ExperimentRow>, Vec<String>), CliError> {
        match &cli.command {
            Command::Estimate(args) => run_estimate(args, replicates, seed),
            Command::Heatmap(args) => run_heatmap_cmd(args, replicates, seed),
            Command::SubsetCurve(args) => run_subset_cmd(args, replicates, seed),
            Command::Scaling(args) => {
                let a_values = parse_f64_list(&args.a_values)
                    .map_err(|e| usage(format!("--A-values: {e}")))?;
                let rows = run_scaling(&a_values, replicates, seed).map_err(CliError::Runtime)?;
                Ok((rows, Vec::new()))
            }
            Command::Divergence(args) => run_divergence_cmd(args, replicates, seed),
        }
    })?;

    write_rows(&rows, format, &out, &meta).map_err(CliError::Runtime)?;
    if let Command::Heatmap(args) = &cli.command {
        if let Some(svg_path) = &args.svg {
            render_heatmap_svg(&rows, svg_path).map_err(CliError::Runtime)?;
        }
    }
    Ok(RunSummary {
        rows: rows.len(),
        out,
        notes,
    })
}

fn run_estimate(
    args: &EstimateArgs,
    replicates: u64,
    seed: u64,
) -> Result<(Vec<ExperimentRow>, Vec<String>), CliError> {
    if !(args.sigma > 0.0 && args.sigma.is_finite()) {
        return Err(usage(format!("--sigma must be finite and > 0, got {}", args.sigma)));
    }
    let design = args
        .design
        .as_deref()
        .map(parse_design_spec)
        .transpose()?;
    let mu = match (&args.mu, &design) {
        (Some(text), _) => {
            let vals = parse_f64_list(text).map_err(|e| usage(format!("--mu: {e}")))?;
            DVector::from_vec(vals)
        }
        (None, Some(d)) => experiments::standardized_mean(d)
            .map_err(|e| usage(format!("--design: {e}")))?,
        (None, None) => return Err(usage("--mu is required when --design is omitted")),
    };
    if let Some(d) = &design {
        if mu.len() != d.n() {
            return Err(usage(format!(
                "--mu has length {} but the design has {} rows",
                mu.len(),
                d.n()
            )));
        }
    }
    let fitter = build_fitter(&args.fitter, design.as_ref(), mu.len())?;
    if fitter.response_dim() != mu.len() {
        return Err(usage(format!(
            "--fitter expects response dimension {}, but --mu has length {}",
            fitter.response_dim(),
            mu.len()
        )));
    }
    let model = DataModel::standard_gaussian(mu, args.sigma)
        .map_err(|e| usage(format!("--mu/--sigma: {e}")))?;
    let oracle = match (&fitter, df_trace_linear(&fitter)) {
        (_, Ok(t)) => Some(t),
        (Fitter::AxisSubset { n: 2, k: 1 }, _) => Some(df_axis_pair_reference(
            [model.mu()[0], model.mu()[1]],
            model.sigma(),
        )),
        _ if model.dim() <= QUADRATURE_MAX_DIM => df_quadrature(&model, &fitter, 128)
            .ok()
            .and_then(|q| q.converged_value(1e-4)),
        _ => None,
    };
    let estimator = match args.estimator {
        EstimatorArg::Cov => EstimatorChoice::Covariance,
        EstimatorArg::Opt => EstimatorChoice::Optimism,
        EstimatorArg::Both => EstimatorChoice::Both,
    };
    let grid = ExperimentGrid {
        kind: GridKind::Custom,
        points: vec![SweepPoint {
            params: vec![("sigma".into(), args.sigma)],
            model,
            fitter,
            seed,
            oracle,
            extras: Vec::new(),
        }],
        replicates,
        estimator,
    };
    let rows = grid.run().map_err(CliError::Runtime)?;
    let note = format!(
        "df = {:.6} +- {:.6}",
        rows[0].df.value, rows[0].df.std_error
    );
    Ok((rows, vec![note]))
}

fn run_heatmap_cmd(
    args: &HeatmapArgs,
    replicates: u64,
    seed: u64,
) -> Result<(Vec<ExperimentRow>, Vec<String>), CliError> {
    let (lo, hi) = parse_pair(&args.grid_range).map_err(|e| usage(format!("--grid-range: {e}")))?;
    if !(args.grid_step > 0.0 && args.grid_step.is_finite()) {
        return Err(usage(format!(
            "--grid-step must be finite and > 0, got {}",
            args.grid_step
        )));
    }
    if hi < lo {
        return Err(usage(format!("--grid-range: hi {hi} is below lo {lo}")));
    }
    let (rows, report) =
        run_heatmap((lo, hi), args.grid_step, replicates, seed).map_err(CliError::Runtime)?;
    let note = format!(
        "symmetry spot-check: {} pixels, max |z| = {:.3}",
        report.checked, report.max_z
    );
    Ok((rows, vec![note]))
}

fn run_subset_cmd(
    args: &SubsetCurveArgs,
    replicates: u64,
    seed: u64,
) -> Result<(Vec<ExperimentRow>, Vec<String>), CliError> {
    let method = match args.method {
        MethodArg::Bsr => SubsetMethod::Bsr,
        MethodArg::Fsr => SubsetMethod::Fsr,
    };
    if args.search {
        if args.design.is_some() {
            return Err(usage(
                "--search generates its own designs; drop --design (use --design-seed to pick the starting seed)",
            ));
        }
        if args.detect_replicates < 2 {
            return Err(usage("--detect-replicates must be at least 2"));
        }
        if args.max_seeds == 0 {
            return Err(usage("--max-seeds must be at least 1"));
        }
        let (n, p) = (SUBSET_DEFAULT_N, SUBSET_DEFAULT_P);
        let ks = parse_ks(args.k.as_deref(), p)?;
        let outcome = search_subset_curve(
            n,
            p,
            method,
            &ks,
            args.detect_replicates,
            replicates,
            seed,
            args.design_seed.unwrap_or(1),
            args.max_seeds,
        )
        .map_err(CliError::Runtime)?;
        let note = format!(
            "non-monotone design found: design-seed {} after {} tries",
            outcome.design_seed, outcome.seeds_tried
        );
        Ok((outcome.rows, vec![note]))
    } else {
        let design = match (&args.design, args.design_seed) {
            (Some(spec), None) => parse_design_spec(spec)?,
            (None, Some(s)) => {
                experiments::gaussian_instance(SUBSET_DEFAULT_N, SUBSET_DEFAULT_P, s)
                    .map_err(|e| usage(format!("--design-seed: {e}")))?
                    .0
            }
            (None, None) => {
                return Err(usage(
                    "subset-curve needs --design, --design-seed, or --search",
                ))
            }
            (Some(_), Some(_)) => {
                return Err(usage("--design and --design-seed are mutually exclusive"))
            }
        };
        let mu = experiments::standardized_mean(&design)
            .map_err(|e| usage(format!("--design: {e}")))?;
        let ks = parse_ks(args.k.as_deref(), design.p())?;
        let rows = run_subset_curve(&design, &mu, method, &ks, replicates, seed)
            .map_err(CliError::Runtime)?;
        Ok((rows, Vec::new()))
    }
}

fn run_divergence_cmd(
    args: &DivergenceArgs,
    replicates: u64,
    seed: u64,
) -> Result<(Vec<ExperimentRow>, Vec<String>), CliError> {
    let sigmas = parse_f64_list(&args.sigma_values)
        .map_err(|e| usage(format!("--sigma-values: {e}")))?;
    for &s in &sigmas {
        if !(s > 0.0 && s.is_finite()) {
            return Err(usage(format!(
                "--sigma-values entries must be finite and > 0, got {s}"
            )));
        }
    }
    let points = match &args.points {
        None => experiments::default_divergence_points(),
        Some(spec) => {
            let path = spec
                .strip_prefix("file=")
                .unwrap_or(spec.as_str());
            load_points_csv(Path::new(path))?
        }
    };
    let dim = points[0].len();
    let mu = match &args.mu {
        Some(text) => {
            DVector::from_vec(parse_f64_list(text).map_err(|e| usage(format!("--mu: {e}")))?)
        }
        None => DVector::zeros(dim),
    };
    if mu.len() != dim {
        return Err(usage(format!(
            "--mu has length {} but the points have dimension {dim}",
            mu.len()
        )));
    }
    let rows = run_divergence(&sigmas, &points, &mu, replicates, seed).map_err(CliError::Runtime)?;
    Ok((rows, Vec::new()))
}

// ---------------------------------------------------------------------------
// Spec parsing
// ---------------------------------------------------------------------------

fn parse_f64_list(text: &str) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}")))
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err("expected at least one value".into());
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(vals)
}

fn parse_pair(text: &str) -> Result<(f64, f64), String> {
    let vals = parse_f64_list(text)?;
    if vals.len() != 2 {
        return Err(format!("expected lo,hi, got {} values", vals.len()));
    }
    Ok((vals[0], vals[1]))
}

fn parse_ks(text: Option<&str>, p: usize) -> Result<Vec<usize>, CliError> {
    match text {
        None => Ok((0..=p).collect()),
        Some(t) => {
            let ks: Result<Vec<usize>, _> = t
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad k {s:?}: {e}")))
                .collect();
            let ks = ks.map_err(|e| usage(format!("--k: {e}")))?;
            if ks.is_empty() {
                return Err(usage("--k: expected at least one value"));
            }
            if let Some(&bad) = ks.iter().find(|&&k| k > p) {
                return Err(usage(format!("--k: {bad} exceeds p = {p}")));
            }
            Ok(ks)
        }
    }
}

/// Parses "key=value,key=value" parameter tails of fitter/design specs.
fn parse_kv(tail: &str) -> Result<Vec<(String, String)>, String> {
    tail.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn kv_get<'a>(kvs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    kvs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Builds a design matrix from csv:PATH or gaussian:n=N,p=P,seed=S.
pub fn parse_design_spec(spec: &str) -> Result<DesignMatrix, CliError> {
    if let Some(path) = spec.strip_prefix("csv:") {
        return load_design_csv(Path::new(path));
    }
    if let Some(tail) = spec.strip_prefix("gaussian:") {
        let kvs = parse_kv(tail).map_err(|e| usage(format!("--design: {e}")))?;
        let n: usize = kv_get(&kvs, "n")
            .ok_or_else(|| usage("--design gaussian: missing n"))?
            .parse()
            .map_err(|e| usage(format!("--design gaussian: bad n: {e}")))?;
        let p: usize = kv_get(&kvs, "p")
            .ok_or_else(|| usage("--design gaussian: missing p"))?
            .parse()
            .map_err(|e| usage(format!("--design gaussian: bad p: {e}")))?;
        let seed: u64 = kv_get(&kvs, "seed")
            .ok_or_else(|| usage("--design gaussian: missing seed"))?
            .parse()
            .map_err(|e| usage(format!("--design gaussian: bad seed: {e}")))?;
        let (design, _) = experiments::gaussian_instance(n, p, seed)
            .map_err(|e| usage(format!("--design: {e}")))?;
        return Ok(design);
    }
    Err(usage(format!(
        "--design: expected csv:PATH or gaussian:n=..,p=..,seed=.., got {spec:?}"
    )))
}

/// Builds a fitter from its mini-language spec. A best-subset spec with no
/// design reduces to the identity-design specialization (axis subset).
pub fn build_fitter(
    spec: &str,
    design: Option<&DesignMatrix>,
    mu_len: usize,
) -> Result<Fitter, CliError> {
    let (kind, tail) = match spec.split_once(':') {
        Some((k, t)) => (k, Some(t)),
        None => (spec, None),
    };
    let kvs = match tail {
        Some(t) => parse_kv(t).map_err(|e| usage(format!("--fitter: {e}")))?,
        None => Vec::new(),
    };
    let need_design = || -> Result<DesignMatrix, CliError> {
        design
            .cloned()
            .ok_or_else(|| usage(format!("--fitter {kind} requires --design")))
    };
    let need_k = || -> Result<usize, CliError> {
        kv_get(&kvs, "k")
            .ok_or_else(|| usage(format!("--fitter {kind}: missing k")))?
            .parse::<usize>()
            .map_err(|e| usage(format!("--fitter {kind}: bad k: {e}")))
    };
    let fitter = match kind {
        "ols" => Fitter::ols(need_design()?),
        "ridge" => {
            let lambda: f64 = kv_get(&kvs, "lambda")
                .ok_or_else(|| usage("--fitter ridge: missing lambda"))?
                .parse()
                .map_err(|e| usage(format!("--fitter ridge: bad lambda: {e}")))?;
            Fitter::ridge(need_design()?, lambda)
        }
        "bsr" => {
            let k = need_k()?;
            match design {
                Some(d) => Fitter::best_subset(d.clone(), k),
                // identity design: best subset is keep-the-k-largest
                None => Fitter::axis_subset(mu_len, k),
            }
        }
        "fsr" => Fitter::forward_stepwise(need_design()?, need_k()?),
        "axis" => Fitter::axis_subset(mu_len, need_k()?),
        "points" => {
            let path = kv_get(&kvs, "file")
                .ok_or_else(|| usage("--fitter points: missing file"))?;
            Fitter::point_set(load_points_csv(Path::new(path))?)
        }
        other => {
            return Err(usage(format!(
                "--fitter: unknown kind {other:?} (expected ols, ridge, bsr, fsr, axis, points)"
            )))
        }
    };
    fitter.map_err(|e| usage(format!("--fitter: {e}")))
}

fn load_numeric_csv(path: &Path, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("{what}: cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect();
        let row = row.map_err(|e| {
            usage(format!(
                "{what}: {} line {}: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(usage(format!(
                    "{what}: {} line {}: expected {} fields, got {}",
                    path.display(),
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(usage(format!("{what}: {} is empty", path.display())));
    }
    Ok(rows)
}

fn load_design_csv(path: &Path) -> Result<DesignMatrix, CliError> {
    let rows = load_numeric_csv(path, "--design csv")?;
    let n = rows.len();
    let p = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    DesignMatrix::from_rows(n, p, &flat).map_err(|e| usage(format!("--design csv: {e}")))
}

fn load_points_csv(path: &Path) -> Result<Vec<DVector<f64>>, CliError> {
    let rows = load_numeric_csv(path, "points file")?;
    Ok(rows.into_iter().map(DVector::from_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(args)
    }

    #[test]
    fn scaling_round_trip() {
        let cli = parse(&[
            "dfmc",
            "scaling",
            "--A-values",
            "100,1000,10000",
            "--replicates",
            "100000",
            "--seed",
            "7",
            "--out",
            "s.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Scaling(args) => {
                assert_eq!(args.a_values, "100,1000,10000");
                assert_eq!(args.common.seed, 7);
                assert_eq!(args.common.replicates, Some(100000));
                assert_eq!(args.common.out, PathBuf::from("s.csv"));
            }
            other => panic!("wrong command {other:?}"),
        }
    }

    #[test]
    fn bsr_without_design_reduces_to_axis() {
        let fitter = build_fitter("bsr:k=1", None, 2).unwrap();
        assert!(matches!(fitter, Fitter::AxisSubset { n: 2, k: 1 }));
    }

    #[test]
    fn unknown_flag_is_an_error() {
        assert!(parse(&["dfmc", "scaling", "--out", "s.csv", "--bogus", "1"]).is_err());
    }

    #[test]
    fn unknown_fitter_kind_named_in_error() {
        let err = build_fitter("lasso:s=1", None, 2).unwrap_err();
        assert!(err.to_string().contains("lasso"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn heatmap_zero_step_rejected() {
        let cli = parse(&[
            "dfmc",
            "heatmap",
            "--grid-step",
            "0",
            "--out",
            "h.csv",
            "--replicates",
            "10",
        ])
        .unwrap();
        let err = execute(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--grid-step"));
    }

    #[test]
    fn estimate_requires_mu_or_design() {
        let cli = parse(&[
            "dfmc",
            "estimate",
            "--fitter",
            "ols",
            "--out",
            "e.csv",
        ])
        .unwrap();
        let err = execute(cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_lists() {
        assert_eq!(parse_f64_list("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_f64_list("1,x").is_err());
        assert_eq!(parse_pair("-5,5").unwrap(), (-5.0, 5.0));
        assert!(parse_pair("1,2,3").is_err());
    }

    #[test]
    fn design_spec_gaussian() {
        let d = parse_design_spec("gaussian:n=10,p=3,seed=4").unwrap();
        assert_eq!((d.n(), d.p()), (10, 3));
        assert!(parse_design_spec("nope:1").is_err());
    }
}
