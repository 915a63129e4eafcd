//! Command-line front end. Everything that touches the file system lives
//! here; exit codes are 0 (success), 1 (invalid input) and 2 (numerical
//! failure).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::chaos::{truncated_samples, truncation_table, ChaosQuadrature};
use crate::gaussian::{GaussianStream, SeedPath};
use crate::kernels::{probe_points, KernelEval, ModelKind};
use crate::observables::{RegionSpec, TestFunction};
use crate::report::{serialize_report, write_report, Format};
use crate::sampler::SectionSampler;
use crate::stats::{
    ols_slope, run_campaign, variance_exponent_fit, variance_oracle_smooth, variance_prediction, CampaignConfig,
    DegreeSection, ExperimentReport, Statistic, StatsError, Summary, MIN_FIT_DEGREES,
};
use crate::wick::{enumerate_diagrams, wick_moment, wick_moment_by_isserlis, DIAGRAM_MAX_SLOTS, WICK_MAX_ORDER};

pub const THREADS_ENV: &str = "ZEROSCOPE_THREADS";
/// Tolerance of the Wick/Isserlis agreement check.
pub const WICK_TOLERANCE: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(
    name = "zeroscope",
    version,
    about = "Monte Carlo experiments on zeros of Gaussian random sections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Diagram counts and Wick moments against Isserlis expansions.
    WickVerify(WickArgs),
    /// Near-diagonal scaling deficit and closed-form kernel checks.
    KernelScaling(ScalingArgs),
    /// Empirical field covariance against the normalized kernel.
    FieldCov(FieldCovArgs),
    /// Distribution of one statistic at one degree.
    Clt(CltArgs),
    /// Variance of one statistic across degrees, with the log-log slope.
    Variance(VarianceArgs),
    /// Chaos truncation table.
    Chaos(ChaosArgs),
    /// Common zeros of two sections of the product model.
    Intersect(IntersectArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output path; JSON goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    pub format: Format,
    /// Worker threads (falls back to ZEROSCOPE_THREADS).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Flat `key=value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatKind {
    Smooth,
    Numerical,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct WickArgs {
    /// Bound on Σα_i.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=i64::from(DIAGRAM_MAX_SLOTS)))]
    pub max_order: u32,
    /// Largest number of vertices.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub max_vertices: u32,
    /// Random correlation matrices per vertex count.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub matrices: u32,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct ScalingArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long, default_value = "100,400", value_parser = parse_degrees)]
    pub degrees: Degrees,
    /// Bound on |u| and |v|.
    #[arg(long, default_value_t = 3.0)]
    pub reach: f64,
    /// Lattice side of the (u, v) grid.
    #[arg(long, default_value_t = 13)]
    pub side: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct FieldCovArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(short = 'N', long = "degree")]
    pub degree: u32,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct StatArgs {
    #[arg(long, value_enum)]
    pub stat: StatKind,
    /// Test function, e.g. `gauss:0:1`, `poly4:0.5,0:1`.
    #[arg(long, value_parser = parse_phi)]
    pub phi: Option<TestFunction>,
    /// Region, e.g. `disk:0:1`, `annulus:0:0.5:1`, `pdisk:0:1:0:1`.
    #[arg(long, value_parser = parse_region)]
    pub region: Option<RegionSpec>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct CltArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(short = 'N', long = "degree")]
    pub degree: u32,
    #[arg(long)]
    pub trials: usize,
    #[command(flatten)]
    pub stat: StatArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct VarianceArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long, value_parser = parse_degrees)]
    pub degrees: Degrees,
    #[arg(long)]
    pub trials: usize,
    #[command(flatten)]
    pub stat: StatArgs,
    /// Also evaluate the quadrature oracle and the second-order prediction.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct ChaosArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(short = 'N', long = "degree")]
    pub degree: u32,
    #[arg(long, value_parser = parse_phi)]
    pub phi: TestFunction,
    #[arg(long, default_value = "1,2,3,5,10", value_parser = parse_degrees)]
    pub truncations: Degrees,
    #[arg(long)]
    pub trials: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct IntersectArgs {
    #[arg(short = 'N', long = "degree")]
    pub degree: u32,
    #[arg(long)]
    pub trials: usize,
    /// Count zeros in this product region instead of all zeros.
    #[arg(long, value_parser = parse_region)]
    pub region: Option<RegionSpec>,
    /// Sum `φ(z)φ(w)` over zeros instead of counting.
    #[arg(long, value_parser = parse_phi, conflicts_with = "region")]
    pub phi: Option<TestFunction>,
    #[command(flatten)]
    pub common: Common,
}

/// Comma-separated positive integers.
#[derive(Clone, Debug, PartialEq)]
pub struct Degrees(pub Vec<u32>);

fn parse_degrees(s: &str) -> Result<Degrees, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(Degrees(v))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

fn parse_phi(s: &str) -> Result<TestFunction, String> {
    s.parse().map_err(|e: crate::observables::SpecError| e.to_string())
}

fn parse_region(s: &str) -> Result<RegionSpec, String> {
    s.parse().map_err(|e: crate::observables::SpecError| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::SolverFailureRate { .. }
            | StatsError::QuadratureNotConverged(_)
            | StatsError::NonPositiveVariance(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<crate::kernels::KernelError> for CliError {
    fn from(e: crate::kernels::KernelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<crate::observables::SpecError> for CliError {
    fn from(e: crate::observables::SpecError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<crate::wick::WickError> for CliError {
    fn from(e: crate::wick::WickError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::WickVerify(a) => &a.common,
            Command::KernelScaling(a) => &a.common,
            Command::FieldCov(a) => &a.common,
            Command::Clt(a) => &a.common,
            Command::Variance(a) => &a.common,
            Command::Chaos(a) => &a.common,
            Command::Intersect(a) => &a.common,
        }
    }
}

const SUBCOMMANDS: [&str; 7] = [
    "wick-verify",
    "kernel-scaling",
    "field-cov",
    "clt",
    "variance",
    "chaos",
    "intersect",
];

/// Turn a `key=value` file into flags placed right after the subcommand,
/// so that later command-line flags override them.
fn expand_config(argv: &[OsString], path: &PathBuf) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let key = if key == "N" { "degree" } else { key };
        if key == "config" || key.is_empty() || key.starts_with('-') {
            return Err(CliError::Validation(format!(
                "config line {}: bad key `{key}`",
                lineno + 1
            )));
        }
        match value {
            "true" if key == "oracle" => flags.push(OsString::from("--oracle")),
            "false" if key == "oracle" => {}
            _ => flags.push(OsString::from(format!("--{key}={value}"))),
        }
    }
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.iter().any(|s| a == s))
        .ok_or_else(|| CliError::Validation("missing subcommand".into()))?;
    let mut out = argv[..=at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

/// `--config` has to be found before parsing, since the file may supply
/// required flags.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

fn parse(argv: &[OsString]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(argv)
}

fn thread_count(common: &Common) -> Result<Option<usize>, CliError> {
    if let Some(k) = common.threads {
        return Ok(Some(k as usize));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Some(k)),
            _ => Err(CliError::Validation(format!(
                "{THREADS_ENV}={v} is not a positive integer"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Entry point shared by the binary and the tests. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match config_path(&argv) {
        Some(path) => match expand_config(&argv, &path) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("zeroscope: {e}");
                return e.exit_code();
            }
        },
        None => argv,
    };
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(e) => return report_clap(e),
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("zeroscope: {e}");
            e.exit_code()
        }
    }
}

fn report_clap(e: clap::Error) -> i32 {
    use clap::error::ErrorKind;
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    let common = cmd.common();
    if common.format == Format::Csv && common.out.is_none() {
        return Err(CliError::Validation("csv output needs --out".into()));
    }
    let work = || -> Result<ExperimentReport, CliError> {
        match cmd {
            Command::WickVerify(a) => wick_verify(a),
            Command::KernelScaling(a) => kernel_scaling(a),
            Command::FieldCov(a) => field_cov(a),
            Command::Clt(a) => clt(a),
            Command::Variance(a) => variance(a),
            Command::Chaos(a) => chaos(a),
            Command::Intersect(a) => intersect(a),
        }
    };
    let report = match thread_count(common)? {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Validation(e.to_string()))?
            .install(work),
        None => work(),
    }?;
    emit(&report, common)?;
    check_report(&report)
}

/// Internal assertions recorded by the commands in `config.checks_passed`;
/// the report is still written when one fails.
fn check_report(report: &ExperimentReport) -> Result<(), CliError> {
    match report.config.get("checks_passed") {
        Some(Value::Bool(false)) => Err(CliError::Numerical(
            "internal check failed; see the report table".into(),
        )),
        _ => Ok(()),
    }
}

fn emit(report: &ExperimentReport, common: &Common) -> Result<(), CliError> {
    match &common.out {
        Some(path) => write_report(report, path, common.format).map_err(|e| CliError::Validation(e.to_string())),
        None => {
            let bytes = serialize_report(report, Format::Json).map_err(|e| CliError::Validation(e.to_string()))?;
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Validation(e.to_string()))
        }
    }
}

fn base_config(command: &str, common: &Common) -> BTreeMap<String, Value> {
    let mut c = BTreeMap::new();
    c.insert("command".into(), json!(command));
    c.insert("seed".into(), json!(common.seed));
    c.insert("format".into(), json!(common.format.to_string()));
    c
}

fn statistic_of(model: ModelKind, stat: &StatArgs) -> Result<Statistic, CliError> {
    match stat.stat {
        StatKind::Smooth => {
            let phi = stat
                .phi
                .clone()
                .ok_or_else(|| CliError::Validation("--stat smooth needs --phi".into()))?;
            phi.validate()?;
            Ok(Statistic::Smooth(phi))
        }
        StatKind::Numerical => {
            let region = stat
                .region
                .clone()
                .ok_or_else(|| CliError::Validation("--stat numerical needs --region".into()))?;
            region.validate(model)?;
            Ok(Statistic::Numerical(region))
        }
    }
}

fn echo_statistic(c: &mut BTreeMap<String, Value>, st: &Statistic) {
    match st {
        Statistic::Smooth(phi) => {
            c.insert("stat".into(), json!("smooth"));
            c.insert("phi".into(), json!(phi.to_string()));
        }
        Statistic::Numerical(r) => {
            c.insert("stat".into(), json!("numerical"));
            c.insert("region".into(), json!(r.to_string()));
        }
        Statistic::Count => {
            c.insert("stat".into(), json!("count"));
        }
    }
}

fn wick_tuples(max_order: u32, max_vertices: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    fn extend(cur: &mut Vec<u32>, left: u32, p: usize, out: &mut Vec<Vec<u32>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for a in 1..=left {
            cur.push(a);
            extend(cur, left - a, p, out);
            cur.pop();
        }
    }
    for p in 1..=max_vertices as usize {
        extend(&mut Vec::new(), max_order, p, &mut out);
    }
    out
}

/// Random correlation matrix `D^{-1/2} G G* D^{-1/2}` with `G` a complex
/// Gaussian `p × (p + 1)` matrix.
pub fn random_correlation(p: usize, seed: SeedPath) -> DMatrix<Complex64> {
    let mut stream = GaussianStream::new(seed);
    let g = DMatrix::from_fn(p, p + 1, |_, _| stream.next_complex());
    let s = &g * g.adjoint();
    DMatrix::from_fn(p, p, |i, j| s[(i, j)] / (s[(i, i)].re * s[(j, j)].re).sqrt())
}

fn wick_verify(a: &WickArgs) -> Result<ExperimentReport, CliError> {
    let tuples = wick_tuples(a.max_order, a.max_vertices);
    let mut per_matrix = vec![0.0f64; a.matrices as usize];
    let mut table = Vec::new();
    let mut all_ok = true;
    for alphas in &tuples {
        let p = alphas.len();
        let count = enumerate_diagrams(alphas)?.len();
        let diffs: Vec<f64> = (0..a.matrices)
            .into_par_iter()
            .map(|m| -> Result<f64, CliError> {
                let rho = random_correlation(p, SeedPath::new(a.common.seed, u64::from(m), p as u64));
                Ok((wick_moment(alphas, &rho)? - wick_moment_by_isserlis(alphas, &rho)?).abs())
            })
            .collect::<Result<_, _>>()?;
        let worst = diffs.iter().cloned().fold(0.0, f64::max);
        for (slot, d) in per_matrix.iter_mut().zip(&diffs) {
            *slot = slot.max(*d);
        }
        all_ok &= worst <= WICK_TOLERANCE;
        table.push(json!({"alphas": alphas, "diagrams": count, "max_abs_diff": worst}));
    }
    let mut config = base_config("wick-verify", &a.common);
    config.insert("max_order".into(), json!(a.max_order));
    config.insert("max_vertices".into(), json!(a.max_vertices));
    config.insert("matrices".into(), json!(a.matrices));
    config.insert("tolerance".into(), json!(WICK_TOLERANCE));
    config.insert("checks_passed".into(), json!(all_ok));
    let mut report = ExperimentReport::new(config, per_matrix.into_iter().map(Some).collect(), a.common.seed);
    report.table = table;
    Ok(report)
}

fn kernel_scaling(a: &ScalingArgs) -> Result<ExperimentReport, CliError> {
    if !(a.reach > 0.0) || a.side < 2 {
        return Err(CliError::Validation("need reach > 0 and side ≥ 2".into()));
    }
    let mut table = Vec::new();
    let mut deficits = Vec::new();
    for &n in &a.degrees.0 {
        let kernel = KernelEval::new(a.model, n)?;
        let deficit = kernel.max_scaling_deficit(a.reach, a.side)?;
        let points = probe_points(a.model, 6);
        let mut closed_dev = 0.0f64;
        let mut bergman_dev = 0.0f64;
        for z in &points {
            bergman_dev = bergman_dev.max((kernel.bergman(z)? / kernel.bergman_exact() - 1.0).abs());
            for w in &points {
                closed_dev = closed_dev.max((kernel.rho(z, w)? - kernel.rho_series(z, w)?).norm());
            }
        }
        table.push(json!({
            "degree": n,
            "max_deficit": deficit,
            "closed_form_dev": closed_dev,
            "bergman_rel_dev": bergman_dev,
            "bergman_constant": kernel.bergman_exact(),
        }));
        deficits.push(deficit);
    }
    let mut config = base_config("kernel-scaling", &a.common);
    config.insert("model".into(), json!(a.model.to_string()));
    config.insert("degrees".into(), json!(a.degrees.0));
    config.insert("reach".into(), json!(a.reach));
    config.insert("side".into(), json!(a.side));
    let mut report = ExperimentReport::new(config, deficits.iter().map(|d| Some(*d)).collect(), a.common.seed);
    if deficits.len() >= 2 && deficits.iter().all(|d| *d > 0.0) {
        let logn: Vec<f64> = a.degrees.0.iter().map(|&n| f64::from(n).ln()).collect();
        let logd: Vec<f64> = deficits.iter().map(|d| d.ln()).collect();
        if let Some((s, e)) = ols_slope(&logn, &logd) {
            report.summary.slope = Some(s);
            report.summary.slope_stderr = Some(e);
        }
    }
    report.table = table;
    Ok(report)
}

/// Ten probe pairs at separations of order `1/√N` in the model metric.
pub fn covariance_pairs(model: ModelKind, degree: u32) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let points = probe_points(model, 4);
    let n = f64::from(degree);
    (0..10)
        .map(|k| {
            let z = points[(3 * k) % points.len()].clone();
            let step = (k as f64 + 1.0) / 10.0 * 2.0 / n.sqrt();
            let dir = Complex64::from_polar(1.0, k as f64);
            let w: Vec<Complex64> = z
                .iter()
                .map(|&c| {
                    let metric = match model.factor() {
                        ModelKind::Flat => 1.0,
                        ModelKind::Hyperbolic => 1.0 - c.norm_sqr(),
                        _ => 1.0 + c.norm_sqr(),
                    };
                    c + dir * step * metric
                })
                .collect();
            (z, w)
        })
        .collect()
}

/// Block size of the ordered reduction in [`field_covariance`].
const REDUCTION_BLOCK: usize = 1024;

/// `(1/T) Σ_t ξ_t(z) conj ξ_t(w)` for each pair, summed in trial order.
pub fn field_covariance(
    model: ModelKind,
    degree: u32,
    pairs: &[(Vec<Complex64>, Vec<Complex64>)],
    trials: usize,
    seed: u64,
) -> Result<Vec<Complex64>, CliError> {
    let sampler = SectionSampler::new(model, degree)?;
    let blocks = trials.div_ceil(REDUCTION_BLOCK);
    let partial: Vec<Vec<Complex64>> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<Complex64>, CliError> {
            let mut acc = vec![Complex64::new(0.0, 0.0); pairs.len()];
            for t in b * REDUCTION_BLOCK..((b + 1) * REDUCTION_BLOCK).min(trials) {
                let s = sampler.sample(SeedPath::new(seed, t as u64, 0));
                for (slot, (z, w)) in acc.iter_mut().zip(pairs) {
                    *slot += s.eval_field(z)? * s.eval_field(w)?.conj();
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;
    let mut total = vec![Complex64::new(0.0, 0.0); pairs.len()];
    for block in partial {
        for (t, v) in total.iter_mut().zip(block) {
            *t += v;
        }
    }
    Ok(total.into_iter().map(|v| v / trials as f64).collect())
}

fn field_cov(a: &FieldCovArgs) -> Result<ExperimentReport, CliError> {
    if a.trials == 0 {
        return Err(CliError::Validation("need at least one trial".into()));
    }
    let kernel = KernelEval::new(a.model, a.degree)?;
    let pairs = covariance_pairs(a.model, a.degree);
    let empirical = field_covariance(a.model, a.degree, &pairs, a.trials, a.common.seed)?;
    let bound = 5.0 / (a.trials as f64).sqrt();
    let mut table = Vec::new();
    let mut errors = Vec::new();
    for ((z, w), e) in pairs.iter().zip(&empirical) {
        let rho = kernel.rho(z, w)?;
        let err = (e - rho).norm();
        errors.push(err);
        let pt = |v: &[Complex64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        table.push(json!({
            "z": pt(z), "w": pt(w),
            "rho": [rho.re, rho.im],
            "empirical": [e.re, e.im],
            "abs_err": err,
            "bound": bound,
        }));
    }
    let mut config = base_config("field-cov", &a.common);
    config.insert("model".into(), json!(a.model.to_string()));
    config.insert("degree".into(), json!(a.degree));
    config.insert("trials".into(), json!(a.trials));
    config.insert("checks_passed".into(), json!(errors.iter().all(|e| *e <= bound)));
    let mut report = ExperimentReport::new(config, errors.into_iter().map(Some).collect(), a.common.seed);
    report.table = table;
    Ok(report)
}

fn campaign_report(
    command: &str,
    common: &Common,
    model: ModelKind,
    degree: u32,
    trials: usize,
    statistic: Statistic,
) -> Result<ExperimentReport, CliError> {
    let cfg = CampaignConfig {
        model,
        degree,
        trials,
        master_seed: common.seed,
        statistics: vec![statistic.clone()],
    };
    let outcome = run_campaign(&cfg)?;
    let mut config = base_config(command, common);
    config.insert("model".into(), json!(model.to_string()));
    config.insert("degree".into(), json!(degree));
    config.insert("trials".into(), json!(trials));
    echo_statistic(&mut config, &statistic);
    let per_trial = outcome.values[0].clone();
    if per_trial.iter().all(Option::is_none) {
        return Err(CliError::Validation("no successful trials".into()));
    }
    let mut report = ExperimentReport::new(config, per_trial, common.seed);
    report.table = vec![json!({
        "expected_mean": statistic.expected_mean(model, degree),
        "failed": outcome.failed,
        "boundary_degenerate": outcome.boundary_degenerate,
    })];
    Ok(report)
}

fn clt(a: &CltArgs) -> Result<ExperimentReport, CliError> {
    let statistic = statistic_of(a.model, &a.stat)?;
    campaign_report("clt", &a.common, a.model, a.degree, a.trials, statistic)
}

fn variance(a: &VarianceArgs) -> Result<ExperimentReport, CliError> {
    let statistic = statistic_of(a.model, &a.stat)?;
    let degrees = &a.degrees.0;
    if degrees.len() < MIN_FIT_DEGREES || degrees.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Validation(format!(
            "--degrees needs at least {MIN_FIT_DEGREES} increasing values"
        )));
    }
    let mut sections = Vec::new();
    let mut variances = Vec::new();
    let (mut trials, mut failed) = (0, 0);
    for &n in degrees {
        let cfg = CampaignConfig {
            model: a.model,
            degree: n,
            trials: a.trials,
            master_seed: a.common.seed,
            statistics: vec![statistic.clone()],
        };
        let outcome = run_campaign(&cfg)?;
        let summary = Summary::from_trials(&outcome.values[0], a.common.seed);
        trials += summary.trials;
        failed += summary.failed;
        variances.push(summary.var.unwrap_or(f64::NAN));
        let (oracle, prediction) = match (&statistic, a.oracle && a.model.dim() == 1) {
            (Statistic::Smooth(phi), true) => (
                Some(variance_oracle_smooth(
                    a.model,
                    n,
                    phi,
                    crate::kernels::Truncation::Full,
                )?),
                Some(variance_prediction(a.model, n, phi)),
            ),
            _ => (None, None),
        };
        sections.push(DegreeSection {
            degree: n,
            expected_mean: Some(statistic.expected_mean(a.model, n)),
            oracle,
            prediction,
            summary,
        });
    }
    let (slope, stderr) = variance_exponent_fit(degrees, &variances)?;
    let mut config = base_config("variance", &a.common);
    config.insert("model".into(), json!(a.model.to_string()));
    config.insert("degrees".into(), json!(degrees));
    config.insert("trials".into(), json!(a.trials));
    config.insert("oracle".into(), json!(a.oracle));
    echo_statistic(&mut config, &statistic);
    let mut report = ExperimentReport::new(config, Vec::new(), a.common.seed);
    report.summary.trials = trials;
    report.summary.failed = failed;
    report.summary.slope = Some(slope);
    report.summary.slope_stderr = Some(stderr);
    report.sections = sections;
    Ok(report)
}

fn chaos(a: &ChaosArgs) -> Result<ExperimentReport, CliError> {
    let orders = &a.truncations.0;
    if let Some(n) = orders.iter().find(|&&n| n > WICK_MAX_ORDER) {
        return Err(CliError::Validation(format!("truncation {n} exceeds {WICK_MAX_ORDER}")));
    }
    if a.trials < crate::stats::MIN_TRIALS {
        return Err(StatsError::TooFewTrials(a.trials).into());
    }
    let quadrature = ChaosQuadrature::new(a.model, a.degree, &a.phi)?;
    let samples = truncated_samples(&quadrature, orders, a.trials, a.common.seed)?;
    let rows = truncation_table(orders, &samples);
    let mut config = base_config("chaos", &a.common);
    config.insert("model".into(), json!(a.model.to_string()));
    config.insert("degree".into(), json!(a.degree));
    config.insert("phi".into(), json!(a.phi.to_string()));
    config.insert("truncations".into(), json!(orders));
    config.insert("trials".into(), json!(a.trials));
    let full: Vec<Option<f64>> = samples.iter().map(|s| s.last().copied()).collect();
    let mut report = ExperimentReport::new(config, full, a.common.seed);
    report.table = rows
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).unwrap_or(Value::Null);
            v["decomposition_gap"] = json!(r.decomposition_gap());
            v
        })
        .collect();
    Ok(report)
}

fn intersect(a: &IntersectArgs) -> Result<ExperimentReport, CliError> {
    let model = ModelKind::ProductElliptic2;
    let statistic = match (&a.region, &a.phi) {
        (Some(r), _) => {
            r.validate(model)?;
            Statistic::Numerical(r.clone())
        }
        (None, Some(phi)) => {
            phi.validate()?;
            Statistic::Smooth(phi.clone())
        }
        (None, None) => Statistic::Count,
    };
    let mut report = campaign_report("intersect", &a.common, model, a.degree, a.trials, statistic)?;
    let expected = 2 * a.degree as usize * a.degree as usize;
    if let Some(row) = report.table.first_mut() {
        let bad = row["failed"].as_u64().unwrap_or(0) + row["boundary_degenerate"].as_u64().unwrap_or(0);
        row["expected_zero_count"] = json!(expected);
        row["full_count_fraction"] = json!(1.0 - bad as f64 / a.trials as f64);
    }
    Ok(report)
}
