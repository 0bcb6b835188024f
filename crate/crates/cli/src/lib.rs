//! Command-line front end for `slepian_core`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use slepian_core::boundary::{approximate, ApproxMode, BoundaryFile, PieceRecord};
use slepian_core::bridge::{noncross_affine_with_tol, noncross_constant, AFFINE_TOL};
use slepian_core::engine::{bcp_montecarlo, bcp_nested, bcp_quadrature};
use slepian_core::oracle::{empirical_bcp, empirical_bridge_noncross, simulate_paths};
use slepian_core::{Boundary, Bridge, Estimate64, Grid, Method, Params, Simulation, VectorSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] slepian_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 3 for numerical non-convergence, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(slepian_core::Error::NonConvergence { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "slepian", version, about = "Boundary crossing probabilities for (q,d)-Slepian processes")]
pub struct Cli {
    /// Worker threads for the parallel estimators (results do not depend on it).
    #[arg(long, global = true, env = "SLEPIAN_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crossing probability of a boundary by quadrature, nested quadrature or Monte Carlo.
    Compute(ComputeArgs),
    /// Crossing probability from brute-force path simulation.
    Oracle(OracleArgs),
    /// Non-crossing probability of a pinned bridge under one affine piece.
    Bridge(BridgeArgs),
    /// Joint density of the process at given times.
    Density(DensityArgs),
    /// Crossing probabilities of piecewise-affine approximations with increasing piece counts.
    Converge(ConvergeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineMethod {
    Quad,
    Nested,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BridgeMethod {
    Analytic,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Interpolate,
    PiecewiseConstant,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Constant boundary value.
    #[arg(long, conflicts_with_all = ["affine_boundary", "boundary"])]
    pub const_boundary: Option<f64>,
    /// Single affine piece `b,a`: g(t) = b + a (t - q).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "boundary")]
    pub affine_boundary: Option<Vec<f64>>,
    /// JSON boundary file.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write records here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    pub boundary: BoundaryArgs,
    /// `auto` (boundary knots), an equidistant count, or a comma-separated time list.
    #[arg(long, default_value = "auto")]
    pub partition: String,
    #[arg(long, value_enum, default_value = "quad")]
    pub method: EngineMethod,
    /// Quadrature tolerance (quad, nested); default 1e-6.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Monte-Carlo samples (mc); default 100000.
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Monte-Carlo seed (mc); default 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    pub boundary: BoundaryArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write simulated paths as CSV to this file.
    #[arg(long)]
    pub dump_paths: Option<PathBuf>,
    /// Number of paths written by `--dump-paths`.
    #[arg(long, default_value_t = 1000)]
    pub dump_limit: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub t_start: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x_start: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x_end: f64,
    /// Boundary value at `t_start`.
    #[arg(long, allow_negative_numbers = true)]
    pub intercept: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub slope: f64,
    #[arg(long, value_enum, default_value = "analytic")]
    pub method: BridgeMethod,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub times: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Polynomial coefficients `c0,c1,…` of g(t) = Σ c_k t^k.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "boundary")]
    pub poly: Option<Vec<f64>>,
    /// Function file (`{"polynomial": [...]}`) or boundary file to approximate.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    pub pieces: Vec<usize>,
    #[arg(long, value_enum, default_value = "interpolate")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "nested")]
    pub method: EngineMethod,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// One emitted result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub value: f64,
    pub error: f64,
    pub method: String,
    pub q: f64,
    pub d: f64,
    pub partition: Vec<f64>,
    pub boundary_digest: Option<String>,
    pub seed: Option<u64>,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub richardson: Option<f64>,
}

impl Record {
    fn new(est: &Estimate64, params: &Params, partition: Vec<f64>, digest: Option<String>, wall_time: f64) -> Self {
        Self {
            value: est.value,
            error: est.error,
            method: est.method.to_string(),
            q: params.q(),
            d: params.d(),
            partition,
            boundary_digest: digest,
            seed: est.seed,
            wall_time,
            grid_step: None,
            pieces: None,
            richardson: None,
        }
    }
}

pub const CSV_HEADER: &str = "value,error,method,q,d,partition,boundary_digest,seed,wall_time,grid_step,pieces,richardson";

fn csv_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// CSV row matching [`CSV_HEADER`]; floats carry 17 significant digits and
/// the partition is `;`-separated.
pub fn csv_row(r: &Record) -> String {
    let partition: Vec<String> = r.partition.iter().map(|&t| csv_num(t)).collect();
    [
        csv_num(r.value),
        csv_num(r.error),
        r.method.clone(),
        csv_num(r.q),
        csv_num(r.d),
        partition.join(";"),
        r.boundary_digest.clone().unwrap_or_default(),
        csv_opt(r.seed, |s| s.to_string()),
        csv_num(r.wall_time),
        csv_opt(r.grid_step, csv_num),
        csv_opt(r.pieces, |p| p.to_string()),
        csv_opt(r.richardson, csv_num),
    ]
    .join(",")
}

pub fn render(records: &[Record], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Json => {
            for r in records {
                out.push_str(&serde_json::to_string(r).expect("record serializes"));
                out.push('\n');
            }
        }
        Format::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in records {
                out.push_str(&csv_row(r));
                out.push('\n');
            }
        }
    }
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// SHA-256 of the canonical boundary JSON.
pub fn boundary_digest(boundary: &Boundary) -> String {
    digest_of(&BoundaryFile::from_boundary(boundary).to_json())
}

fn digest_of(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn params_from(process: &ProcessArgs) -> Result<Params> {
    match (process.q, process.d) {
        (Some(q), Some(d)) => Ok(Params::new(q, d)?),
        _ => usage("--q and --d are required"),
    }
}

/// Parameters given on the command line must agree with a file's.
fn reconcile(process: &ProcessArgs, file_params: Params) -> Result<Params> {
    let matches = |flag: Option<f64>, value: f64| flag.is_none_or(|f| f == value);
    if !matches(process.q, file_params.q()) || !matches(process.d, file_params.d()) {
        return usage(format!(
            "--q/--d disagree with the boundary file (q={}, d={})",
            file_params.q(),
            file_params.d()
        ));
    }
    Ok(file_params)
}

pub fn load_boundary(process: &ProcessArgs, args: &BoundaryArgs) -> Result<Boundary> {
    if let Some(path) = &args.boundary {
        let file = BoundaryFile::parse(&read(path)?)?;
        let boundary = file.into_boundary()?;
        reconcile(process, *boundary.params())?;
        return Ok(boundary);
    }
    let params = params_from(process)?;
    if let Some(b) = args.const_boundary {
        return Ok(Boundary::constant(params, b)?);
    }
    if let Some(ba) = &args.affine_boundary {
        if ba.len() != 2 {
            return usage("--affine-boundary takes exactly two values: intercept,slope");
        }
        return Ok(Boundary::affine(params, ba[0], ba[1])?);
    }
    usage("one of --const-boundary, --affine-boundary or --boundary is required")
}

pub fn parse_partition(spec: &str, boundary: &Boundary) -> Result<Grid> {
    let spec = spec.trim();
    if spec == "auto" {
        return Ok(Grid::from_boundary(boundary));
    }
    let params = *boundary.params();
    if !spec.contains(',') {
        if let Ok(n) = spec.parse::<usize>() {
            let grid = Grid::equidistant(params, n)?;
            // Boundary knots must be present; merge them in.
            return Ok(Grid::with_boundary_knots(boundary, grid.times())?);
        }
    }
    let times = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| CliError::Usage(format!("bad --partition '{spec}': {e}")))?;
    let grid = Grid::new(params, times)?;
    for knot in boundary.knots() {
        if !grid.times().contains(&knot) {
            return Err(slepian_core::Error::KnotMismatch(knot).into());
        }
    }
    Ok(grid)
}

struct EngineSettings {
    method: EngineMethod,
    tol: f64,
    n_paths: usize,
    seed: u64,
}

fn engine_settings(method: EngineMethod, tol: Option<f64>, n_paths: Option<usize>, seed: Option<u64>) -> Result<EngineSettings> {
    match method {
        EngineMethod::Mc if tol.is_some() => return usage("--tol applies to quad and nested only"),
        EngineMethod::Quad | EngineMethod::Nested if n_paths.is_some() || seed.is_some() => {
            return usage("--n-paths and --seed apply to mc only")
        }
        _ => {}
    }
    Ok(EngineSettings {
        method,
        tol: tol.unwrap_or(1e-6),
        n_paths: n_paths.unwrap_or(100_000),
        seed: seed.unwrap_or(0),
    })
}

fn evaluate(boundary: &Boundary, partition: &Grid, s: &EngineSettings) -> Result<Estimate64> {
    Ok(match s.method {
        EngineMethod::Quad => bcp_quadrature(boundary, partition, s.tol)?,
        EngineMethod::Nested => bcp_nested(boundary, partition, s.tol)?,
        EngineMethod::Mc => bcp_montecarlo(boundary, partition, s.n_paths, s.seed)?,
    })
}

fn compute(args: &ComputeArgs) -> Result<Vec<Record>> {
    let settings = engine_settings(args.method, args.tol, args.n_paths, args.seed)?;
    let boundary = load_boundary(&args.process, &args.boundary)?;
    let partition = parse_partition(&args.partition, &boundary)?;
    let start = Instant::now();
    let est = evaluate(&boundary, &partition, &settings)?;
    Ok(vec![Record::new(
        &est,
        boundary.params(),
        partition.times().to_vec(),
        Some(boundary_digest(&boundary)),
        start.elapsed().as_secs_f64(),
    )])
}

fn oracle(args: &OracleArgs) -> Result<Vec<Record>> {
    let boundary = load_boundary(&args.process, &args.boundary)?;
    let cfg = Simulation::new(*boundary.params(), args.grid_step, args.n_paths, args.seed)?;
    let start = Instant::now();
    let est = empirical_bcp(&cfg, &boundary)?;
    let wall = start.elapsed().as_secs_f64();
    if let Some(path) = &args.dump_paths {
        let mut file = io::BufWriter::new(create(path)?);
        simulate_paths(&cfg)
            .write_csv(&mut file, args.dump_limit)
            .and_then(|_| file.flush())
            .map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
    }
    let p = *boundary.params();
    let mut record = Record::new(&est, &p, vec![p.q(), p.d()], Some(boundary_digest(&boundary)), wall);
    record.grid_step = Some(args.grid_step);
    Ok(vec![record])
}

fn bridge(args: &BridgeArgs) -> Result<Vec<Record>> {
    let params = params_from(&args.process)?;
    let spec = Bridge::new(params, args.t_start, args.t_end, args.x_start, args.x_end)?;
    let piece = PieceRecord {
        t_start: args.t_start,
        t_end: args.t_end,
        intercept: args.intercept,
        slope: args.slope,
    };
    let digest = digest_of(&serde_json::to_string(&piece).expect("piece serializes"));
    let start = Instant::now();
    let (est, grid_step) = match args.method {
        BridgeMethod::Analytic => {
            if args.grid_step.is_some() || args.n_paths.is_some() || args.seed.is_some() {
                return usage("--grid-step, --n-paths and --seed apply to --method oracle only");
            }
            let est = if args.slope == 0.0 && args.tol.is_none() {
                constant_bridge(&spec, args.intercept)?
            } else {
                let tol = args.tol.unwrap_or(AFFINE_TOL);
                let r = noncross_affine_with_tol(&spec, args.intercept, args.slope, tol)?;
                Estimate64 {
                    value: r.value,
                    error: r.error_bound,
                    method: Method::Quadrature,
                    evaluations: r.evaluations,
                    seed: None,
                }
            };
            (est, None)
        }
        BridgeMethod::Oracle => {
            if args.tol.is_some() {
                return usage("--tol applies to --method analytic only");
            }
            let step = args.grid_step.unwrap_or(1e-3);
            let est = empirical_bridge_noncross(
                &spec,
                args.intercept,
                args.slope,
                args.n_paths.unwrap_or(100_000),
                step,
                args.seed.unwrap_or(0),
            )?;
            (est, Some(step))
        }
    };
    let mut record = Record::new(
        &est,
        &params,
        vec![args.t_start, args.t_end],
        Some(digest),
        start.elapsed().as_secs_f64(),
    );
    record.grid_step = grid_step;
    Ok(vec![record])
}

/// Closed-form constant case; pins at or above the boundary give 0.
fn constant_bridge(spec: &Bridge, b: f64) -> Result<Estimate64> {
    let value = if spec.x_start() >= b || spec.x_end() >= b {
        0.0
    } else {
        noncross_constant(spec, b)?
    };
    Ok(Estimate64 {
        value,
        error: 0.0,
        method: Method::ClosedForm,
        evaluations: 1,
        seed: None,
    })
}

fn density(args: &DensityArgs) -> Result<Vec<Record>> {
    let params = params_from(&args.process)?;
    if args.times.len() != args.values.len() {
        return usage("--times and --values must have the same length");
    }
    let spec = VectorSpec::new(params, args.times.clone())?;
    let start = Instant::now();
    let value = slepian_core::fdd_density(&spec, &args.values)?;
    let est = Estimate64 {
        value,
        error: 0.0,
        method: Method::ClosedForm,
        evaluations: 1,
        seed: None,
    };
    Ok(vec![Record::new(&est, &params, args.times.clone(), None, start.elapsed().as_secs_f64())])
}

/// Boundary function for `converge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
    /// Coefficients `c0, c1, …` of `Σ c_k t^k`.
    pub polynomial: Vec<f64>,
}

enum Target {
    Polynomial(Vec<f64>),
    Boundary(Boundary),
}

impl Target {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Target::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            Target::Boundary(b) => b.evaluate(t).unwrap_or(f64::NAN),
        }
    }
}

fn converge_target(args: &ConvergeArgs) -> Result<(Params, Target)> {
    if let Some(coeffs) = &args.poly {
        return Ok((params_from(&args.process)?, Target::Polynomial(coeffs.clone())));
    }
    let Some(path) = &args.boundary else {
        return usage("one of --poly or --boundary is required");
    };
    let text = read(path)?;
    if let Ok(f) = serde_json::from_str::<FunctionFile>(&text) {
        let process = ProcessArgs {
            q: args.process.q.or(f.q),
            d: args.process.d.or(f.d),
        };
        if let (Some(q), Some(d)) = (f.q, f.d) {
            reconcile(&args.process, Params::new(q, d)?)?;
        }
        return Ok((params_from(&process)?, Target::Polynomial(f.polynomial)));
    }
    let boundary = BoundaryFile::parse(&text)?.into_boundary()?;
    let params = reconcile(&args.process, *boundary.params())?;
    Ok((params, Target::Boundary(boundary)))
}

fn converge(args: &ConvergeArgs) -> Result<Vec<Record>> {
    let settings = engine_settings(args.method, args.tol, args.n_paths, args.seed)?;
    if args.pieces.is_empty() || args.pieces.contains(&0) {
        return usage("--pieces must be positive counts");
    }
    if args.pieces.windows(2).any(|w| w[1] <= w[0]) {
        return usage("--pieces must be strictly increasing");
    }
    let (params, target) = converge_target(args)?;
    let mode = match args.mode {
        Mode::Interpolate => ApproxMode::Interpolate,
        Mode::PiecewiseConstant => ApproxMode::PiecewiseConstant,
    };
    let mut records: Vec<Record> = Vec::new();
    for &n in &args.pieces {
        let boundary = approximate(params, |t| target.eval(t), n, mode)?;
        let partition = Grid::from_boundary(&boundary);
        let start = Instant::now();
        let est = evaluate(&boundary, &partition, &settings)?;
        let mut record = Record::new(
            &est,
            &params,
            partition.times().to_vec(),
            Some(boundary_digest(&boundary)),
            start.elapsed().as_secs_f64(),
        );
        record.pieces = Some(n);
        if let Some(prev) = records.last() {
            // Second-order extrapolation in the piece width.
            let ratio = n as f64 / prev.pieces.expect("converge records carry pieces") as f64;
            record.richardson = Some(est.value + (est.value - prev.value) / (ratio * ratio - 1.0));
        }
        records.push(record);
    }
    Ok(records)
}

fn output_of(command: &Command) -> &OutputArgs {
    match command {
        Command::Compute(a) => &a.output,
        Command::Oracle(a) => &a.output,
        Command::Bridge(a) => &a.output,
        Command::Density(a) => &a.output,
        Command::Converge(a) => &a.output,
    }
}

pub fn records(command: &Command) -> Result<Vec<Record>> {
    match command {
        Command::Compute(a) => compute(a),
        Command::Oracle(a) => oracle(a),
        Command::Bridge(a) => bridge(a),
        Command::Density(a) => density(a),
        Command::Converge(a) => converge(a),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return usage("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let records = records(&cli.command)?;
    let out = output_of(&cli.command);
    let text = render(&records, out.format);
    match &out.output {
        Some(path) => create(path)?.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}
