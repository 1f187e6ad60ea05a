//! `wassbound`: batch front end. Every subcommand prints one JSON report
//! embedding its resolved configuration; `replay` re-runs such a report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod experiments;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use experiments::{
    BoundConfig, ChatterjeeConfig, Experiment, GaussianPairConfig, GridConfig, MalliavinConfig, ModelConfig,
    RatesConfig, Report, SimulateConfig, SteinCheckConfig,
};
use wassbound::finite_gaussian::FunctionSpec;
use wassbound::quadrature::QuadratureSpec;
use wassbound::{CovarianceMatrix, Error};

#[derive(Parser)]
#[command(name = "wassbound", version, about = "Stein–Malliavin Wasserstein bounds and their Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Wasserstein bound for the Breuer–Major increment vector at one n.
    Bound(BoundArgs),
    /// Bound curve over several n and its fitted log-log slope.
    Rates(RatesArgs),
    /// Monte Carlo replications of the increment vector.
    Simulate(SimulateArgs),
    /// Pathwise Malliavin inner products against the pair estimates.
    Malliavin(SimulateArgs),
    /// Hessian sup-bound and equation residual of the Stein solution on a grid.
    SteinCheck(SteinArgs),
    /// Bound for a smooth function of a Gaussian vector.
    Chatterjee(ChatterjeeArgs),
    /// Bound between two centered Gaussian laws.
    GaussianPair(PairArgs),
    /// Re-run the configuration embedded in a report.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Model {
    /// Hurst index.
    #[arg(long = "H")]
    hurst: f64,
    /// Hermite rank.
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Increasing times; t0 = 0 is implied.
    #[arg(long, default_value = "1,2")]
    times: String,
}

#[derive(Args)]
struct Targets {
    /// Target covariance C as JSON (rows array or {"dim","rows"}).
    #[arg(long = "C")]
    c: Option<String>,
    /// Covariance K of the input Gaussian vector, as JSON.
    #[arg(long = "K")]
    k: Option<String>,
    /// JSON file with optional "C" and "K" entries.
    #[arg(long)]
    matrix_file: Option<PathBuf>,
}

#[derive(Args)]
struct Quadrature {
    #[arg(long, default_value_t = wassbound::quadrature::DEFAULT_U_NODES)]
    quad_unodes: usize,
    #[arg(long, default_value_t = wassbound::quadrature::DEFAULT_GH_ORDER)]
    quad_gh_order: usize,
    /// Force Monte Carlo of this size for the inner Gaussian expectation.
    #[arg(long)]
    mc_inner: Option<usize>,
}

impl Quadrature {
    fn spec(&self) -> QuadratureSpec {
        QuadratureSpec { mc_inner: self.mc_inner, ..QuadratureSpec::new(self.quad_unodes, self.quad_gh_order) }
    }
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    targets: Targets,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    model: Model,
    /// Comma-separated increasing levels.
    #[arg(long, default_value = "128,256,512,1024,2048,4096,8192")]
    n: String,
    #[command(flatten)]
    targets: Targets,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV file for the simulated vectors (simulate only).
    #[arg(long)]
    dump_samples: Option<String>,
    #[command(flatten)]
    targets: Targets,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SteinArgs {
    /// Registered test function; repeat for several (default: all).
    #[arg(long = "function")]
    functions: Vec<String>,
    /// Dimension when C is not given.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    grid_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    grid_hi: f64,
    #[arg(long, default_value_t = 21)]
    grid_points: usize,
    #[command(flatten)]
    targets: Targets,
    #[command(flatten)]
    quad: Quadrature,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ChatterjeeArgs {
    /// Function as JSON, e.g. {"kind":"componentwise","map":"tanh","dim":2}.
    #[arg(long)]
    function: Option<String>,
    /// Input dimension when neither K nor the function fixes it.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    targets: Targets,
    #[command(flatten)]
    quad: Quadrature,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 512)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    targets: Targets,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReplayArgs {
    report: PathBuf,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

fn config(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| config(format!("cannot parse {what} entry '{p}'"))))
        .collect()
}

fn parse_times(s: &str) -> Result<Vec<f64>, Failure> {
    let mut t: Vec<f64> = parse_list(s, "times")?;
    if t.first() != Some(&0.0) {
        t.insert(0, 0.0);
    }
    Ok(t)
}

fn parse_matrix(value: serde_json::Value) -> Result<CovarianceMatrix, Failure> {
    if let Some(rows) = value.as_array() {
        let rows: Vec<Vec<f64>> =
            serde_json::from_value(json!(rows)).map_err(|e| config(format!("matrix rows: {e}")))?;
        return Ok(CovarianceMatrix::from_rows(&rows)?);
    }
    CovarianceMatrix::deserialize(value).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("positive definite") || msg.contains("hypothesis") {
            Failure::Numerical(msg)
        } else {
            config(format!("matrix: {msg}"))
        }
    })
}

fn parse_inline(s: &str) -> Result<CovarianceMatrix, Failure> {
    parse_matrix(serde_json::from_str(s).map_err(|e| config(format!("matrix JSON: {e}")))?)
}

impl Targets {
    fn load(&self) -> Result<(Option<CovarianceMatrix>, Option<CovarianceMatrix>), Failure> {
        let mut c = None;
        let mut k = None;
        if let Some(path) = &self.matrix_file {
            let text = fs::read_to_string(path)?;
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?;
            if let Some(m) = v.get("C") {
                c = Some(parse_matrix(m.clone())?);
            }
            if let Some(m) = v.get("K") {
                k = Some(parse_matrix(m.clone())?);
            }
        }
        if let Some(s) = &self.c {
            c = Some(parse_inline(s)?);
        }
        if let Some(s) = &self.k {
            k = Some(parse_inline(s)?);
        }
        Ok((c, k))
    }

    fn c_or_identity(&self, d: usize) -> Result<CovarianceMatrix, Failure> {
        Ok(self.load()?.0.unwrap_or_else(|| CovarianceMatrix::identity(d)))
    }
}

impl Model {
    fn resolve(&self) -> Result<ModelConfig, Failure> {
        Ok(ModelConfig { hurst: self.hurst, q: self.q, times: parse_times(&self.times)? })
    }
}

fn resolve(command: Command) -> Result<(Experiment, Output), Failure> {
    Ok(match command {
        Command::Bound(a) => {
            let model = a.model.resolve()?;
            let c = a.targets.c_or_identity(model.times.len() - 1)?;
            (Experiment::Bound(BoundConfig { model, n: a.n, c }), a.output)
        }
        Command::Rates(a) => {
            let model = a.model.resolve()?;
            let c = a.targets.c_or_identity(model.times.len() - 1)?;
            let n_list = parse_list(&a.n, "n")?;
            (Experiment::Rates(RatesConfig { model, n_list, c }), a.output)
        }
        Command::Simulate(a) => {
            let model = a.model.resolve()?;
            let cfg = SimulateConfig { model, n: a.n, m: a.m, seed: a.seed, dump_samples: a.dump_samples };
            (Experiment::Simulate(cfg), a.output)
        }
        Command::Malliavin(a) => {
            let model = a.model.resolve()?;
            let c = a.targets.c_or_identity(model.times.len() - 1)?;
            (Experiment::Malliavin(MalliavinConfig { model, n: a.n, m: a.m, seed: a.seed, c }), a.output)
        }
        Command::SteinCheck(a) => {
            let c = a.targets.c_or_identity(a.d)?;
            let functions = if a.functions.is_empty() { experiments::registered_lipschitz() } else { a.functions };
            let grid = GridConfig { lo: a.grid_lo, hi: a.grid_hi, points_per_axis: a.grid_points };
            (Experiment::SteinCheck(SteinCheckConfig { functions, c, grid, quadrature: a.quad.spec() }), a.output)
        }
        Command::Chatterjee(a) => {
            let (c, k) = a.targets.load()?;
            let function: FunctionSpec = match &a.function {
                Some(s) => serde_json::from_str(s).map_err(|e| config(format!("function JSON: {e}")))?,
                None => FunctionSpec::Identity { dim: k.as_ref().map_or(a.d, CovarianceMatrix::dim) },
            };
            let built = function.build()?;
            let k = k.unwrap_or_else(|| CovarianceMatrix::identity(built.input_dim()));
            let c = c.unwrap_or_else(|| CovarianceMatrix::identity(built.output_dim()));
            let cfg = ChatterjeeConfig { function, k, c, m: a.m, seed: a.seed, quadrature: a.quad.spec() };
            (Experiment::Chatterjee(cfg), a.output)
        }
        Command::GaussianPair(a) => {
            let (c, k) = a.targets.load()?;
            let d = c.as_ref().or(k.as_ref()).map_or(a.d, CovarianceMatrix::dim);
            let k = k.unwrap_or_else(|| CovarianceMatrix::identity(d));
            let c = c.unwrap_or_else(|| CovarianceMatrix::identity(d));
            (Experiment::GaussianPair(GaussianPairConfig { k, c, m: a.m, seed: a.seed }), a.output)
        }
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.report)?;
            let report: Report = serde_json::from_str(&text)
                .map_err(|e| config(format!("{} is not a report: {e}", a.report.display())))?;
            (report.experiment, a.output)
        }
    })
}

fn execute(command: Command) -> Result<(), Failure> {
    let (experiment, output) = resolve(command)?;
    if let Some(t) = output.threads {
        if t == 0 {
            return Err(config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| config(format!("thread pool: {e}")))?;
    }
    let report = experiment.run()?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    match &output.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("error: {message}");
    println!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let msg = e.kind().to_string();
            println!("{}", json!({ "error": { "kind": "usage", "message": msg } }));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => fail("config", &m, 2),
        Err(Failure::Numerical(m)) => fail("numerical", &m, 3),
    }
}
