//! Resolved experiment configurations and their runners. A report embeds its
//! configuration, and running that configuration again yields the same report.

use std::fs::File;
use std::io::BufWriter;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wassbound::chaos::{bound_curve, kernel_family, lemma_pair_bound, rate_exponent, wasserstein_bound};
use wassbound::finite_gaussian::{chatterjee_bound, gaussian_pair_bound, gaussian_w1_1d, FunctionSpec, MonteCarlo};
use wassbound::harness::{
    empirical_w1_1d, empirical_w1_multid, fit_rate, quantile_null_band, simulate_family, simulate_with_malliavin,
};
use wassbound::hermite::factorial;
use wassbound::linalg::{hs_norm, q_factor};
use wassbound::quadrature::QuadratureSpec;
use wassbound::stein::{hessian_bound_check, square_grid, TestFunction, LIPSCHITZ_FUNCTIONS};
use wassbound::{kernel_inner, sample_gaussian, CovarianceMatrix, Error, Estimate, HermiteRank, HurstIndex, Result};

pub const NULL_BAND_REPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hurst: f64,
    pub q: u32,
    pub times: Vec<f64>,
}

impl ModelConfig {
    fn parts(&self) -> Result<(HurstIndex, HermiteRank)> {
        Ok((HurstIndex::new(self.hurst)?, HermiteRank::breuer_major(self.q)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub n: usize,
    pub c: CovarianceMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub n_list: Vec<usize>,
    pub c: CovarianceMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub dump_samples: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalliavinConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub c: CovarianceMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinCheckConfig {
    pub functions: Vec<String>,
    pub c: CovarianceMatrix,
    pub grid: GridConfig,
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatterjeeConfig {
    pub function: FunctionSpec,
    pub k: CovarianceMatrix,
    pub c: CovarianceMatrix,
    pub m: usize,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPairConfig {
    pub k: CovarianceMatrix,
    pub c: CovarianceMatrix,
    pub m: usize,
    pub seed: u64,
}

/// One experiment with its fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Experiment {
    Bound(BoundConfig),
    Rates(RatesConfig),
    Simulate(SimulateConfig),
    Malliavin(MalliavinConfig),
    SteinCheck(SteinCheckConfig),
    Chatterjee(ChatterjeeConfig),
    GaussianPair(GaussianPairConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    #[serde(flatten)]
    pub experiment: Experiment,
    pub result: Value,
}

impl Experiment {
    pub fn run(self) -> Result<Report> {
        let result = match &self {
            Self::Bound(c) => run_bound(c)?,
            Self::Rates(c) => run_rates(c)?,
            Self::Simulate(c) => run_simulate(c)?,
            Self::Malliavin(c) => run_malliavin(c)?,
            Self::SteinCheck(c) => run_stein_check(c)?,
            Self::Chatterjee(c) => run_chatterjee(c)?,
            Self::GaussianPair(c) => run_gaussian_pair(c)?,
        };
        Ok(Report { version: env!("CARGO_PKG_VERSION").to_string(), experiment: self, result })
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Numerical(format!("report serialization: {e}")))
}

fn run_bound(cfg: &BoundConfig) -> Result<Value> {
    let (h, q) = cfg.model.parts()?;
    let fam = kernel_family(h, q, cfg.n, &cfg.model.times)?;
    to_value(&wasserstein_bound(&fam, &cfg.c)?)
}

fn run_rates(cfg: &RatesConfig) -> Result<Value> {
    let (h, q) = cfg.model.parts()?;
    let curve = bound_curve(h, q, &cfg.model.times, &cfg.n_list, &cfg.c)?;
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.n as f64, p.bound)).collect();
    let fit = fit_rate(&pts)?;
    let expected = rate_exponent(h, q)?;
    Ok(json!({
        "curve": to_value(&curve)?,
        "fit": to_value(&fit)?,
        "rate_exponent": expected,
        "slope_minus_exponent": fit.slope - expected,
    }))
}

fn run_simulate(cfg: &SimulateConfig) -> Result<Value> {
    let (h, q) = cfg.model.parts()?;
    let fam = kernel_family(h, q, cfg.n, &cfg.model.times)?;
    let batch = simulate_family(&fam, cfg.m, cfg.seed)?;
    if let Some(path) = &cfg.dump_samples {
        batch.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let marginal_w1 =
        (0..batch.d()).map(|j| empirical_w1_1d(&batch.column(j)).map(|w| w.value)).collect::<Result<Vec<_>>>()?;
    let band = quantile_null_band(cfg.m, NULL_BAND_REPS, cfg.seed)?;
    let bound = wasserstein_bound(&fam, &CovarianceMatrix::identity(fam.dim()))?.bound;
    Ok(json!({
        "provenance": batch.provenance(),
        "mean": batch.mean(),
        "covariance": batch.covariance().rows(),
        "fourth_moments": to_value(&batch.raw_moment(4))?,
        "marginal_w1": marginal_w1,
        "w1_null_band": to_value(&band)?,
        "bound_identity_target": bound,
    }))
}

fn run_malliavin(cfg: &MalliavinConfig) -> Result<Value> {
    let (h, q) = cfg.model.parts()?;
    let fam = kernel_family(h, q, cfg.n, &cfg.model.times)?;
    let (_, mats) = simulate_with_malliavin(&fam, cfg.m, cfg.seed)?;
    let qf = factorial(q.get())?;
    let d = fam.dim();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let g: Vec<f64> = mats.iter().map(|m| m.get(i, j)).collect();
            let sq: Vec<f64> = g.iter().map(|v| (cfg.c.get(i, j) - v).powi(2)).collect();
            let (fi, fj) = (&fam.kernels[i], &fam.kernels[j]);
            entries.push(json!({
                "i": i,
                "j": j,
                "inner": to_value(&Estimate::from_samples(&g))?,
                "chaos_moment": qf * kernel_inner(fi, fj, h)?,
                "mean_square": to_value(&Estimate::from_samples(&sq))?,
                "lemma_bound": lemma_pair_bound(cfg.c.get(i, j), fi, fj, h)?,
            }));
        }
    }
    Ok(json!({ "entries": entries }))
}

fn run_stein_check(cfg: &SteinCheckConfig) -> Result<Value> {
    let d = cfg.c.dim();
    let points: Vec<Vec<f64>> = square_grid(cfg.grid.lo, cfg.grid.hi, cfg.grid.points_per_axis)
        .into_iter()
        .map(|mut p| {
            p.resize(d, 0.0);
            p
        })
        .collect();
    let diags = cfg
        .functions
        .iter()
        .map(|name| hessian_bound_check(&TestFunction::builtin(name, d)?, &cfg.c, &points, &cfg.quadrature))
        .collect::<Result<Vec<_>>>()?;
    let pass = diags.iter().all(|d| d.pass);
    Ok(json!({ "diagnostics": to_value(&diags)?, "pass": pass }))
}

fn run_chatterjee(cfg: &ChatterjeeConfig) -> Result<Value> {
    let f = cfg.function.build()?;
    let mc = MonteCarlo { size: cfg.m, seed: cfg.seed };
    to_value(&chatterjee_bound(&f, &cfg.k, &cfg.c, mc, &cfg.quadrature)?)
}

fn run_gaussian_pair(cfg: &GaussianPairConfig) -> Result<Value> {
    let bound = gaussian_pair_bound(&cfg.k, &cfg.c)?;
    let q = q_factor(&cfg.c, &cfg.k)?;
    let hs = hs_norm(&cfg.c.matrix().sub(cfg.k.matrix())?);
    let mut out = json!({ "bound": bound, "q_factor": q, "hs_distance": hs });
    if cfg.k.dim() == 1 {
        out["exact_w1"] = json!(gaussian_w1_1d(cfg.k.get(0, 0), cfg.c.get(0, 0)));
    } else {
        let a = sample_gaussian(&cfg.k, cfg.m, cfg.seed)?;
        let b = sample_gaussian(&cfg.c, cfg.m, cfg.seed.wrapping_add(1))?;
        out["empirical_w1"] = to_value(&empirical_w1_multid(&a, &b)?)?;
    }
    Ok(out)
}

/// Default list of functions for `stein-check`.
pub fn registered_lipschitz() -> Vec<String> {
    LIPSCHITZ_FUNCTIONS.iter().map(|s| s.to_string()).collect()
}
