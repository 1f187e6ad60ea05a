//! The multidimensional Stein equation
//! `⟨x, ∇f(x)⟩ − ⟨C, Hess f(x)⟩ = g(x) − E[g(Z)]`, `Z ~ N(0, C)`.
//!
//! Its solution is
//! `U₀g(x) = ∫₀¹ (1/u) E[g(u x + √(1−u²) Z) − g(Z)] du`
//! (the Mehler time integral after the substitution `t = u²`), evaluated here
//! with Gauss–Legendre in `u` and a Gaussian cubature for `Z`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dims, norm2, prefactor, CovarianceMatrix};
use crate::quadrature::{GaussianCubature, QuadratureSpec, Rule};
use crate::rng::map_indexed;
use crate::sample::{Estimate, SampleBatch};

/// Relative slack allowed on the Hessian sup-bound for finite-difference error.
pub const HESSIAN_SLACK: f64 = 1e-2;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Real-valued function on `ℝ^d` with optional Lipschitz constant and
/// derivative oracles. Hessians are row-major `d×d`.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    dim: usize,
    eval: ScalarFn,
    lipschitz: Option<f64>,
    gradient: Option<VectorFn>,
    hessian: Option<VectorFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), dim, eval: Arc::new(f), lipschitz: None, gradient: None, hessian: None }
    }

    pub fn with_lipschitz(mut self, lip: f64) -> Self {
        self.lipschitz = Some(lip);
        self
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_oracles(&self) -> bool {
        self.gradient.is_some() && self.hessian.is_some()
    }

    /// Built-in function by registry name, on `ℝ^dim` (`dim ≥ 2`).
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("built-in test functions need dim ≥ 2, got {dim}")));
        }
        let d = dim;
        let unit = move |i: usize, v: f64| {
            let mut e = vec![0.0; d];
            e[i] = v;
            e
        };
        let hess_from = move |entries: &[(usize, usize, f64)]| {
            let mut h = vec![0.0; d * d];
            for &(i, j, v) in entries {
                h[i * d + j] = v;
                h[j * d + i] = v;
            }
            h
        };
        let f = match name {
            "coordinate" => Self::new(name, d, |x| x[0])
                .with_lipschitz(1.0)
                .with_gradient(move |_| unit(0, 1.0))
                .with_hessian(move |_| vec![0.0; d * d]),
            "sin_sum" => Self::new(name, d, |x| (x[0] + x[1]).sin())
                .with_lipschitz(2f64.sqrt())
                .with_gradient(move |x| {
                    let c = (x[0] + x[1]).cos();
                    let mut g = unit(0, c);
                    g[1] = c;
                    g
                })
                .with_hessian(move |x| {
                    let s = -(x[0] + x[1]).sin();
                    hess_from(&[(0, 0, s), (0, 1, s), (1, 1, s)])
                }),
            "soft_abs" => Self::new(name, d, |x| (1.0 + x[0] * x[0]).sqrt())
                .with_lipschitz(1.0)
                .with_gradient(move |x| unit(0, x[0] / (1.0 + x[0] * x[0]).sqrt()))
                .with_hessian(move |x| hess_from(&[(0, 0, (1.0 + x[0] * x[0]).powf(-1.5))])),
            "cos_second" => Self::new(name, d, |x| x[1].cos())
                .with_lipschitz(1.0)
                .with_gradient(move |x| unit(1, -x[1].sin()))
                .with_hessian(move |x| hess_from(&[(1, 1, -x[1].cos())])),
            "log_cosh_diff" => Self::new(name, d, |x| log_cosh(x[0] - x[1]))
                .with_lipschitz(2f64.sqrt())
                .with_gradient(move |x| {
                    let t = (x[0] - x[1]).tanh();
                    let mut g = unit(0, t);
                    g[1] = -t;
                    g
                })
                .with_hessian(move |x| {
                    let s = 1.0 - (x[0] - x[1]).tanh().powi(2);
                    hess_from(&[(0, 0, s), (0, 1, -s), (1, 1, s)])
                }),
            "arctan" => Self::new(name, d, |x| x[0].atan())
                .with_lipschitz(1.0)
                .with_gradient(move |x| unit(0, 1.0 / (1.0 + x[0] * x[0])))
                .with_hessian(move |x| {
                    let s = 1.0 + x[0] * x[0];
                    hess_from(&[(0, 0, -2.0 * x[0] / (s * s))])
                }),
            "square_first" => Self::new(name, d, |x| x[0] * x[0])
                .with_gradient(move |x| unit(0, 2.0 * x[0]))
                .with_hessian(move |_| hess_from(&[(0, 0, 2.0)])),
            "square_second" => Self::new(name, d, |x| x[1] * x[1])
                .with_gradient(move |x| unit(1, 2.0 * x[1]))
                .with_hessian(move |_| hess_from(&[(1, 1, 2.0)])),
            "product" => Self::new(name, d, |x| x[0] * x[1])
                .with_gradient(move |x| {
                    let mut g = unit(0, x[1]);
                    g[1] = x[0];
                    g
                })
                .with_hessian(move |_| hess_from(&[(0, 1, 1.0)])),
            "mixed_quadratic" => Self::new(name, d, |x| x[0] * x[0] + x[0] * x[1] - 0.5 * x[1] * x[1])
                .with_gradient(move |x| {
                    let mut g = unit(0, 2.0 * x[0] + x[1]);
                    g[1] = x[0] - x[1];
                    g
                })
                .with_hessian(move |_| hess_from(&[(0, 0, 2.0), (0, 1, 1.0), (1, 1, -1.0)])),
            "constant" => Self::new(name, d, |_| 1.5)
                .with_lipschitz(0.0)
                .with_gradient(move |_| vec![0.0; d])
                .with_hessian(move |_| vec![0.0; d * d]),
            _ => return Err(Error::InvalidArgument(format!("unknown test function '{name}'"))),
        };
        Ok(f)
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Registered Lipschitz test functions with known constants.
pub const LIPSCHITZ_FUNCTIONS: [&str; 6] =
    ["coordinate", "sin_sum", "soft_abs", "cos_second", "log_cosh_diff", "arctan"];
/// Registered quadratic test functions.
pub const QUADRATIC_FUNCTIONS: [&str; 4] = ["square_first", "square_second", "product", "mixed_quadratic"];

pub fn lipschitz_functions(dim: usize) -> Result<Vec<TestFunction>> {
    LIPSCHITZ_FUNCTIONS.iter().map(|n| TestFunction::builtin(n, dim)).collect()
}

pub fn quadratic_functions(dim: usize) -> Result<Vec<TestFunction>> {
    QUADRATIC_FUNCTIONS.iter().map(|n| TestFunction::builtin(n, dim)).collect()
}

/// `k×k` grid on `[lo, hi]²`.
pub fn square_grid(lo: f64, hi: f64, k: usize) -> Vec<Vec<f64>> {
    let step = if k > 1 { (hi - lo) / (k - 1) as f64 } else { 0.0 };
    (0..k).flat_map(|i| (0..k).map(move |j| vec![lo + step * i as f64, lo + step * j as f64])).collect()
}

/// `U₀g` for fixed `(g, C, quadrature)`, with `E[g(Z)]` cached.
pub struct SteinOperator {
    g: TestFunction,
    c: CovarianceMatrix,
    legendre: Rule,
    cubature: GaussianCubature,
    expected_g: OnceLock<f64>,
}

impl SteinOperator {
    pub fn new(g: TestFunction, c: &CovarianceMatrix, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        check_dims(g.dim(), c.dim())?;
        let cubature = GaussianCubature::new(c, quad.gaussian_rule(c.dim()))?;
        Ok(Self { g, c: c.clone(), legendre: quad.legendre(), cubature, expected_g: OnceLock::new() })
    }

    pub fn function(&self) -> &TestFunction {
        &self.g
    }

    /// `Ê[g(Z)]` under the configured Gaussian rule.
    pub fn expected_g(&self) -> f64 {
        *self.expected_g.get_or_init(|| self.cubature.expectation(|z| self.g.eval(z)))
    }

    /// `U₀g(x)`.
    pub fn apply(&self, x: &[f64]) -> f64 {
        let eg = self.expected_g();
        let d = self.c.dim();
        let mut y = vec![0.0; d];
        let mut total = 0.0;
        for (&u, &w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
            let s = (1.0 - u * u).sqrt();
            let mut inner = 0.0;
            for (wz, z) in self.cubature.iter() {
                for k in 0..d {
                    y[k] = u * x[k] + s * z[k];
                }
                inner += wz * self.g.eval(&y);
            }
            total += w * (inner - eg) / u;
        }
        total
    }

    /// Central-difference gradient of `U₀g` with step `h`.
    pub fn gradient(&self, x: &[f64], h: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + h;
                let plus = self.apply(&y);
                y[i] = x[i] - h;
                let minus = self.apply(&y);
                y[i] = x[i];
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    /// Central-difference Hessian of `U₀g` with step `h`, row-major.
    pub fn hessian(&self, x: &[f64], h: f64) -> Vec<f64> {
        let d = x.len();
        let center = self.apply(x);
        let mut y = x.to_vec();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            y[i] = x[i] + h;
            let plus = self.apply(&y);
            y[i] = x[i] - h;
            let minus = self.apply(&y);
            y[i] = x[i];
            out[i * d + i] = (plus - 2.0 * center + minus) / (h * h);
            for j in 0..i {
                let mut corner = |si: f64, sj: f64| {
                    y[i] = x[i] + si * h;
                    y[j] = x[j] + sj * h;
                    let v = self.apply(&y);
                    y[i] = x[i];
                    y[j] = x[j];
                    v
                };
                let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        out
    }

    /// Stein-equation residual at `x` with explicit finite-difference steps.
    pub fn residual_with_steps(&self, x: &[f64], h_grad: f64, h_hess: f64) -> f64 {
        let grad = self.gradient(x, h_grad);
        let hess = self.hessian(x, h_hess);
        self.residual_from(x, &grad, &hess)
    }

    /// Stein-equation residual at `x` with the default steps
    /// `1e-4·(1+‖x‖)` (gradient) and `1e-3·(1+‖x‖)` (Hessian).
    pub fn residual(&self, x: &[f64]) -> f64 {
        let (hg, hh) = default_steps(x);
        self.residual_with_steps(x, hg, hh)
    }

    fn residual_from(&self, x: &[f64], grad: &[f64], hess: &[f64]) -> f64 {
        let lhs = self.g.eval(x) - self.expected_g();
        let drift: f64 = x.iter().zip(grad).map(|(a, b)| a * b).sum();
        let diffusion: f64 = self.c.matrix().as_slice().iter().zip(hess).map(|(a, b)| a * b).sum();
        (lhs - (drift - diffusion)).abs()
    }

    /// Residual and Hilbert–Schmidt norm of the finite-difference Hessian.
    fn point_diagnostic(&self, x: &[f64]) -> (f64, f64) {
        let (hg, hh) = default_steps(x);
        let grad = self.gradient(x, hg);
        let hess = self.hessian(x, hh);
        (self.residual_from(x, &grad, &hess), norm2(&hess))
    }
}

fn default_steps(x: &[f64]) -> (f64, f64) {
    let scale = 1.0 + norm2(x);
    (1e-4 * scale, 1e-3 * scale)
}

/// `U₀g(x)`.
pub fn u0_apply(g: &TestFunction, c: &CovarianceMatrix, x: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    check_dims(c.dim(), x.len())?;
    Ok(SteinOperator::new(g.clone(), c, quad)?.apply(x))
}

/// `|g(x) − Ê g(Z) − (⟨x, ∇U₀g(x)⟩ − ⟨C, Hess U₀g(x)⟩)|`.
pub fn stein_residual(g: &TestFunction, c: &CovarianceMatrix, x: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    check_dims(c.dim(), x.len())?;
    Ok(SteinOperator::new(g.clone(), c, quad)?.residual(x))
}

/// Outcome of checking `sup ‖Hess U₀g‖_HS ≤ prefactor(C)·Lip(g)` on a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinDiagnostic {
    pub function: String,
    pub points: usize,
    pub residual_max: f64,
    pub hessian_max: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Evaluates the Hessian sup-bound (and the equation residual) over `points`.
pub fn hessian_bound_check(
    g: &TestFunction,
    c: &CovarianceMatrix,
    points: &[Vec<f64>],
    quad: &QuadratureSpec,
) -> Result<SteinDiagnostic> {
    let lip = g.lipschitz().ok_or_else(|| Error::MissingOracle(format!("'{}' has no Lipschitz constant", g.name())))?;
    for p in points {
        check_dims(c.dim(), p.len())?;
    }
    let op = SteinOperator::new(g.clone(), c, quad)?;
    op.expected_g();
    let per_point = map_indexed(points.len(), |i| op.point_diagnostic(&points[i]));
    let residual_max = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let hessian_max = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    let rhs = prefactor(c) * lip;
    Ok(SteinDiagnostic {
        function: g.name().to_string(),
        points: points.len(),
        residual_max,
        hessian_max,
        rhs,
        pass: hessian_max <= rhs * (1.0 + HESSIAN_SLACK),
    })
}

/// Sample mean of `⟨Y, ∇f(Y)⟩ − ⟨C, Hess f(Y)⟩` for one test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEstimate {
    pub function: String,
    pub mean: f64,
    pub std_error: f64,
}

/// Stein discrepancy of `sample` against `N(0, C)` for each function.
pub fn stein_discrepancy(
    sample: &SampleBatch,
    family: &[TestFunction],
    c: &CovarianceMatrix,
) -> Result<Vec<DiscrepancyEstimate>> {
    check_dims(c.dim(), sample.d())?;
    let cm = c.matrix().as_slice();
    family
        .iter()
        .map(|f| {
            check_dims(c.dim(), f.dim())?;
            if !f.has_oracles() {
                return Err(Error::MissingOracle(format!("'{}' needs gradient and Hessian oracles", f.name())));
            }
            let values: Vec<f64> = sample
                .rows()
                .map(|y| {
                    let grad = f.gradient(y).unwrap_or_default();
                    let hess = f.hessian(y).unwrap_or_default();
                    let drift: f64 = y.iter().zip(&grad).map(|(a, b)| a * b).sum();
                    let diffusion: f64 = cm.iter().zip(&hess).map(|(a, b)| a * b).sum();
                    drift - diffusion
                })
                .collect();
            let est = Estimate::from_samples(&values);
            Ok(DiscrepancyEstimate { function: f.name().to_string(), mean: est.mean, std_error: est.std_error })
        })
        .collect()
}
