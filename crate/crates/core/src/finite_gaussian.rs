//! Wasserstein bounds for smooth functions `F = (f_1, …, f_d)` of a Gaussian
//! vector `Y ~ N(0, K)` on `ℝⁿ`, against a target `N(0, C)`:
//!
//! `W(F(Y), N(0,C)) ≤ prefactor(C)·√(Σ_ab E[(C(a,b) − T_ab(Y))²])`,
//!
//! `T_ab(y) = ∫₀¹ ∇f_a(y)ᵀ K E[∇f_b(u y + √(1−u²) Y)] du`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_dims, cholesky, hs_norm, norm2, prefactor, q_factor, CovarianceMatrix};
use crate::quadrature::{GaussianCubature, QuadratureSpec, Rule};
use crate::rng::{map_indexed, NormalStream};
use crate::sample::Estimate;

/// Mean offsets beyond this many standard errors trigger recentering.
pub const CENTERING_THRESHOLD: f64 = 4.0;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
struct Component {
    value: ScalarFn,
    gradient: Option<GradientFn>,
}

/// `F: ℝⁿ → ℝ^d` with per-component gradient oracles. Components without an
/// oracle are differentiated by central differences when the fallback is on.
/// Growth of the components is the caller's responsibility: every expectation
/// here is assumed finite.
#[derive(Clone)]
pub struct SmoothVectorFunction {
    name: String,
    input_dim: usize,
    components: Vec<Component>,
    fd_fallback: bool,
}

impl fmt::Debug for SmoothVectorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothVectorFunction")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.components.len())
            .field("fd_fallback", &self.fd_fallback)
            .finish()
    }
}

impl SmoothVectorFunction {
    pub fn new(name: impl Into<String>, input_dim: usize) -> Self {
        Self { name: name.into(), input_dim, components: Vec::new(), fd_fallback: true }
    }

    pub fn component(
        mut self,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.components.push(Component { value: Arc::new(value), gradient: Some(Arc::new(gradient)) });
        self
    }

    /// Component whose gradient is obtained by finite differences.
    pub fn component_without_gradient(mut self, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.components.push(Component { value: Arc::new(value), gradient: None });
        self
    }

    pub fn with_fd_fallback(mut self, enabled: bool) -> Self {
        self.fd_fallback = enabled;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, j: usize, y: &[f64]) -> f64 {
        (self.components[j].value)(y)
    }

    /// `∇f_j(y)` into `out`.
    pub fn gradient_into(&self, j: usize, y: &[f64], out: &mut [f64]) -> Result<()> {
        let comp = &self.components[j];
        match &comp.gradient {
            Some(g) => g(y, out),
            None if self.fd_fallback => {
                let h = 1e-4 * (1.0 + norm2(y));
                out.copy_from_slice(&fd_gradient(comp.value.as_ref(), y, h));
            }
            None => {
                return Err(Error::MissingOracle(format!(
                    "component {j} of '{}' has no gradient and finite differences are disabled",
                    self.name
                )))
            }
        }
        Ok(())
    }

    pub fn gradient(&self, j: usize, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.input_dim];
        self.gradient_into(j, y, &mut out)?;
        Ok(out)
    }

    fn check_gradients(&self) -> Result<()> {
        if self.fd_fallback {
            return Ok(());
        }
        match self.components.iter().position(|c| c.gradient.is_none()) {
            Some(j) => Err(Error::MissingOracle(format!(
                "component {j} of '{}' has no gradient and finite differences are disabled",
                self.name
            ))),
            None => Ok(()),
        }
    }

    /// `F(y) = A y` for a `d×n` matrix given by rows.
    pub fn linear(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(invalid("linear map needs at least one non-empty row"));
        }
        let mut f = Self::new("linear", n);
        for row in rows {
            check_dims(n, row.len())?;
            let (r1, r2) = (Arc::new(row.clone()), Arc::new(row.clone()));
            f = f
                .component(move |y| r1.iter().zip(y).map(|(a, b)| a * b).sum(), move |_, out| out.copy_from_slice(&r2));
        }
        Ok(f)
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let mut f = Self::linear(&rows).expect("identity rows are well-formed");
        f.name = "identity".into();
        f
    }

    /// `f_j(y) = yᵀ M_j y`, gradient `(M_j + M_jᵀ) y`.
    pub fn quadratic(forms: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n = forms.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(invalid("quadratic map needs at least one non-empty form"));
        }
        let mut f = Self::new("quadratic", n);
        for m in forms {
            check_dims(n, m.len())?;
            let mut flat = Vec::with_capacity(n * n);
            for row in m {
                check_dims(n, row.len())?;
                flat.extend_from_slice(row);
            }
            let (m1, m2) = (Arc::new(flat.clone()), Arc::new(flat));
            f = f.component(
                move |y| (0..n).map(|i| y[i] * (0..n).map(|k| m1[i * n + k] * y[k]).sum::<f64>()).sum(),
                move |y, out| {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = (0..n).map(|k| (m2[i * n + k] + m2[k * n + i]) * y[k]).sum();
                    }
                },
            );
        }
        Ok(f)
    }

    /// `f_j(y) = φ(y_j)` for `j < n`.
    pub fn componentwise(map: ComponentMap, n: usize) -> Self {
        let mut f = Self::new(format!("componentwise_{}", map.name()), n);
        for j in 0..n {
            f = f.component(
                move |y| map.value(y[j]),
                move |y, out| {
                    out.fill(0.0);
                    out[j] = map.derivative(y[j]);
                },
            );
        }
        f
    }
}

/// Scalar maps available to [`SmoothVectorFunction::componentwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentMap {
    Tanh,
    Sin,
    Arctan,
    Cube,
}

impl ComponentMap {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Sin => "sin",
            Self::Arctan => "arctan",
            Self::Cube => "cube",
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Tanh => x.tanh(),
            Self::Sin => x.sin(),
            Self::Arctan => x.atan(),
            Self::Cube => x * x * x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - x.tanh().powi(2),
            Self::Sin => x.cos(),
            Self::Arctan => 1.0 / (1.0 + x * x),
            Self::Cube => 3.0 * x * x,
        }
    }
}

/// Serializable description of a built-in vector function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Identity { dim: usize },
    Linear { matrix: Vec<Vec<f64>> },
    Quadratic { forms: Vec<Vec<Vec<f64>>> },
    Componentwise { map: ComponentMap, dim: usize },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<SmoothVectorFunction> {
        match self {
            Self::Identity { dim } if *dim > 0 => Ok(SmoothVectorFunction::identity(*dim)),
            Self::Identity { .. } => Err(invalid("identity dimension must be positive")),
            Self::Linear { matrix } => SmoothVectorFunction::linear(matrix),
            Self::Quadratic { forms } => SmoothVectorFunction::quadratic(forms),
            Self::Componentwise { map, dim } if *dim > 0 => Ok(SmoothVectorFunction::componentwise(*map, *dim)),
            Self::Componentwise { .. } => Err(invalid("componentwise dimension must be positive")),
        }
    }
}

/// Central-difference gradient with step `h`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut p = y.to_vec();
    (0..y.len())
        .map(|i| {
            p[i] = y[i] + h;
            let plus = f(&p);
            p[i] = y[i] - h;
            let minus = f(&p);
            p[i] = y[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Evaluates the full matrix `T(y) = (T_ab(y))` for fixed `(F, K, quadrature)`.
pub struct TabOperator<'a> {
    f: &'a SmoothVectorFunction,
    k: &'a CovarianceMatrix,
    legendre: Rule,
    cubature: GaussianCubature,
}

impl<'a> TabOperator<'a> {
    pub fn new(f: &'a SmoothVectorFunction, k: &'a CovarianceMatrix, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        check_dims(f.input_dim(), k.dim())?;
        f.check_gradients()?;
        let cubature = GaussianCubature::new(k, quad.gaussian_rule(k.dim()))?;
        Ok(Self { f, k, legendre: quad.legendre(), cubature })
    }

    /// Row-major `d×d` matrix `T(y)`.
    pub fn matrix(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.f.input_dim();
        let d = self.f.output_dim();
        let km = self.k.matrix();
        // K ∇f_a(y), one row per a
        let mut k_grad = vec![0.0; d * n];
        let mut buf = vec![0.0; n];
        for a in 0..d {
            self.f.gradient_into(a, y, &mut buf)?;
            k_grad[a * n..(a + 1) * n].copy_from_slice(&km.mat_vec(&buf));
        }
        // ∫ E[∇f_b(u y + √(1−u²) Y)] du, one row per b
        let mut smoothed = vec![0.0; d * n];
        let mut point = vec![0.0; n];
        for (&u, &w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
            let s = (1.0 - u * u).sqrt();
            for (wz, z) in self.cubature.iter() {
                for i in 0..n {
                    point[i] = u * y[i] + s * z[i];
                }
                for b in 0..d {
                    self.f.gradient_into(b, &point, &mut buf)?;
                    let row = &mut smoothed[b * n..(b + 1) * n];
                    for (r, g) in row.iter_mut().zip(&buf) {
                        *r += w * wz * g;
                    }
                }
            }
        }
        let mut t = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                t[a * d + b] =
                    k_grad[a * n..(a + 1) * n].iter().zip(&smoothed[b * n..(b + 1) * n]).map(|(x, z)| x * z).sum();
            }
        }
        Ok(t)
    }
}

/// `T_ab(y)`.
pub fn t_ab(
    f: &SmoothVectorFunction,
    a: usize,
    b: usize,
    k: &CovarianceMatrix,
    y: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let d = f.output_dim();
    if a >= d || b >= d {
        return Err(invalid(format!("component index ({a}, {b}) out of range for d = {d}")));
    }
    check_dims(f.input_dim(), y.len())?;
    Ok(TabOperator::new(f, k, quad)?.matrix(y)?[a * d + b])
}

/// Outer Monte Carlo configuration (draws of `Y ~ N(0, K)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub size: usize,
    pub seed: u64,
}

/// Monte Carlo summary of one entry `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabEstimate {
    pub a: usize,
    pub b: usize,
    /// Mean and standard error of `T_ab(Y)`.
    pub t: Estimate,
    /// Mean and standard error of `(C(a,b) − T_ab(Y))²`.
    pub mean_square: Estimate,
}

/// Result of [`chatterjee_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatterjeeReport {
    pub function: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub mc_size: usize,
    pub mc_seed: u64,
    /// Estimated `E[f_j(Y)]` per component.
    pub component_means: Vec<Estimate>,
    /// Components whose mean was significant and has been subtracted.
    pub recentered: Vec<bool>,
    pub entries: Vec<TabEstimate>,
    pub prefactor: f64,
    pub bound: f64,
}

/// `prefactor(C)·√(Σ_ab E[(C(a,b) − T_ab(Y))²])`, `Y ~ N(0, K)`.
pub fn chatterjee_bound(
    f: &SmoothVectorFunction,
    k: &CovarianceMatrix,
    c: &CovarianceMatrix,
    mc: MonteCarlo,
    quad: &QuadratureSpec,
) -> Result<ChatterjeeReport> {
    let d = f.output_dim();
    check_dims(d, c.dim())?;
    if mc.size < 2 {
        return Err(invalid(format!("outer Monte Carlo size must be at least 2, got {}", mc.size)));
    }
    let op = TabOperator::new(f, k, quad)?;
    let l = cholesky(k)?;
    let n = f.input_dim();
    let rows = map_indexed(mc.size, |r| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut stream = NormalStream::derived(mc.seed, "chatterjee-outer", r as u64);
        let y = l.apply(&stream.normals(n));
        let values = (0..d).map(|j| f.eval(j, &y)).collect();
        Ok((values, op.matrix(&y)?))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut component_means = Vec::with_capacity(d);
    let mut recentered = Vec::with_capacity(d);
    for j in 0..d {
        let vals: Vec<f64> = rows.iter().map(|(v, _)| v[j]).collect();
        let est = Estimate::from_samples(&vals);
        let off = est.mean.abs() > CENTERING_THRESHOLD * est.std_error;
        if off {
            log::warn!(
                "component {j} of '{}' has mean {:.4e} (std error {:.2e}); subtracting it",
                f.name(),
                est.mean,
                est.std_error
            );
        }
        component_means.push(est);
        recentered.push(off);
    }

    let mut entries = Vec::with_capacity(d * d);
    let mut total = 0.0;
    for a in 0..d {
        for b in 0..d {
            let ts: Vec<f64> = rows.iter().map(|(_, t)| t[a * d + b]).collect();
            let sq: Vec<f64> = ts.iter().map(|t| (c.get(a, b) - t).powi(2)).collect();
            let mean_square = Estimate::from_samples(&sq);
            total += mean_square.mean;
            entries.push(TabEstimate { a, b, t: Estimate::from_samples(&ts), mean_square });
        }
    }
    let pre = prefactor(c);
    Ok(ChatterjeeReport {
        function: f.name().to_string(),
        input_dim: n,
        output_dim: d,
        mc_size: mc.size,
        mc_seed: mc.seed,
        component_means,
        recentered,
        entries,
        prefactor: pre,
        bound: pre * total.sqrt(),
    })
}

/// `min(prefactor(C), prefactor(K))·‖C − K‖_HS`.
pub fn gaussian_pair_bound(k: &CovarianceMatrix, c: &CovarianceMatrix) -> Result<f64> {
    let diff = c.matrix().sub(k.matrix())?;
    Ok(q_factor(c, k)? * hs_norm(&diff))
}

/// Exact `W₁(N(0, s1²), N(0, s2²)) = |s1 − s2|·√(2/π)`.
pub fn gaussian_w1_1d(var1: f64, var2: f64) -> f64 {
    (var1.sqrt() - var2.sqrt()).abs() * (2.0 / std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use approx::assert_abs_diff_eq;

    fn k2() -> CovarianceMatrix {
        CovarianceMatrix::from_rows(&[vec![1.5, 0.4], vec![0.4, 0.8]]).unwrap()
    }

    fn small_quad() -> QuadratureSpec {
        QuadratureSpec::new(16, 6)
    }

    #[test]
    fn linear_t_is_constant() {
        let k = k2();
        let f = SmoothVectorFunction::linear(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let akat = [
            [1.0 * 1.5 * 1.0 + 2.0 * 1.0 * (-2.0) * 0.4 + 4.0 * 0.8, 0.0],
            [0.0, 0.25 * 1.5 + 2.0 * 0.5 * 3.0 * 0.4 + 9.0 * 0.8],
        ];
        let off = 1.0 * 0.5 * 1.5 + (1.0 * 3.0 + (-2.0) * 0.5) * 0.4 + (-2.0) * 3.0 * 0.8;
        for y in [[0.0, 0.0], [1.3, -2.2]] {
            assert_abs_diff_eq!(t_ab(&f, 0, 0, &k, &y, &small_quad()).unwrap(), akat[0][0], epsilon = 1e-12);
            assert_abs_diff_eq!(t_ab(&f, 1, 1, &k, &y, &small_quad()).unwrap(), akat[1][1], epsilon = 1e-12);
            assert_abs_diff_eq!(t_ab(&f, 0, 1, &k, &y, &small_quad()).unwrap(), off, epsilon = 1e-12);
        }
        assert!(t_ab(&f, 2, 0, &k, &[0.0, 0.0], &small_quad()).is_err());
    }

    #[test]
    fn one_dimensional_examples() {
        let k = CovarianceMatrix::identity(1);
        let f = SmoothVectorFunction::new("pair", 1)
            .component(|y| y[0], |_, out| out[0] = 1.0)
            .component(|y| y[0] * y[0] - 1.0, |y, out| out[0] = 2.0 * y[0])
            .component(|_| 0.0, |_, out| out[0] = 0.0);
        for y in [-1.5, 0.0, 0.7, 2.0] {
            assert_abs_diff_eq!(t_ab(&f, 0, 1, &k, &[y], &small_quad()).unwrap(), y, epsilon = 1e-12);
            assert_eq!(t_ab(&f, 0, 2, &k, &[y], &small_quad()).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_bound_is_exact() {
        let k = k2();
        let a = vec![vec![1.0, 0.2], vec![-0.3, 1.0]];
        let f = SmoothVectorFunction::linear(&a).unwrap();
        let akat = SymMatrix::from_fn(2, |i, j| {
            (0..2).map(|p| (0..2).map(|q| a[i][p] * k.get(p, q) * a[j][q]).sum::<f64>()).sum()
        });
        let target = CovarianceMatrix::new(akat.clone()).unwrap();
        let mc = MonteCarlo { size: 50, seed: 3 };
        let zero = chatterjee_bound(&f, &k, &target, mc, &small_quad()).unwrap();
        assert!(zero.bound < 1e-7);
        let c = CovarianceMatrix::diagonal(&[2.0, 0.5]).unwrap();
        let rep = chatterjee_bound(&f, &k, &c, mc, &small_quad()).unwrap();
        let exact = prefactor(&c) * hs_norm(&c.matrix().sub(&akat).unwrap());
        assert_abs_diff_eq!(rep.bound, exact, epsilon = 1e-10);
        assert!(rep.entries.iter().all(|e| e.mean_square.std_error < 1e-12));
    }

    #[test]
    fn identity_with_matching_target_vanishes() {
        let c = CovarianceMatrix::identity(1);
        let rep = chatterjee_bound(
            &SmoothVectorFunction::identity(1),
            &c,
            &c,
            MonteCarlo { size: 10, seed: 1 },
            &small_quad(),
        )
        .unwrap();
        assert!(rep.bound < 1e-12);
        assert_eq!(gaussian_pair_bound(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_pair_examples() {
        let one = CovarianceMatrix::identity(1);
        let four = CovarianceMatrix::diagonal(&[4.0]).unwrap();
        assert_abs_diff_eq!(gaussian_pair_bound(&one, &four).unwrap(), 1.5, epsilon = 1e-15);
        let w = gaussian_w1_1d(1.0, 4.0);
        assert_abs_diff_eq!(w, 0.7978845608028654, epsilon = 1e-15);
        assert!(w <= 1.5);
        assert!(gaussian_pair_bound(&one, &k2()).is_err());
    }

    #[test]
    fn fd_gradient_examples() {
        let lin = |y: &[f64]| 2.0 * y[0] - y[1];
        let g = fd_gradient(&lin, &[0.3, 5.0], 1e-3);
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(g[1], -1.0, epsilon = 1e-10);
        let sq = |y: &[f64]| y[0] * y[0];
        assert_abs_diff_eq!(fd_gradient(&sq, &[3.0], 1e-4)[0], 6.0, epsilon = 1e-7);
    }

    #[test]
    fn quadratic_gradients_match_fd() {
        let f = SmoothVectorFunction::quadratic(&[vec![vec![1.0, 2.0], vec![0.0, -1.0]]]).unwrap();
        let mut s = NormalStream::new(5);
        for _ in 0..20 {
            let y = s.normals(2);
            let exact = f.gradient(0, &y).unwrap();
            let fd = fd_gradient(&|p: &[f64]| f.eval(0, p), &y, 1e-4 * (1.0 + norm2(&y)));
            for (e, a) in exact.iter().zip(&fd) {
                assert!((e - a).abs() <= 1e-6 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn missing_gradient_without_fallback() {
        let f = SmoothVectorFunction::new("bare", 1).component_without_gradient(|y| y[0].sin()).with_fd_fallback(false);
        let k = CovarianceMatrix::identity(1);
        assert!(matches!(t_ab(&f, 0, 0, &k, &[0.1], &small_quad()), Err(Error::MissingOracle(_))));
        let g = SmoothVectorFunction::new("bare", 1).component_without_gradient(|y| y[0].sin());
        assert_abs_diff_eq!(g.gradient(0, &[0.1]).unwrap()[0], 0.1f64.cos(), epsilon = 1e-8);
    }

    #[test]
    fn recentering_flags_biased_components() {
        let k = CovarianceMatrix::identity(2);
        let f = FunctionSpec::Quadratic { forms: vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]] }.build().unwrap();
        let c = CovarianceMatrix::diagonal(&[2.0]).unwrap();
        let rep = chatterjee_bound(&f, &k, &c, MonteCarlo { size: 400, seed: 9 }, &small_quad()).unwrap();
        assert_eq!(rep.recentered, vec![true]);
        let g = FunctionSpec::Componentwise { map: ComponentMap::Tanh, dim: 2 }.build().unwrap();
        let rep = chatterjee_bound(&g, &k, &k, MonteCarlo { size: 400, seed: 9 }, &small_quad()).unwrap();
        assert_eq!(rep.recentered, vec![false, false]);
    }

    #[test]
    fn symmetric_means_of_t() {
        let k = k2();
        let f = FunctionSpec::Componentwise { map: ComponentMap::Sin, dim: 2 }.build().unwrap();
        let rep = chatterjee_bound(&f, &k, &k, MonteCarlo { size: 2000, seed: 21 }, &small_quad()).unwrap();
        let t01 = &rep.entries[1].t;
        let t10 = &rep.entries[2].t;
        let se = (t01.std_error.powi(2) + t10.std_error.powi(2)).sqrt();
        assert!((t01.mean - t10.mean).abs() <= 4.0 * se, "{t01:?} {t10:?}");
    }

    #[test]
    fn relabeling_invariance() {
        let k = k2();
        let f = SmoothVectorFunction::componentwise(ComponentMap::Arctan, 2);
        let swapped = SmoothVectorFunction::new("swapped", 2)
            .component(
                |y| y[1].atan(),
                |y, out| {
                    out[0] = 0.0;
                    out[1] = 1.0 / (1.0 + y[1] * y[1]);
                },
            )
            .component(
                |y| y[0].atan(),
                |y, out| {
                    out[0] = 1.0 / (1.0 + y[0] * y[0]);
                    out[1] = 0.0;
                },
            );
        let c = CovarianceMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.6]]).unwrap();
        let cp = c.permuted(&[1, 0]).unwrap();
        let mc = MonteCarlo { size: 200, seed: 4 };
        let a = chatterjee_bound(&f, &k, &c, mc, &small_quad()).unwrap();
        let b = chatterjee_bound(&swapped, &k, &cp, mc, &small_quad()).unwrap();
        assert_abs_diff_eq!(a.bound, b.bound, epsilon = 1e-12);
    }
}
