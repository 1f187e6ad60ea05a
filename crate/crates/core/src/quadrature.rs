//! Gauss–Legendre rules on `(0, 1)`, Gauss–Hermite rules for the standard
//! normal weight, and Gaussian cubatures for `N(0, C)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hermite::hermite_pair;
use crate::linalg::{cholesky, jacobi_eigen, CovarianceMatrix, SymMatrix};
use crate::rng::NormalStream;

pub const DEFAULT_U_NODES: usize = 64;
pub const DEFAULT_GH_ORDER: usize = 8;
pub const DEFAULT_MC_SIZE: usize = 4096;
pub const DEFAULT_MC_SEED: u64 = 0x5eed_cafe;
/// Largest dimension handled with a tensor Gauss–Hermite rule.
pub const MAX_TENSOR_DIM: usize = 4;
const MAX_GH_ORDER: usize = 64;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `n`-point Gauss–Legendre rule mapped to `(0, 1)`.
pub fn gauss_legendre_unit(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root; store ascending on (0, 1)
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-point Gauss–Hermite rule for `E[φ(ξ)]`, `ξ ~ N(0, 1)`; weights sum to 1.
///
/// Nodes start from the Golub–Welsch eigenvalues and are polished by Newton
/// steps on `H_n`; weights are `n! / (n² H_{n−1}(x)²)`.
pub fn gauss_hermite(n: usize) -> Result<Rule> {
    if n == 0 || n > MAX_GH_ORDER {
        return Err(invalid(format!("Gauss–Hermite order must be in 1..={MAX_GH_ORDER}, got {n}")));
    }
    let jacobi = SymMatrix::from_fn(n, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
    let mut nodes = jacobi_eigen(&jacobi, false)?.values;
    nodes.reverse();
    let n_u32 = n as u32;
    for x in nodes.iter_mut() {
        for _ in 0..5 {
            let (h, hm1) = hermite_pair(n_u32, *x);
            let step = h / (n as f64 * hm1);
            *x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // symmetrize: the rule is exactly symmetric about 0
    for i in 0..n / 2 {
        let v = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -v;
        nodes[n - 1 - i] = v;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let weights = nodes
        .iter()
        .map(|&x| {
            let hm1 = hermite_pair(n_u32 - 1, x).0;
            (log_fact - 2.0 * (n as f64).ln() - 2.0 * hm1.abs().ln()).exp()
        })
        .collect();
    Ok(Rule { nodes, weights })
}

/// How the inner Gaussian expectation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GaussianRule {
    GaussHermite { order: usize },
    MonteCarlo { size: usize, seed: u64 },
}

/// Time-integral and Gaussian-expectation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes in `u` on `(0, 1)`.
    pub u_nodes: usize,
    /// Per-axis Gauss–Hermite order (dimensions up to 4).
    pub gh_order: usize,
    /// Forces Monte Carlo of this size for the inner expectation when set.
    pub mc_inner: Option<usize>,
    /// Monte Carlo size used above dimension 4 when `mc_inner` is unset.
    pub mc_size: usize,
    pub mc_seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            u_nodes: DEFAULT_U_NODES,
            gh_order: DEFAULT_GH_ORDER,
            mc_inner: None,
            mc_size: DEFAULT_MC_SIZE,
            mc_seed: DEFAULT_MC_SEED,
        }
    }
}

impl QuadratureSpec {
    pub fn new(u_nodes: usize, gh_order: usize) -> Self {
        Self { u_nodes, gh_order, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_nodes < 8 {
            return Err(invalid(format!("u_nodes must be at least 8, got {}", self.u_nodes)));
        }
        if self.gh_order < 4 || self.gh_order > MAX_GH_ORDER {
            return Err(invalid(format!("Gauss–Hermite order must be in 4..={MAX_GH_ORDER}, got {}", self.gh_order)));
        }
        let mc = self.mc_inner.unwrap_or(self.mc_size);
        if mc < 1000 {
            return Err(invalid(format!("Monte Carlo size must be at least 1000, got {mc}")));
        }
        Ok(())
    }

    /// Tensor Gauss–Hermite up to dimension 4, seeded Monte Carlo beyond
    /// (or whenever `mc_inner` is set).
    pub fn gaussian_rule(&self, dim: usize) -> GaussianRule {
        match self.mc_inner {
            Some(size) => GaussianRule::MonteCarlo { size, seed: self.mc_seed },
            None if dim > MAX_TENSOR_DIM => GaussianRule::MonteCarlo { size: self.mc_size, seed: self.mc_seed },
            None => GaussianRule::GaussHermite { order: self.gh_order },
        }
    }

    pub fn legendre(&self) -> Rule {
        gauss_legendre_unit(self.u_nodes)
    }
}

/// Weighted point set approximating expectations under `N(0, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCubature {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianCubature {
    pub fn new(c: &CovarianceMatrix, rule: GaussianRule) -> Result<Self> {
        let dim = c.dim();
        let l = cholesky(c)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut z = vec![0.0; dim];
        match rule {
            GaussianRule::GaussHermite { order } => {
                let gh = gauss_hermite(order)?;
                let count = order.checked_pow(dim as u32).ok_or_else(|| invalid("tensor rule too large"))?;
                points.reserve(count * dim);
                let mut idx = vec![0usize; dim];
                for _ in 0..count {
                    let mut w = 1.0;
                    let xi: Vec<f64> = idx
                        .iter()
                        .map(|&i| {
                            w *= gh.weights[i];
                            gh.nodes[i]
                        })
                        .collect();
                    l.apply_into(&xi, &mut z);
                    points.extend_from_slice(&z);
                    weights.push(w);
                    for slot in idx.iter_mut() {
                        *slot += 1;
                        if *slot < order {
                            break;
                        }
                        *slot = 0;
                    }
                }
            }
            GaussianRule::MonteCarlo { size, seed } => {
                if size == 0 {
                    return Err(invalid("Monte Carlo size must be positive"));
                }
                let mut stream = NormalStream::new(seed);
                let w = 1.0 / size as f64;
                for _ in 0..size {
                    let xi = stream.normals(dim);
                    l.apply_into(&xi, &mut z);
                    points.extend_from_slice(&z);
                    weights.push(w);
                }
            }
        }
        Ok(Self { dim, points, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.weights.iter().copied().zip(self.points.chunks_exact(self.dim))
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(w, z)| w * f(z)).sum()
    }
}
