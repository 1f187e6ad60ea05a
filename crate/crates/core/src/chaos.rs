//! Breuer–Major step kernels `f = c·Σ_{k∈[k0,k1)} 1_{[k,k+1]}^{⊗q}`, their inner
//! products and contraction norms, the pairwise fourth-moment estimates and
//! the assembled Wasserstein bound.
//!
//! All inner products are taken in the Hilbert space of fractional Brownian
//! motion, where `⟨1_{[k,k+1]}, 1_{[l,l+1]}⟩ = ρ(k−l)`. Every sum is evaluated
//! exactly over all lags; no window truncation is applied.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fgn::{rho, sigma_bm, HurstIndex, SigmaEstimate, SIGMA_DEFAULT_LAGS};
use crate::hermite::{binomial, factorial, HermiteRank};
use crate::linalg::{check_dims, prefactor, CovarianceMatrix, SymMatrix};
use crate::rng::map_indexed;

/// `c · Σ_{k∈[k0,k1)} 1_{[k,k+1]}^{⊗q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepKernel {
    pub q: HermiteRank,
    pub scale: f64,
    pub k0: usize,
    pub k1: usize,
}

impl StepKernel {
    pub fn new(q: HermiteRank, scale: f64, k0: usize, k1: usize) -> Result<Self> {
        if k1 <= k0 {
            return Err(invalid(format!("empty kernel block [{k0}, {k1})")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("kernel scale must be positive, got {scale}")));
        }
        Ok(Self { q, scale, k0, k1 })
    }

    pub fn len(&self) -> usize {
        self.k1 - self.k0
    }

    pub fn is_empty(&self) -> bool {
        self.k1 == self.k0
    }

    pub fn contains(&self, k: usize) -> bool {
        (self.k0..self.k1).contains(&k)
    }
}

/// Kernels of the normalized increments `(S_n(t_i) − S_n(t_{i−1}))/√(t_i − t_{i−1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFamily {
    pub hurst: HurstIndex,
    pub q: HermiteRank,
    pub n: usize,
    pub times: Vec<f64>,
    pub kernels: Vec<StepKernel>,
    pub sigma: SigmaEstimate,
}

impl KernelFamily {
    pub fn dim(&self) -> usize {
        self.kernels.len()
    }

    /// Number of fGn increments needed to cover every block.
    pub fn path_len(&self) -> usize {
        self.kernels.iter().map(|k| k.k1).max().unwrap_or(0)
    }
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(invalid("times must contain t0 = 0 and at least one more point"));
    }
    if times[0] != 0.0 {
        return Err(invalid(format!("times must start at 0, got {}", times[0])));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("times must be finite and strictly increasing"));
    }
    Ok(())
}

/// Builds the family with `σ` evaluated at the default lag budget.
pub fn kernel_family(hurst: HurstIndex, q: HermiteRank, n: usize, times: &[f64]) -> Result<KernelFamily> {
    let q = HermiteRank::breuer_major(q.get())?;
    let sigma = sigma_bm(hurst, q, SIGMA_DEFAULT_LAGS)?;
    kernel_family_with_sigma(hurst, q, n, times, sigma)
}

/// Same as [`kernel_family`] with a precomputed `σ`.
pub fn kernel_family_with_sigma(
    hurst: HurstIndex,
    q: HermiteRank,
    n: usize,
    times: &[f64],
    sigma: SigmaEstimate,
) -> Result<KernelFamily> {
    let q = HermiteRank::breuer_major(q.get())?;
    hurst.check_breuer_major(q)?;
    if n == 0 {
        return Err(invalid("discretization level n must be at least 1"));
    }
    validate_times(times)?;
    let nf = n as f64;
    let kernels = times
        .windows(2)
        .map(|w| {
            let k0 = (nf * w[0]).floor() as usize;
            let k1 = (nf * w[1]).floor() as usize;
            if k1 <= k0 {
                return Err(Error::EmptyBlock { t0: w[0], t1: w[1], n });
            }
            let scale = 1.0 / (sigma.sigma * nf.sqrt() * (w[1] - w[0]).sqrt());
            StepKernel::new(q, scale, k0, k1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelFamily { hurst, q, n, times: times.to_vec(), kernels, sigma })
}

/// `⟨f, g⟩_{H^{⊗q}} = c_f c_g Σ_{k∈f, l∈g} ρ(k−l)^q`, summed by lag.
pub fn kernel_inner(f: &StepKernel, g: &StepKernel, hurst: HurstIndex) -> Result<f64> {
    if f.q != g.q {
        return Err(invalid(format!("rank mismatch: {} vs {}", f.q.get(), g.q.get())));
    }
    let q = f.q.get() as i32;
    // lag δ = k − l ranges over (f.k0 − g.k1, f.k1 − g.k0)
    let lo = f.k0 as i64 - g.k1 as i64 + 1;
    let hi = f.k1 as i64 - g.k0 as i64 - 1;
    let mut sum = 0.0;
    for delta in lo..=hi {
        let start = (f.k0 as i64).max(g.k0 as i64 + delta);
        let end = (f.k1 as i64).min(g.k1 as i64 + delta);
        let count = end - start;
        if count > 0 {
            sum += count as f64 * rho(hurst, delta as f64).powi(q);
        }
    }
    Ok(f.scale * g.scale * sum)
}

fn check_contraction_order(f: &StepKernel, r: u32) -> Result<()> {
    if r == 0 || r >= f.q.get() {
        return Err(invalid(format!("contraction order {r} outside 1..={}", f.q.get() - 1)));
    }
    Ok(())
}

/// `‖f ⊗_r f‖²`, exact, in `O(m²)` time and `O(m)` memory for a block of
/// length `m`.
///
/// With Toeplitz `A = [ρ(k−l)^r]` and `B = [ρ(k−l)^{q−r}]` on the block, the
/// quadruple sum equals `c⁴ Tr(ABAB)`; `P = AB` is walked diagonal by diagonal
/// through the shift recurrence
/// `P_{k+1,l+1} = P_{k,l} + a(k+1) b(l+1) − a(m−1−k) b(m−1−l)`.
pub fn contraction_norm_sq(f: &StepKernel, r: u32, hurst: HurstIndex) -> Result<f64> {
    check_contraction_order(f, r)?;
    let c2 = f.scale * f.scale;
    Ok(c2 * c2 * unit_contraction_sum(f.len(), r, f.q.get(), hurst))
}

fn unit_contraction_sum(m: usize, r: u32, q: u32, hurst: HurstIndex) -> f64 {
    let rhos: Vec<f64> = (0..m).map(|d| rho(hurst, d as f64)).collect();
    let a: Vec<f64> = rhos.iter().map(|x| x.powi(r as i32)).collect();
    let b: Vec<f64> = rhos.iter().map(|x| x.powi((q - r) as i32)).collect();
    toeplitz_trace_abab(&a, &b)
}

/// `Tr(ABAB)` for symmetric Toeplitz `A`, `B` given by their first columns.
fn toeplitz_trace_abab(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    debug_assert_eq!(m, b.len());
    let first_col: Vec<f64> = (0..m).map(|k| (0..m).map(|j| a[k.abs_diff(j)] * b[j]).sum()).collect();
    let first_row: Vec<f64> = (0..m).map(|l| (0..m).map(|j| a[j] * b[j.abs_diff(l)]).sum()).collect();
    let step = |p: f64, k: usize, l: usize| p + a[k + 1] * b[l + 1] - a[m - 1 - k] * b[m - 1 - l];

    let mut total = 0.0;
    for delta in 0..m {
        // lower diagonal P_{δ+l, l} and its transpose partner P_{l, δ+l}
        let mut lower = first_col[delta];
        let mut upper = first_row[delta];
        let mut diag_sum = 0.0;
        for l in 0..(m - delta) {
            diag_sum += lower * upper;
            if l + 1 < m - delta {
                lower = step(lower, delta + l, l);
                upper = step(upper, l, delta + l);
            }
        }
        total += if delta == 0 { diag_sum } else { 2.0 * diag_sum };
    }
    total
}

/// Direct `O(m⁴)` evaluation of
/// `c⁴ Σ_{k,l,k′,l′} ρ(k−l)^r ρ(k′−l′)^r ρ(k−k′)^{q−r} ρ(l−l′)^{q−r}`.
pub fn contraction_norm_sq_brute(f: &StepKernel, r: u32, hurst: HurstIndex) -> Result<f64> {
    check_contraction_order(f, r)?;
    let (r, s) = (r as i32, (f.q.get() - r) as i32);
    let idx = || (f.k0..f.k1).map(|k| k as f64);
    let mut sum = 0.0;
    for k in idx() {
        for l in idx() {
            let left = rho(hurst, k - l).powi(r);
            for kp in idx() {
                let mid = left * rho(hurst, k - kp).powi(s);
                for lp in idx() {
                    sum += mid * rho(hurst, kp - lp).powi(r) * rho(hurst, l - lp).powi(s);
                }
            }
        }
    }
    Ok(f.scale.powi(4) * sum)
}

/// Ingredients of one pairwise estimate with `F = I_p(f)`, `G = I_q(g)`, `p ≤ q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerms<'a> {
    pub p: u32,
    pub q: u32,
    /// `⟨f, g⟩` (only used when `p = q`).
    pub inner: f64,
    /// `‖f‖²` (only used when `p < q`).
    pub f_norm_sq: f64,
    /// `‖f ⊗_s f‖²` at index `s − 1`, `s = 1..p−1`.
    pub f_contractions: &'a [f64],
    /// `‖g ⊗_s g‖²` at index `s − 1`, `s = 1..q−1`.
    pub g_contractions: &'a [f64],
}

/// Upper bound on `E[(a − q⁻¹⟨DF, DG⟩)²]` from the pair terms.
pub fn pair_bound(a: f64, t: &PairTerms<'_>) -> Result<f64> {
    let (p, q) = (t.p, t.q);
    if p > q || p == 0 {
        return Err(invalid(format!("pair ranks must satisfy 1 ≤ p ≤ q, got ({p}, {q})")));
    }
    let contraction = |v: &[f64], s: u32| -> Result<f64> {
        v.get(s as usize - 1).copied().ok_or_else(|| invalid(format!("missing contraction of order {s}")))
    };
    let pf = p as f64;
    let mut sum = 0.0;
    let value = if p == q {
        for r in 1..p {
            let w = factorial(r - 1)?.powi(2) * binomial(p - 1, r - 1).powi(4) * factorial(2 * p - 2 * r)?;
            sum += w * (contraction(t.f_contractions, p - r)? + contraction(t.g_contractions, p - r)?);
        }
        let first = a - factorial(p)? * t.inner;
        first * first + 0.5 * pf * pf * sum
    } else {
        for r in 1..p {
            let w = factorial(r - 1)?.powi(2)
                * binomial(p - 1, r - 1).powi(2)
                * binomial(q - 1, r - 1).powi(2)
                * factorial(p + q - 2 * r)?;
            sum += w * (contraction(t.f_contractions, p - r)? + contraction(t.g_contractions, q - r)?);
        }
        let g_norm = contraction(t.g_contractions, q - p)?.max(0.0).sqrt();
        let cross = factorial(p)?.powi(2) * binomial(q - 1, p - 1).powi(2) * factorial(q - p)? * t.f_norm_sq * g_norm;
        a * a + cross + 0.5 * pf * pf * sum
    };
    Ok(value)
}

/// All contraction norms `‖f ⊗_s f‖²`, `s = 1..q−1`.
pub fn contraction_profile(f: &StepKernel, hurst: HurstIndex) -> Result<Vec<f64>> {
    (1..f.q.get()).map(|s| contraction_norm_sq(f, s, hurst)).collect()
}

/// Upper bound on `E[(a − q⁻¹⟨DF, DG⟩)²]` for `F = I_p(f)`, `G = I_q(g)`; the
/// kernels are swapped when `p > q`.
pub fn lemma_pair_bound(a: f64, f: &StepKernel, g: &StepKernel, hurst: HurstIndex) -> Result<f64> {
    let (f, g) = if f.q <= g.q { (f, g) } else { (g, f) };
    let fc = contraction_profile(f, hurst)?;
    let gc = contraction_profile(g, hurst)?;
    let (p, q) = (f.q.get(), g.q.get());
    let inner = if p == q { kernel_inner(f, g, hurst)? } else { 0.0 };
    let f_norm_sq = if p < q { kernel_inner(f, f, hurst)? } else { 0.0 };
    pair_bound(a, &PairTerms { p, q, inner, f_norm_sq, f_contractions: &fc, g_contractions: &gc })
}

/// Every intermediate of a bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub hurst: f64,
    pub q: u32,
    pub n: usize,
    pub times: Vec<f64>,
    pub sigma: f64,
    pub sigma_lags: u64,
    pub truncation_tail: f64,
    /// Largest lag entering any sum; all lags up to it are included exactly.
    pub window: usize,
    /// `a`-targets of the pair estimates (defaults to `C`).
    pub targets: Vec<Vec<f64>>,
    pub inner_products: Vec<Vec<f64>>,
    /// `contraction_norms_sq[i][r−1] = ‖f_i ⊗_r f_i‖²`.
    pub contraction_norms_sq: Vec<Vec<f64>>,
    pub lemma_entries: Vec<Vec<f64>>,
    pub prefactor: f64,
    pub bound: f64,
}

/// `prefactor(C) · √(Σ_ij lemma_pair_bound(C(i,j), f_i, f_j))`.
pub fn wasserstein_bound(fam: &KernelFamily, c: &CovarianceMatrix) -> Result<BoundReport> {
    wasserstein_bound_with_targets(fam, c, c.matrix())
}

/// As [`wasserstein_bound`] with explicit `a`-targets in the pair estimates.
pub fn wasserstein_bound_with_targets(
    fam: &KernelFamily,
    c: &CovarianceMatrix,
    targets: &SymMatrix,
) -> Result<BoundReport> {
    let d = fam.dim();
    check_dims(d, c.dim())?;
    check_dims(d, targets.dim())?;
    let hurst = fam.hurst;
    let q = fam.q.get();

    // Contraction sums depend only on the block length; scale by c⁴ afterwards.
    let mut lengths: Vec<usize> = fam.kernels.iter().map(StepKernel::len).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let unit: Vec<Vec<f64>> =
        map_indexed(lengths.len(), |i| (1..q).map(|r| unit_contraction_sum(lengths[i], r, q, hurst)).collect());
    let by_len: HashMap<usize, &Vec<f64>> = lengths.iter().copied().zip(&unit).collect();
    let contractions: Vec<Vec<f64>> = fam
        .kernels
        .iter()
        .map(|k| {
            let c4 = k.scale.powi(4);
            by_len[&k.len()].iter().map(|v| c4 * v).collect()
        })
        .collect();

    let mut inner = vec![vec![0.0; d]; d];
    let mut entries = vec![vec![0.0; d]; d];
    for (i, fi) in fam.kernels.iter().enumerate() {
        for (j, fj) in fam.kernels.iter().enumerate().skip(i) {
            let v = kernel_inner(fi, fj, hurst)?;
            inner[i][j] = v;
            inner[j][i] = v;
        }
    }
    for i in 0..d {
        for j in 0..d {
            let terms = PairTerms {
                p: q,
                q,
                inner: inner[i][j],
                f_norm_sq: 0.0,
                f_contractions: &contractions[i],
                g_contractions: &contractions[j],
            };
            entries[i][j] = pair_bound(targets.get(i, j), &terms)?;
        }
    }
    // fixed summation order: row-major
    let total: f64 = entries.iter().flatten().sum();
    let pre = prefactor(c);
    Ok(BoundReport {
        hurst: hurst.get(),
        q,
        n: fam.n,
        times: fam.times.clone(),
        sigma: fam.sigma.sigma,
        sigma_lags: fam.sigma.lags,
        truncation_tail: fam.sigma.tail,
        window: fam.path_len().saturating_sub(1),
        targets: targets.rows(),
        inner_products: inner,
        contraction_norms_sq: contractions,
        lemma_entries: entries,
        prefactor: pre,
        bound: pre * total.sqrt(),
    })
}

/// Exponent `e` of the rate `n^e`: `−1/2` for `H ≤ 1/2`, `H − 1` for
/// `1/2 < H ≤ (2q−3)/(2q−2)`, `qH − q + 1/2` up to `(2q−1)/(2q)`.
pub fn rate_exponent(hurst: HurstIndex, q: HermiteRank) -> Result<f64> {
    let h = hurst.get();
    let qf = q.get() as f64;
    let limit = (2.0 * qf - 1.0) / (2.0 * qf);
    if h >= limit {
        return Err(Error::HypothesisViolation(format!("H = {h} must be below (2q−1)/(2q) = {limit}")));
    }
    let middle = if q.get() >= 2 { (2.0 * qf - 3.0) / (2.0 * qf - 2.0) } else { 0.5 };
    Ok(if h <= 0.5 {
        -0.5
    } else if h <= middle {
        h - 1.0
    } else {
        qf * h - qf + 0.5
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub bound: f64,
}

/// Bound values along `n_list`, sharing one `σ` evaluation.
pub fn bound_curve(
    hurst: HurstIndex,
    q: HermiteRank,
    times: &[f64],
    n_list: &[usize],
    c: &CovarianceMatrix,
) -> Result<Vec<CurvePoint>> {
    Ok(bound_curve_reports(hurst, q, times, n_list, c)?
        .into_iter()
        .map(|r| CurvePoint { n: r.n, bound: r.bound })
        .collect())
}

/// Full reports along `n_list`.
pub fn bound_curve_reports(
    hurst: HurstIndex,
    q: HermiteRank,
    times: &[f64],
    n_list: &[usize],
    c: &CovarianceMatrix,
) -> Result<Vec<BoundReport>> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n values must be strictly increasing"));
    }
    let q = HermiteRank::breuer_major(q.get())?;
    let sigma = sigma_bm(hurst, q, SIGMA_DEFAULT_LAGS)?;
    n_list
        .iter()
        .map(|&n| {
            let fam = kernel_family_with_sigma(hurst, q, n, times, sigma)?;
            wasserstein_bound(&fam, c)
        })
        .collect()
}
