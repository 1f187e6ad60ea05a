//! Monte Carlo side: simulated Breuer–Major increment vectors, pathwise
//! Malliavin inner products, empirical Wasserstein estimators and log-log
//! rate fits.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::chaos::{kernel_family, KernelFamily};
use crate::error::{invalid, Error, Result};
use crate::fgn::{rho, FgnPath, FgnSampler, HurstIndex};
use crate::hermite::{hermite_eval, hermite_pair, HermiteRank};
use crate::linalg::{dot, SymMatrix};
use crate::rng::{hash64, map_indexed, NormalStream};
use crate::sample::{Estimate, SampleBatch};
use crate::toeplitz::CirculantEmbedding;

/// Largest sample size handled by exact matching.
pub const MATCHING_LIMIT: usize = 512;
pub const SLICED_DIRECTIONS: usize = 128;
pub const SLICED_SEED: u64 = 0x51_1ced;

const PATH_TAG: &str = "bm-vector";

/// Maps fGn paths to the increment vector and to `(1/q)⟨DF_i, DF_j⟩`.
pub struct PathFunctional<'a> {
    fam: &'a KernelFamily,
    sampler: FgnSampler,
    embedding: CirculantEmbedding,
}

impl<'a> PathFunctional<'a> {
    pub fn new(fam: &'a KernelFamily) -> Result<Self> {
        let len = fam.path_len();
        let h = fam.hurst;
        Ok(Self {
            fam,
            sampler: FgnSampler::new(h, len)?,
            embedding: CirculantEmbedding::new(len, |j| rho(h, j as f64)),
        })
    }

    pub fn family(&self) -> &KernelFamily {
        self.fam
    }

    /// Path for replication `r` under `master`.
    pub fn path(&self, master: u64, r: u64) -> FgnPath {
        self.sampler.sample(hash64(master, PATH_TAG, r))
    }

    /// `F_i = c_i Σ_{k∈B_i} H_q(x_k)`.
    pub fn vector(&self, path: &FgnPath) -> Result<Vec<f64>> {
        self.check_len(path)?;
        let q = self.fam.q.get();
        Ok(self
            .fam
            .kernels
            .iter()
            .map(|k| k.scale * path.increments[k.k0..k.k1].iter().map(|&x| hermite_eval(q, x)).sum::<f64>())
            .collect())
    }

    /// `(1/q)⟨DF_i, DF_j⟩ = q c_i c_j Σ_{k∈B_i, l∈B_j} H_{q−1}(x_k) H_{q−1}(x_l) ρ(k−l)`,
    /// with the lag sum done exactly as an FFT Toeplitz product. The upper
    /// triangle is computed and mirrored.
    pub fn malliavin(&self, path: &FgnPath) -> Result<SymMatrix> {
        self.check_len(path)?;
        let q = self.fam.q.get();
        let len = self.fam.path_len();
        let lower: Vec<f64> = path.increments[..len].iter().map(|&x| hermite_pair(q, x).1).collect();
        let d = self.fam.dim();
        let mut entries = vec![0.0; d * d];
        let mut masked = vec![0.0; len];
        for j in 0..d {
            let kj = &self.fam.kernels[j];
            masked.fill(0.0);
            masked[kj.k0..kj.k1].copy_from_slice(&lower[kj.k0..kj.k1]);
            let w = self.embedding.apply(&masked);
            for i in 0..=j {
                let ki = &self.fam.kernels[i];
                let s = dot(&lower[ki.k0..ki.k1], &w[ki.k0..ki.k1]);
                let v = q as f64 * ki.scale * kj.scale * s;
                entries[i * d + j] = v;
                entries[j * d + i] = v;
            }
        }
        SymMatrix::from_row_major(d, entries)
    }

    fn check_len(&self, path: &FgnPath) -> Result<()> {
        if path.len() < self.fam.path_len() {
            return Err(invalid(format!(
                "path of length {} does not cover the blocks (need {})",
                path.len(),
                self.fam.path_len()
            )));
        }
        Ok(())
    }
}

/// `m` replications of the increment vector for a kernel family.
pub fn simulate_family(fam: &KernelFamily, m: usize, seed: u64) -> Result<SampleBatch> {
    let op = PathFunctional::new(fam)?;
    let rows = map_indexed(m, |r| op.vector(&op.path(seed, r as u64)));
    let values = rows.into_iter().collect::<Result<Vec<_>>>()?.concat();
    SampleBatch::new(m, fam.dim(), values, seed, provenance(fam))
}

/// `m` replications of `((S_n(t_i) − S_n(t_{i−1}))/√(t_i − t_{i−1}))_i`.
pub fn simulate_bm_vector(
    hurst: HurstIndex,
    q: HermiteRank,
    n: usize,
    times: &[f64],
    m: usize,
    seed: u64,
) -> Result<SampleBatch> {
    simulate_family(&kernel_family(hurst, q, n, times)?, m, seed)
}

/// Increment vectors together with the pathwise Malliavin matrices, computed
/// from the same paths.
pub fn simulate_with_malliavin(fam: &KernelFamily, m: usize, seed: u64) -> Result<(SampleBatch, Vec<SymMatrix>)> {
    let op = PathFunctional::new(fam)?;
    let rows = map_indexed(m, |r| -> Result<(Vec<f64>, SymMatrix)> {
        let path = op.path(seed, r as u64);
        Ok((op.vector(&path)?, op.malliavin(&path)?))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(m * fam.dim());
    let mut mats = Vec::with_capacity(m);
    for (v, g) in rows {
        values.extend(v);
        mats.push(g);
    }
    Ok((SampleBatch::new(m, fam.dim(), values, seed, provenance(fam))?, mats))
}

fn provenance(fam: &KernelFamily) -> String {
    format!("{PATH_TAG} H={} q={} n={}", fam.hurst.get(), fam.q.get(), fam.n)
}

/// `(1/q)⟨DF_i, DF_j⟩` for one path.
pub fn pathwise_malliavin_inner(fam: &KernelFamily, path: &FgnPath) -> Result<SymMatrix> {
    PathFunctional::new(fam)?.malliavin(path)
}

/// Estimator used for a Wasserstein value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum W1Method {
    Quantile1d,
    Matching,
    Sliced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinEstimate {
    pub value: f64,
    pub method: W1Method,
    pub sizes: (usize, usize),
}

fn sorted_finite(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite sample value".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `(1/m) Σ |x_(i) − Φ⁻¹((i − 1/2)/m)|` against the standard normal.
pub fn empirical_w1_1d(sample: &[f64]) -> Result<WassersteinEstimate> {
    let m = sample.len();
    if m < 2 {
        return Err(invalid("need at least two sample values"));
    }
    let sorted = sorted_finite(sample)?;
    let mf = m as f64;
    let mut total = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        total += (x - normal_quantile((i as f64 + 0.5) / mf)?).abs();
    }
    Ok(WassersteinEstimate { value: total / mf, method: W1Method::Quantile1d, sizes: (m, 0) })
}

/// `∫₀¹ |F_a⁻¹(p) − F_b⁻¹(p)| dp` for two empirical measures on the line.
pub fn w1_two_sample_1d(a: &[f64], b: &[f64]) -> Result<WassersteinEstimate> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("empty sample"));
    }
    let (sa, sb) = (sorted_finite(a)?, sorted_finite(b)?);
    Ok(WassersteinEstimate { value: quantile_l1(&sa, &sb), method: W1Method::Quantile1d, sizes: (a.len(), b.len()) })
}

fn quantile_l1(sa: &[f64], sb: &[f64]) -> f64 {
    if sa.len() == sb.len() {
        return sa.iter().zip(sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64;
    }
    let (ma, mb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j, mut p, mut total) = (0usize, 0usize, 0.0f64, 0.0);
    while i < sa.len() && j < sb.len() {
        let next = ((i + 1) as f64 / ma).min((j + 1) as f64 / mb);
        total += (next - p) * (sa[i] - sb[j]).abs();
        p = next;
        if (i + 1) as f64 / ma <= next {
            i += 1;
        }
        if (j + 1) as f64 / mb <= next {
            j += 1;
        }
    }
    total
}

/// Exact `W₁` between two equal-size empirical measures (Euclidean cost),
/// via the Hungarian algorithm.
pub fn w1_matching(a: &SampleBatch, b: &SampleBatch) -> Result<WassersteinEstimate> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch { expected: a.d(), got: b.d() });
    }
    if a.m() != b.m() {
        return Err(invalid(format!("matching needs equal sample sizes, got {} and {}", a.m(), b.m())));
    }
    let m = a.m();
    let cost: Vec<f64> = a
        .rows()
        .flat_map(|x| b.rows().map(move |y| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()))
        .collect();
    let assignment = hungarian(m, &cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
    Ok(WassersteinEstimate { value: total / m as f64, method: W1Method::Matching, sizes: (m, m) })
}

/// Minimum-cost perfect matching for a square `m×m` row-major cost matrix;
/// returns the column assigned to each row.
pub fn hungarian(m: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), m * m, "cost matrix size");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; m];
    for j in 1..=m {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// `E|θ₁|` for `θ` uniform on the unit sphere of `ℝ^d`.
fn mean_abs_coordinate(d: usize) -> f64 {
    let lg = |x: f64| statrs::function::gamma::ln_gamma(x);
    let df = d as f64;
    (lg(df / 2.0) - lg((df + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

/// Sliced estimate: two-sample `W₁` of projections averaged over seeded
/// uniform directions, divided by `E|θ₁|` so that a rigid translation by `v`
/// scores exactly `‖v‖`.
pub fn sliced_w1(a: &SampleBatch, b: &SampleBatch, directions: usize, seed: u64) -> Result<WassersteinEstimate> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch { expected: a.d(), got: b.d() });
    }
    if directions == 0 {
        return Err(invalid("need at least one direction"));
    }
    let d = a.d();
    let values = map_indexed(directions, |k| -> Result<f64> {
        let mut s = NormalStream::derived(seed, "sliced", k as u64);
        let mut theta = s.normals(d);
        let norm = dot(&theta, &theta).sqrt();
        theta.iter_mut().for_each(|t| *t /= norm);
        let pa: Vec<f64> = a.rows().map(|x| dot(x, &theta)).collect();
        let pb: Vec<f64> = b.rows().map(|x| dot(x, &theta)).collect();
        Ok(w1_two_sample_1d(&pa, &pb)?.value)
    });
    let total: f64 = values.into_iter().collect::<Result<Vec<_>>>()?.iter().sum();
    Ok(WassersteinEstimate {
        value: total / directions as f64 / mean_abs_coordinate(d),
        method: W1Method::Sliced,
        sizes: (a.m(), b.m()),
    })
}

/// Exact matching up to 512 points per side, sliced beyond (or for unequal sizes).
pub fn empirical_w1_multid(a: &SampleBatch, b: &SampleBatch) -> Result<WassersteinEstimate> {
    if a.m() == b.m() && a.m() <= MATCHING_LIMIT {
        w1_matching(a, b)
    } else {
        sliced_w1(a, b, SLICED_DIRECTIONS, SLICED_SEED)
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(p)`: Acklam's rational approximation refined by one Halley step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("probability {p} outside (0, 1)")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const LOW: f64 = 0.02425;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Halley step on Φ(x) − p, using the upper tail when p > 1/2
    let e = if p > 0.5 { (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2) } else { normal_cdf(x) - p };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

/// Least-squares fit of `log(value) = intercept + slope·log(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_sum_squares: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub points: usize,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*n > 0.0 && *v > 0.0)) {
        return Err(invalid(format!("rate fit needs positive n and values, got ({n}, {v})")));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct n"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ns = points.iter().map(|p| p.0);
    Ok(RateFit {
        slope,
        intercept,
        residual_sum_squares: rss,
        n_min: ns.clone().fold(f64::INFINITY, f64::min),
        n_max: ns.fold(f64::NEG_INFINITY, f64::max),
        points: points.len(),
    })
}

/// Null distribution of [`empirical_w1_1d`]: its value on `reps` seeded
/// standard normal samples of size `m`.
pub fn quantile_null_band(m: usize, reps: usize, seed: u64) -> Result<Estimate> {
    let vals = map_indexed(reps, |r| empirical_w1_1d(&NormalStream::derived(seed, "w1-null", r as u64).normals(m)));
    let vals: Vec<f64> = vals.into_iter().map(|w| w.map(|w| w.value)).collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{kernel_inner, StepKernel};
    use crate::linalg::CovarianceMatrix;
    use crate::sample::sample_gaussian;
    use approx::assert_abs_diff_eq;

    fn h(x: f64) -> HurstIndex {
        HurstIndex::new(x).unwrap()
    }

    fn q(x: u32) -> HermiteRank {
        HermiteRank::new(x).unwrap()
    }

    #[test]
    fn simulated_vector_moments() {
        let batch = simulate_bm_vector(h(0.5), q(2), 512, &[0.0, 1.0, 2.0], 2000, 7).unwrap();
        for mu in batch.mean() {
            assert!(mu.abs() < 4.0 * (1.0 / 2000f64).sqrt());
        }
        let cov = batch.covariance();
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov.get(i, j) - f64::from(u8::from(i == j))).abs() < 0.1);
            }
        }
    }

    #[test]
    fn rank_one_malliavin_is_deterministic() {
        let hurst = h(0.7);
        let rank = q(1);
        let kernels = vec![StepKernel::new(rank, 0.3, 0, 5).unwrap(), StepKernel::new(rank, 0.2, 5, 9).unwrap()];
        let sigma = crate::fgn::sigma_bm(hurst, q(2), 1000).unwrap();
        let fam = KernelFamily { hurst, q: rank, n: 9, times: vec![0.0, 1.0, 2.0], kernels, sigma };
        let path = crate::fgn::sample_fgn(hurst, 9, 3).unwrap();
        let g = pathwise_malliavin_inner(&fam, &path).unwrap();
        for i in 0..2 {
            let k = &fam.kernels[i];
            let direct: f64 =
                (k.k0..k.k1).flat_map(|a| (k.k0..k.k1).map(move |b| rho(hurst, a as f64 - b as f64))).sum();
            assert_abs_diff_eq!(g.get(i, i), k.scale * k.scale * direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn malliavin_matches_direct_sum() {
        let hurst = h(0.6);
        let fam = kernel_family(hurst, q(3), 20, &[0.0, 0.5, 1.0, 1.6]).unwrap();
        let op = PathFunctional::new(&fam).unwrap();
        let path = op.path(5, 0);
        let g = op.malliavin(&path).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (ki, kj) = (&fam.kernels[i], &fam.kernels[j]);
                let mut s = 0.0;
                for a in ki.k0..ki.k1 {
                    for b in kj.k0..kj.k1 {
                        s += hermite_eval(2, path.increments[a])
                            * hermite_eval(2, path.increments[b])
                            * rho(hurst, a as f64 - b as f64);
                    }
                }
                assert_abs_diff_eq!(g.get(i, j), 3.0 * ki.scale * kj.scale * s, epsilon = 1e-11);
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn malliavin_mean_matches_isometry() {
        let hurst = h(0.5);
        let fam = kernel_family(hurst, q(2), 256, &[0.0, 1.0, 2.0]).unwrap();
        let (_, mats) = simulate_with_malliavin(&fam, 2000, 17).unwrap();
        for i in 0..2 {
            let vals: Vec<f64> = mats.iter().map(|g| g.get(i, i)).collect();
            let est = Estimate::from_samples(&vals);
            let f = &fam.kernels[i];
            let target = 2.0 * kernel_inner(f, f, hurst).unwrap();
            assert!((est.mean - target).abs() <= 4.0 * est.std_error, "{est:?} vs {target}");
        }
    }

    #[test]
    fn short_path_rejected() {
        let fam = kernel_family(h(0.5), q(2), 10, &[0.0, 1.0]).unwrap();
        let path = crate::fgn::sample_fgn(h(0.5), 5, 1).unwrap();
        assert!(pathwise_malliavin_inner(&fam, &path).is_err());
    }

    #[test]
    fn serial_and_parallel_agree() {
        let fam = kernel_family(h(0.65), q(2), 64, &[0.0, 1.0, 2.0]).unwrap();
        let batch = simulate_family(&fam, 50, 99).unwrap();
        let op = PathFunctional::new(&fam).unwrap();
        let serial: Vec<f64> = (0..50).flat_map(|r| op.vector(&op.path(99, r)).unwrap()).collect();
        assert_eq!(batch.values(), &serial[..]);
    }

    #[test]
    fn w1_1d_examples() {
        let m = 200;
        let quantiles: Vec<f64> = (0..m).map(|i| normal_quantile((i as f64 + 0.5) / m as f64).unwrap()).collect();
        assert_eq!(empirical_w1_1d(&quantiles).unwrap().value, 0.0);
        let shifted: Vec<f64> = quantiles.iter().map(|x| x + 0.3).collect();
        assert_abs_diff_eq!(empirical_w1_1d(&shifted).unwrap().value, 0.3, epsilon = 1e-12);
        let big = NormalStream::new(1).normals(100_000);
        assert!(empirical_w1_1d(&big).unwrap().value < 0.01);
        assert!(empirical_w1_1d(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn two_sample_unequal_sizes() {
        let a = [0.0, 1.0];
        let b = [0.0, 0.5, 1.0];
        // quantile functions differ on (1/3, 1/2) by 0.5 and on (1/2, 2/3) by 0.5
        assert_abs_diff_eq!(w1_two_sample_1d(&a, &b).unwrap().value, 0.5 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w1_two_sample_1d(&a, &a).unwrap().value, 0.0);
    }

    #[test]
    fn hungarian_small_cases() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        assert_eq!(hungarian(3, &cost), vec![1, 0, 2]);
        let mut s = NormalStream::new(4);
        for _ in 0..20 {
            let m = 5;
            let cost: Vec<f64> = (0..m * m).map(|_| s.uniform()).collect();
            let best = permutations(m)
                .into_iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let got: f64 = hungarian(m, &cost).iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
            assert_abs_diff_eq!(got, best, epsilon = 1e-12);
        }
    }

    fn permutations(m: usize) -> Vec<Vec<usize>> {
        if m == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(m - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, m - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn multid_examples() {
        let c = CovarianceMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.7]]).unwrap();
        let a = sample_gaussian(&c, 100, 1).unwrap();
        assert_eq!(empirical_w1_multid(&a, &a).unwrap().value, 0.0);
        let v = [0.6, -0.8];
        let shifted: Vec<f64> = a.rows().flat_map(|x| [x[0] + v[0], x[1] + v[1]]).collect();
        let b = SampleBatch::new(100, 2, shifted, 1, "shifted").unwrap();
        let w = empirical_w1_multid(&a, &b).unwrap();
        assert_eq!(w.method, W1Method::Matching);
        assert_abs_diff_eq!(w.value, 1.0, epsilon = 1e-12);
        let sliced = sliced_w1(&a, &b, 4096, 3).unwrap();
        assert_abs_diff_eq!(sliced.value, 1.0, epsilon = 0.03);
    }

    #[test]
    fn sliced_and_matching_agree() {
        let ca = CovarianceMatrix::identity(2);
        let cb = CovarianceMatrix::from_rows(&[vec![2.5, 0.8], vec![0.8, 1.2]]).unwrap();
        let a = sample_gaussian(&ca, 512, 10).unwrap();
        let b = sample_gaussian(&cb, 512, 11).unwrap();
        let shifted: Vec<f64> = b.rows().flat_map(|x| [x[0] + 1.0, x[1] - 0.5]).collect();
        let b = SampleBatch::new(512, 2, shifted, 11, "b").unwrap();
        let exact = w1_matching(&a, &b).unwrap().value;
        let sliced = sliced_w1(&a, &b, SLICED_DIRECTIONS, SLICED_SEED).unwrap().value;
        assert!((sliced - exact).abs() <= 0.25 * exact, "{sliced} vs {exact}");
    }

    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.5 * (1.0 + erf_series(mid / std::f64::consts::SQRT_2)) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(normal_quantile(0.975).unwrap(), lo, epsilon = 1e-9);
        assert_abs_diff_eq!(lo, 1.959964, epsilon = 1e-6);
        for i in 1..=1000 {
            let p = i as f64 / 1001.0;
            assert_abs_diff_eq!(normal_cdf(normal_quantile(p).unwrap()), p, epsilon = 1e-9);
        }
        for p in [1e-300, 1e-12, 1e-5, 1.0 - 1e-9] {
            let x = normal_quantile(p).unwrap();
            let back = if p < 0.5 { normal_cdf(x) } else { 1.0 - normal_cdf(x) };
            let target = if p < 0.5 { p } else { 1.0 - p };
            assert!((back - target).abs() <= 1e-12 * target, "{p}");
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let exact: Vec<(f64, f64)> = (7..=13).map(|k| (2f64.powi(k), 7.0 * 2f64.powi(k).powf(-0.5))).collect();
        assert_abs_diff_eq!(fit_rate(&exact).unwrap().slope, -0.5, epsilon = 1e-12);
        let mut s = NormalStream::new(8);
        let noisy: Vec<(f64, f64)> = exact.iter().map(|&(n, v)| (n, v * (1.0 + 0.01 * s.normal()))).collect();
        assert!((fit_rate(&noisy).unwrap().slope + 0.5).abs() < 0.02);
        assert!(fit_rate(&exact[..2]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn hungarian_is_optimal(m in 1usize..=6, raw in proptest::collection::vec(0.0..10.0f64, 36)) {
            let cost = &raw[..m * m];
            let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum::<f64>();
            let best = permutations(m).iter().map(|p| total(p)).fold(f64::INFINITY, f64::min);
            let got = hungarian(m, cost);
            let mut seen = got.clone();
            seen.sort_unstable();
            proptest::prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
            proptest::prop_assert!((total(&got) - best).abs() <= 1e-9);
        }

        #[test]
        fn two_sample_w1_is_symmetric(
            a in proptest::collection::vec(-5.0..5.0f64, 1..40),
            b in proptest::collection::vec(-5.0..5.0f64, 1..40),
        ) {
            let ab = w1_two_sample_1d(&a, &b).unwrap().value;
            let ba = w1_two_sample_1d(&b, &a).unwrap().value;
            proptest::prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
            proptest::prop_assert!(ab >= 0.0);
        }

        #[test]
        fn rate_fit_recovers_power_laws(slope in -2.0..0.5f64, scale in 0.01..100.0f64, k in 3usize..10) {
            let pts: Vec<(f64, f64)> = (0..k).map(|i| {
                let n = 16.0 * 2f64.powi(i as i32);
                (n, scale * n.powf(slope))
            }).collect();
            let fit = fit_rate(&pts).unwrap();
            proptest::prop_assert!((fit.slope - slope).abs() <= 1e-10);
            proptest::prop_assert!((fit.intercept - scale.ln()).abs() <= 1e-8);
        }
    }
}
