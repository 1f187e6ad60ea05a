//! Fractional Brownian motion covariance, fractional Gaussian noise sampling
//! and the Breuer–Major normalization `σ`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hermite::{factorial, HermiteRank};
use crate::linalg::{cholesky_sym, SymMatrix};
use crate::rng::NormalStream;
use crate::sample::read_f64s;
use crate::toeplitz::CirculantEmbedding;

/// Magic bytes of the binary path stream.
pub const PATH_MAGIC: [u8; 4] = *b"FGN1";
/// Relative negative-eigenvalue tolerance of the circulant embedding.
pub const EMBEDDING_TOLERANCE: f64 = 1e-9;
/// Default number of lags summed directly in `σ`.
pub const SIGMA_DEFAULT_LAGS: u64 = 1_000_000;
/// Direct summation in `σ` stops early once the asymptotic tail falls below
/// this fraction of the partial sum.
pub const SIGMA_TAIL_RATIO: f64 = 1e-10;

/// Hurst index in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(invalid(format!("Hurst index {h} outside (0, 1)")));
        }
        Ok(Self(h))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The Breuer–Major hypothesis `H < 1 − 1/(2q)`.
    pub fn check_breuer_major(self, q: HermiteRank) -> Result<()> {
        let limit = 1.0 - 1.0 / (2.0 * q.get() as f64);
        if self.0 >= limit {
            return Err(Error::HypothesisViolation(format!(
                "H = {} must be below 1 − 1/(2q) = {limit} for q = {}",
                self.0,
                q.get()
            )));
        }
        Ok(())
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

/// Autocovariance of unit-step fGn,
/// `ρ(x) = ½(|x+1|^{2H} + |x−1|^{2H} − 2|x|^{2H})`.
///
/// For `|x| ≥ 4` the difference is summed as the binomial series
/// `|x|^{2H} Σ_{k≥1} C(2H, 2k) |x|^{−2k}`, which avoids the cancellation of the
/// closed form at large lags.
pub fn rho(h: HurstIndex, x: f64) -> f64 {
    let a = 2.0 * h.get();
    let ax = x.abs();
    if ax < 4.0 {
        return 0.5 * ((ax + 1.0).powf(a) + (ax - 1.0).abs().powf(a) - 2.0 * ax.powf(a));
    }
    let y2 = 1.0 / (ax * ax);
    // C(a, 2) y²
    let mut coef = a * (a - 1.0) / 2.0;
    let mut power = y2;
    let mut sum = 0.0;
    for k in 1..=80 {
        let term = coef * power;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        let kf = k as f64;
        coef *= (a - 2.0 * kf) * (a - 2.0 * kf - 1.0) / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        power *= y2;
    }
    ax.powf(a) * sum
}

/// `R(s, t) = ½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(h: HurstIndex, s: f64, t: f64) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(invalid(format!("fBm covariance needs nonnegative times, got ({s}, {t})")));
    }
    let a = 2.0 * h.get();
    Ok(0.5 * (t.powf(a) + s.powf(a) - (t - s).abs().powf(a)))
}

/// How a path was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Circulant,
    Cholesky,
}

/// Unit-step increments `B_{k+1} − B_k`, `k = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgnPath {
    pub hurst: HurstIndex,
    pub increments: Vec<f64>,
    pub seed: u64,
    pub method: SamplingMethod,
}

impl FgnPath {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// One increment per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.increments {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    /// Little-endian binary: `FGN1`, H as f64, n as u32, seed as u64, then the
    /// increments as f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&PATH_MAGIC)?;
        w.write_all(&self.hurst.get().to_le_bytes())?;
        w.write_all(&(self.increments.len() as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a path written by [`FgnPath::write_binary`]. The method tag is not
    /// part of the stream and is reported as `Circulant`.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if head[..4] != PATH_MAGIC {
            return Err(invalid("bad fGn path magic"));
        }
        let hurst = HurstIndex::new(f64::from_le_bytes(head[4..12].try_into().unwrap()))?;
        let n = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(head[16..24].try_into().unwrap());
        let increments = read_f64s(&mut r, n)?;
        Ok(Self { hurst, increments, seed, method: SamplingMethod::Circulant })
    }
}

/// Reusable sampler for paths of a fixed length.
#[derive(Debug, Clone)]
pub struct FgnSampler {
    hurst: HurstIndex,
    n: usize,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Circulant(CirculantEmbedding),
    Cholesky(crate::linalg::CholeskyFactor),
}

impl FgnSampler {
    /// Circulant embedding, falling back to a dense Cholesky factor when the
    /// embedding has an eigenvalue below `−1e-9·λ_max`.
    pub fn new(hurst: HurstIndex, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("fGn path length must be at least 1"));
        }
        let emb = CirculantEmbedding::new(n, |j| rho(hurst, j as f64));
        if emb.min_eigenvalue() < -EMBEDDING_TOLERANCE * emb.max_eigenvalue() {
            log::warn!(
                "circulant embedding for H={} n={n} has eigenvalue {:e}; using Cholesky",
                hurst.get(),
                emb.min_eigenvalue()
            );
            return Self::cholesky(hurst, n);
        }
        Ok(Self { hurst, n, kind: SamplerKind::Circulant(emb) })
    }

    pub fn cholesky(hurst: HurstIndex, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("fGn path length must be at least 1"));
        }
        let cov = SymMatrix::from_fn(n, |i, j| rho(hurst, i.abs_diff(j) as f64));
        let factor = cholesky_sym(&cov)?;
        Ok(Self { hurst, n, kind: SamplerKind::Cholesky(factor) })
    }

    pub fn method(&self) -> SamplingMethod {
        match self.kind {
            SamplerKind::Circulant(_) => SamplingMethod::Circulant,
            SamplerKind::Cholesky(_) => SamplingMethod::Cholesky,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample(&self, seed: u64) -> FgnPath {
        let mut stream = NormalStream::new(seed);
        let increments = match &self.kind {
            SamplerKind::Circulant(emb) => emb.sample(|| stream.normal()),
            SamplerKind::Cholesky(l) => l.apply(&stream.normals(self.n)),
        };
        FgnPath { hurst: self.hurst, increments, seed, method: self.method() }
    }
}

/// `n` exact fGn increments for `seed`.
pub fn sample_fgn(hurst: HurstIndex, n: usize, seed: u64) -> Result<FgnPath> {
    Ok(FgnSampler::new(hurst, n)?.sample(seed))
}

/// `σ` together with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// `Σ_{r∈ℤ} ρ(r)^q`, including the tail correction.
    pub rho_power_sum: f64,
    /// Lags `1..=lags` summed directly.
    pub lags: u64,
    /// Asymptotic contribution of `|r| > lags` added to the direct sum.
    pub tail: f64,
}

/// `σ = √(q! Σ_{r∈ℤ} ρ(r)^q)`.
///
/// Lags `|r| ≤ R` are summed directly (stopping earlier once the tail is below
/// `1e-10` of the partial sum); the remainder is added from the large-lag
/// expansion of `ρ^q` summed with Hurwitz zeta values.
pub fn sigma_bm(hurst: HurstIndex, q: HermiteRank, truncation: u64) -> Result<SigmaEstimate> {
    hurst.check_breuer_major(q)?;
    if truncation < 1 {
        return Err(invalid("σ truncation must be at least one lag"));
    }
    let qi = q.get() as i32;
    let mut sum = Neumaier::default();
    let mut lags = 0;
    let mut tail = 0.0;
    for r in 1..=truncation {
        sum.add(2.0 * rho(hurst, r as f64).powi(qi));
        lags = r;
        if r >= 64 && r.is_power_of_two() {
            tail = rho_power_tail(hurst, q, r);
            if tail.abs() < SIGMA_TAIL_RATIO * (1.0 + sum.value()).abs() {
                break;
            }
        }
    }
    if lags == truncation {
        tail = rho_power_tail(hurst, q, lags);
    }
    let total = 1.0 + sum.value() + tail;
    let sigma2 = factorial(q.get())? * total;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::Numerical(format!("nonpositive σ² = {sigma2:e}")));
    }
    Ok(SigmaEstimate { sigma: sigma2.sqrt(), rho_power_sum: total, lags, tail })
}

/// `2 Σ_{r > from} ρ(r)^q` from `ρ(x) = x^{2H−2} Σ_k C(2H, 2k+2) x^{−2k}`.
pub fn rho_power_tail(hurst: HurstIndex, q: HermiteRank, from: u64) -> f64 {
    const TERMS: usize = 5;
    let a = 2.0 * hurst.get();
    let mut b = [0.0; TERMS];
    let mut coef = a * (a - 1.0) / 2.0;
    for (k, slot) in b.iter_mut().enumerate() {
        *slot = coef;
        let kf = (k + 1) as f64;
        coef *= (a - 2.0 * kf) * (a - 2.0 * kf - 1.0) / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
    }
    // e = b^q as a truncated power series in x^{-2}.
    let mut e = [0.0; TERMS];
    e[0] = 1.0;
    for _ in 0..q.get() {
        let mut next = [0.0; TERMS];
        for i in 0..TERMS {
            for j in 0..TERMS - i {
                next[i + j] += e[i] * b[j];
            }
        }
        e = next;
    }
    const EXPANSION_START: u64 = 64;
    let mut head = 0.0;
    for r in (from + 1)..EXPANSION_START {
        head += 2.0 * rho(hurst, r as f64).powi(q.get() as i32);
    }
    let s0 = q.get() as f64 * (2.0 - a);
    let start = (from.max(EXPANSION_START - 1) + 1) as f64;
    head + 2.0
        * e.iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| c * hurwitz_zeta(s0 + 2.0 * j as f64, start))
            .sum::<f64>()
}

/// `ζ(s, N) = Σ_{k≥0} (N+k)^{−s}` for `s > 1` and `N ≥ 16`, by Euler–Maclaurin.
pub fn hurwitz_zeta(s: f64, start: f64) -> f64 {
    // B_2/2!, B_4/4!, B_6/6!, B_8/8!
    const BERNOULLI: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut total = start.powf(1.0 - s) / (s - 1.0) + 0.5 * start.powf(-s);
    let mut rising = s;
    let mut power = start.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        total += b * rising * power;
        let j = j as f64;
        rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
        power /= start * start;
    }
    total
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
