//! Probabilists' Hermite polynomials `H_q(x) = (-1)^q e^{x²/2} dᵠ/dxᵠ e^{-x²/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest order for which factorials are evaluated (20! < 2^63).
pub const MAX_ORDER: u32 = 20;

/// Hermite rank `q ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct HermiteRank(u32);

impl HermiteRank {
    pub fn new(q: u32) -> Result<Self> {
        if q == 0 {
            return Err(invalid("Hermite rank must be at least 1"));
        }
        if q > MAX_ORDER {
            return Err(invalid(format!("Hermite rank {q} exceeds the supported maximum {MAX_ORDER}")));
        }
        Ok(Self(q))
    }

    /// Rank for Breuer–Major configurations, which need `q ≥ 2`.
    pub fn breuer_major(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::HypothesisViolation(format!("Breuer–Major rank must be ≥ 2, got {q}")));
        }
        Self::new(q)
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for HermiteRank {
    type Error = Error;
    fn try_from(q: u32) -> Result<Self> {
        Self::new(q)
    }
}

impl From<HermiteRank> for u32 {
    fn from(q: HermiteRank) -> u32 {
        q.0
    }
}

/// `H_q(x)` via `H_{k+1} = x H_k − k H_{k−1}`.
pub fn hermite_eval(q: u32, x: f64) -> f64 {
    hermite_pair(q, x).0
}

/// `(H_q(x), H_{q−1}(x))`, with `H_{−1} := 0`.
pub fn hermite_pair(q: u32, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `n!` in double precision for `n ≤ 20`.
pub fn factorial(n: u32) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(invalid(format!("factorial of {n} exceeds the supported maximum {MAX_ORDER}")));
    }
    Ok((1..=n).fold(1.0, |acc, k| acc * k as f64))
}

/// Binomial coefficient `C(n, k)` (zero when `k > n`).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[H_p(X) H_q(Y)]` for standard `(X, Y)` with correlation `rho`:
/// `q! rho^q` when `p = q`, zero otherwise.
pub fn hermite_cross_moment(p: u32, q: u32, rho: f64) -> Result<f64> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(invalid(format!("correlation {rho} outside [-1, 1]")));
    }
    if p != q {
        return Ok(0.0);
    }
    Ok(factorial(q)? * rho.powi(q as i32))
}

/// `E[H_q(X)²] = q!`.
pub fn hermite_variance(q: HermiteRank) -> Result<f64> {
    factorial(q.get())
}
