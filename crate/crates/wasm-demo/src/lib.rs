//! wasm-bindgen bindings behind `www/index.html`.
//!
//! Every function returns either a plain number array or a JSON string so the
//! page needs no glue beyond the generated module.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use wassbound::harness::fit_rate;
use wassbound::linalg::hs_norm;
use wassbound::{
    bound_curve, gaussian_pair_bound, q_factor, rate_exponent, sample_fgn, CovarianceMatrix, HermiteRank, HurstIndex,
};

type JsResult<T> = Result<T, JsError>;

fn js(e: wassbound::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// fBm on `[0, 1]` at `n + 1` grid points: cumulative fGn scaled by `n^{−H}`.
#[wasm_bindgen]
pub fn fbm_path(hurst: f64, n: usize, seed: u64) -> JsResult<Vec<f64>> {
    let path = sample_fgn(HurstIndex::new(hurst).map_err(js)?, n, seed).map_err(js)?;
    let scale = (n as f64).powf(-hurst);
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for x in &path.increments {
        acc += x;
        out.push(acc * scale);
    }
    Ok(out)
}

/// Bound curve for `n = 2^min_pow..=2^max_pow` with `C = I`, plus the fitted
/// slope and the theoretical exponent, as JSON.
pub fn curve_value(hurst: f64, q: u32, times: &[f64], min_pow: u32, max_pow: u32) -> wassbound::Result<Value> {
    let h = HurstIndex::new(hurst)?;
    let q = HermiteRank::breuer_major(q)?;
    let n_list: Vec<usize> = (min_pow..=max_pow).map(|k| 1usize << k).collect();
    let c = CovarianceMatrix::identity(times.len().saturating_sub(1).max(1));
    let curve = bound_curve(h, q, times, &n_list, &c)?;
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.n as f64, p.bound)).collect();
    let slope = if pts.len() >= 3 { Some(fit_rate(&pts)?.slope) } else { None };
    Ok(json!({
        "n": n_list,
        "bound": curve.iter().map(|p| p.bound).collect::<Vec<_>>(),
        "slope": slope,
        "rate_exponent": rate_exponent(h, q)?,
    }))
}

#[wasm_bindgen]
pub fn bound_curve_json(hurst: f64, q: u32, times: Vec<f64>, min_pow: u32, max_pow: u32) -> JsResult<String> {
    Ok(curve_value(hurst, q, &times, min_pow, max_pow).map_err(js)?.to_string())
}

/// Bound between `N(0, K)` and `N(0, C)` for row-major `dim×dim` inputs.
pub fn pair_value(dim: usize, k: &[f64], c: &[f64]) -> wassbound::Result<Value> {
    let rows = |m: &[f64]| -> Vec<Vec<f64>> { m.chunks(dim.max(1)).map(<[f64]>::to_vec).collect() };
    let k = CovarianceMatrix::from_rows(&rows(k))?;
    let c = CovarianceMatrix::from_rows(&rows(c))?;
    Ok(json!({
        "bound": gaussian_pair_bound(&k, &c)?,
        "q_factor": q_factor(&c, &k)?,
        "hs_distance": hs_norm(&c.matrix().sub(k.matrix())?),
        "k_eigenvalues": k.spectrum(),
        "c_eigenvalues": c.spectrum(),
    }))
}

#[wasm_bindgen]
pub fn gaussian_pair_json(dim: usize, k: Vec<f64>, c: Vec<f64>) -> JsResult<String> {
    Ok(pair_value(dim, &k, &c).map_err(js)?.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_halves_per_quadrupling_at_h_half() {
        let v = curve_value(0.5, 2, &[0.0, 1.0, 2.0], 6, 8).unwrap();
        let b: Vec<f64> = serde_json::from_value(v["bound"].clone()).unwrap();
        assert!((b[2] / b[0] - 0.5).abs() < 1e-10);
        assert!((v["slope"].as_f64().unwrap() + 0.5).abs() < 1e-10);
    }

    #[test]
    fn pair_in_one_dimension() {
        let v = pair_value(1, &[1.0], &[4.0]).unwrap();
        assert_eq!(v["bound"].as_f64(), Some(1.5));
    }

    #[test]
    fn pair_rejects_indefinite() {
        assert!(pair_value(2, &[1.0, 2.0, 2.0, 1.0], &[1.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn path_starts_at_zero() {
        let p = fbm_path(0.7, 64, 3).unwrap();
        assert_eq!(p.len(), 65);
        assert_eq!(p[0], 0.0);
        assert_eq!(p, fbm_path(0.7, 64, 3).unwrap());
    }
}
