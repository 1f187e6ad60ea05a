use wassbound::fgn::FgnSampler;
use wassbound::rng::hash64;
use wassbound::{rho, sigma_bm, HermiteRank, HurstIndex};

fn hurst(h: f64) -> HurstIndex {
    HurstIndex::new(h).unwrap()
}

/// Mean over paths and positions of `x_k x_{k+lag}` (the mean is known to be 0).
fn autocovariances(sampler: &FgnSampler, m: usize, seed: u64, lags: usize) -> Vec<f64> {
    let mut acc = vec![0.0; lags + 1];
    let mut counts = vec![0usize; lags + 1];
    for r in 0..m {
        let x = sampler.sample(hash64(seed, "fgn-law", r as u64)).increments;
        for lag in 0..=lags {
            for k in 0..x.len() - lag {
                acc[lag] += x[k] * x[k + lag];
            }
            counts[lag] += x.len() - lag;
        }
    }
    acc.iter().zip(&counts).map(|(a, c)| a / *c as f64).collect()
}

fn band(m: usize, n: usize) -> f64 {
    4.0 / ((m * n) as f64).sqrt() * 2.0
}

#[test]
fn brownian_increments_are_uncorrelated() {
    let sampler = FgnSampler::new(hurst(0.5), 256).unwrap();
    let acov = autocovariances(&sampler, 2000, 1, 1);
    assert!(acov[1].abs() < band(2000, 256), "{acov:?}");
}

#[test]
fn autocovariance_matches_rho() {
    let h = hurst(0.75);
    let sampler = FgnSampler::new(h, 256).unwrap();
    let acov = autocovariances(&sampler, 2000, 2, 5);
    for (lag, a) in acov.iter().enumerate() {
        assert!((a - rho(h, lag as f64)).abs() < band(2000, 256), "lag {lag}: {a}");
    }
}

#[test]
fn circulant_and_cholesky_share_the_law() {
    for hv in [0.3, 0.7] {
        let h = hurst(hv);
        let circ = FgnSampler::new(h, 128).unwrap();
        let chol = FgnSampler::cholesky(h, 128).unwrap();
        assert_ne!(circ.method(), chol.method());
        let a = autocovariances(&circ, 2000, 3, 5);
        let b = autocovariances(&chol, 2000, 4, 5);
        for lag in 0..=5 {
            assert!((a[lag] - b[lag]).abs() < 2f64.sqrt() * band(2000, 128), "H={hv} lag {lag}");
        }
    }
}

#[test]
fn rho_power_partial_sums_are_cauchy() {
    let h = hurst(0.6);
    let q = HermiteRank::new(2).unwrap();
    let mut prev = 0.0;
    for r in [10u64, 100, 1000, 10_000] {
        let s = sigma_bm(h, q, r).unwrap();
        assert!(s.sigma >= prev);
        prev = s.sigma;
    }
    let exact = sigma_bm(h, q, 1_000_000).unwrap().sigma;
    assert!((exact - prev).abs() < 1e-8);
}
