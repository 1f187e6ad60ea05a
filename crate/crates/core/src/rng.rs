//! Seeded random streams.
//!
//! Every stream is a ChaCha12 generator keyed by a 64-bit seed. Independent
//! replications never share a stream: replication `r` of an experiment tagged
//! `tag` under master seed `s` draws from `hash64(s, tag, r)`, so results do
//! not depend on how replications are scheduled across threads. Standard
//! normals come from the Box–Muller transform applied to the stream's output.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Derives the seed of replication `index` of experiment `tag`.
pub fn hash64(master: u64, tag: &str, index: u64) -> u64 {
    let keyed = mix64(master ^ mix64(fnv1a(tag)));
    mix64(keyed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019))
}

/// Stream of uniform and standard normal variates.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha12Rng::seed_from_u64(seed), spare: None }
    }

    pub fn derived(master: u64, tag: &str, index: u64) -> Self {
        Self::new(hash64(master, tag, index))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill_normal(&mut v);
        v
    }
}

/// Runs `f(r)` for `r in 0..m` and collects in index order. Uses the rayon
/// pool when the `parallel` feature is on; the output is identical either way.
pub fn map_indexed<T, F>(m: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..m).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = hash64(1, "bm", 0);
        assert_ne!(a, hash64(1, "bm", 1));
        assert_ne!(a, hash64(2, "bm", 0));
        assert_ne!(a, hash64(1, "other", 0));
        assert_eq!(a, hash64(1, "bm", 0));
    }

    #[test]
    fn normal_moments() {
        let mut s = NormalStream::new(42);
        let m = 200_000;
        let xs = s.normals(m);
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / m as f64;
        let kurt = xs.iter().map(|x| x.powi(4)).sum::<f64>() / m as f64;
        assert!(mean.abs() < 4.0 / (m as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / m as f64).sqrt());
        assert!((kurt - 3.0).abs() < 4.0 * (96.0 / m as f64).sqrt());
    }

    #[test]
    fn streams_are_reproducible() {
        let a = NormalStream::new(7).normals(10);
        let b = NormalStream::new(7).normals(10);
        assert_eq!(a, b);
    }
}
