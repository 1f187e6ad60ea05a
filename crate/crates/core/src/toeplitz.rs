//! Circulant embedding of a symmetric Toeplitz matrix `T_{kl} = c(|k−l|)`.
//!
//! The same embedding serves two purposes: exact Gaussian sampling with
//! covariance `T` (when the circulant spectrum is nonnegative) and fast
//! `T·x` products.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Symmetric circulant of size `size` (a power of two ≥ 2n) whose top-left
/// `n×n` block is the Toeplitz matrix.
#[derive(Clone)]
pub struct CirculantEmbedding {
    n: usize,
    size: usize,
    eigenvalues: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding").field("n", &self.n).field("size", &self.size).finish()
    }
}

impl CirculantEmbedding {
    /// `autocov(j)` is evaluated for `j = 0..=size/2`.
    pub fn new(n: usize, autocov: impl Fn(usize) -> f64) -> Self {
        let size = (2 * n.max(1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let half: Vec<f64> = (0..=size / 2).map(&autocov).collect();
        let mut buf: Vec<Complex<f64>> = (0..size).map(|j| Complex::new(half[j.min(size - j)], 0.0)).collect();
        forward.process(&mut buf);
        let eigenvalues = buf.iter().map(|z| z.re).collect();
        Self { n, size, eigenvalues, forward, inverse }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `T·x` for `x` of length `n`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "Toeplitz operand length");
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, &l) in buf.iter_mut().zip(&self.eigenvalues) {
            *b *= l;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf[..self.n].iter().map(|z| z.re * scale).collect()
    }

    /// One Gaussian vector with covariance `T`, from `2·size` standard normals
    /// supplied by `normals`. Negative eigenvalues are clamped to zero; callers
    /// check the spectrum first.
    pub fn sample(&self, mut normals: impl FnMut() -> f64) -> Vec<f64> {
        let scale = 1.0 / self.size as f64;
        let mut buf: Vec<Complex<f64>> = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let s = (l.max(0.0) * scale).sqrt();
                let re = normals();
                let im = normals();
                Complex::new(s * re, s * im)
            })
            .collect();
        self.forward.process(&mut buf);
        buf[..self.n].iter().map(|z| z.re).collect()
    }
}
