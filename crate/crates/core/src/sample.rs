//! Replicated d-dimensional samples and their summary statistics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, CovarianceMatrix, SymMatrix};
use crate::rng::{map_indexed, NormalStream};

/// Magic bytes of the binary sample-batch stream.
pub const BATCH_MAGIC: [u8; 4] = *b"SBT1";

/// `m` replications of a `d`-dimensional vector, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    m: usize,
    d: usize,
    values: Vec<f64>,
    seed: u64,
    provenance: String,
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Sample mean and standard error of `xs` (unbiased variance).
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, std_error: f64::NAN };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Self { mean, std_error: (var / n).sqrt() }
    }
}

impl SampleBatch {
    pub fn new(m: usize, d: usize, values: Vec<f64>, seed: u64, provenance: impl Into<String>) -> Result<Self> {
        if m < 2 {
            return Err(invalid("a sample batch needs at least 2 replications"));
        }
        if d == 0 || values.len() != m * d {
            return Err(Error::DimensionMismatch { expected: m * d, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite sample value".into()));
        }
        Ok(Self { m, d, values, seed, provenance: provenance.into() })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, seed: u64, provenance: impl Into<String>) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid("ragged sample rows"));
        }
        Self::new(m, d, rows.into_iter().flatten().collect(), seed, provenance)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.d..(r + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for row in self.rows() {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.m as f64).collect()
    }

    /// Uncentered second moments `(1/m) Σ_r x_r x_rᵀ`; the targets here are
    /// centered, so this is the covariance estimator used throughout.
    pub fn second_moments(&self) -> SymMatrix {
        let d = self.d;
        let mut acc = vec![0.0; d * d];
        for row in self.rows() {
            for i in 0..d {
                for j in i..d {
                    acc[i * d + j] += row[i] * row[j];
                }
            }
        }
        SymMatrix::from_fn(d, |i, j| acc[i * d + j] / self.m as f64)
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> SymMatrix {
        let d = self.d;
        let mean = self.mean();
        let mut acc = vec![0.0; d * d];
        for row in self.rows() {
            for i in 0..d {
                for j in i..d {
                    acc[i * d + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        SymMatrix::from_fn(d, |i, j| acc[i * d + j] / (self.m as f64 - 1.0))
    }

    /// Per-coordinate `E[X^k]` estimates.
    pub fn raw_moment(&self, k: i32) -> Vec<Estimate> {
        (0..self.d)
            .map(|j| {
                let xs: Vec<f64> = self.column(j).iter().map(|x| x.powi(k)).collect();
                Estimate::from_samples(&xs)
            })
            .collect()
    }

    /// CSV with a header row `x1,...,xd`, one replication per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Little-endian binary: `SBT1`, d as u32, m as u64, seed as u64, then
    /// `m·d` f64 values row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&BATCH_MAGIC)?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&(self.m as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, provenance: impl Into<String>) -> Result<Self> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head)?;
        if head[..4] != BATCH_MAGIC {
            return Err(invalid("bad sample-batch magic"));
        }
        let d = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let m = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(head[16..24].try_into().unwrap());
        let values = read_f64s(&mut r, m * d)?;
        Self::new(m, d, values, seed, provenance)
    }
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// `m` i.i.d. draws of `N_d(0, C)` as `L·ξ` with `ξ` standard normal.
/// Replication `r` uses the stream `hash64(seed, "gaussian", r)`.
pub fn sample_gaussian(c: &CovarianceMatrix, m: usize, seed: u64) -> Result<SampleBatch> {
    let l = cholesky(c)?;
    let d = c.dim();
    let rows = map_indexed(m, |r| {
        let z = NormalStream::derived(seed, "gaussian", r as u64).normals(d);
        l.apply(&z)
    });
    SampleBatch::new(m, d, rows.into_iter().flatten().collect(), seed, "gaussian")
}
