//! Dense symmetric matrices, the Jacobi eigensolver and the norms that build
//! the universal prefactor `‖C⁻¹‖_op · ‖C‖_op^{1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Off-diagonal Frobenius mass (relative to `‖A‖_F`) at which Jacobi stops.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
/// Hard cap on Jacobi sweeps before reporting non-convergence.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// `λ_min / λ_max` threshold below which a covariance is rejected.
pub const PD_TOLERANCE: f64 = 1e-12;

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl SymMatrix {
    /// Builds a matrix from rows; the rows must form an exactly symmetric matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(invalid("matrix must have at least one row"));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid("matrix entries must be finite"));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            entries[i * dim + i] = v;
        }
        Self { dim, entries }
    }

    /// Symmetric matrix from a closure evaluated on the upper triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| v * factor).collect() }
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, entries })
    }

    /// Reorders rows and columns: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_dims(self.dim, perm.len())?;
        Ok(Self::from_fn(self.dim, |i, j| self.get(perm[i], perm[j])))
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(jacobi_eigen(self, false)?.values)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson { dim: self.dim, rows: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        if raw.rows.len() != raw.dim {
            return Err(serde::de::Error::custom(format!("dim {} does not match {} rows", raw.dim, raw.rows.len())));
        }
        SymMatrix::from_rows(&raw.rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Column `k` (stored as `vectors[k]`) is the unit eigenvector of `values[k]`.
    pub vectors: Option<Vec<Vec<f64>>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops below
/// `JACOBI_TOLERANCE · ‖A‖_F`.
pub fn jacobi_eigen(a: &SymMatrix, with_vectors: bool) -> Result<SymEigen> {
    let n = a.dim;
    let mut m = a.entries.clone();
    let mut v = if with_vectors { SymMatrix::identity(n).entries } else { Vec::new() };
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOLERANCE * total;

    let off_mass = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_mass(&m);
        if off <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps, off_diagonal: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                if with_vectors {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = with_vectors.then(|| order.iter().map(|&c| (0..n).map(|k| v[k * n + c]).collect()).collect());
    Ok(SymEigen { values, vectors, sweeps })
}

/// Largest absolute eigenvalue, i.e. `sup_{‖x‖=1} ‖Ax‖` for symmetric `A`.
pub fn operator_norm(a: &SymMatrix) -> Result<f64> {
    let values = a.eigenvalues()?;
    Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// `Tr(A Bᵀ) = Σ_ij A_ij B_ij`.
pub fn hs_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_dims(a.dim, b.dim)?;
    Ok(dot(&a.entries, &b.entries))
}

pub fn hs_norm(a: &SymMatrix) -> f64 {
    dot(&a.entries, &a.entries).sqrt()
}

/// Symmetric positive-definite matrix with its spectrum cached.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    base: SymMatrix,
    spectrum: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn new(base: SymMatrix) -> Result<Self> {
        let spectrum = base.eigenvalues()?;
        let max = spectrum[0];
        let min = *spectrum.last().expect("dim >= 1");
        if max.is_nan() || min.is_nan() || max <= 0.0 || min <= PD_TOLERANCE * max {
            return Err(Error::NotPositiveDefinite(format!("eigenvalues range over [{min:e}, {max:e}]")));
        }
        Ok(Self { base, spectrum })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim)).expect("identity is PD")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.base.get(i, j)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.base
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn lambda_max(&self) -> f64 {
        self.spectrum[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.spectrum[self.spectrum.len() - 1]
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(self.base.permuted(perm)?)
    }
}

impl Serialize for CovarianceMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.base.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovarianceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let base = SymMatrix::deserialize(d)?;
        CovarianceMatrix::new(base).map_err(serde::de::Error::custom)
    }
}

/// `‖C⁻¹‖_op · ‖C‖_op^{1/2} = λ_max^{1/2} / λ_min`.
pub fn prefactor(c: &CovarianceMatrix) -> f64 {
    c.lambda_max().sqrt() / c.lambda_min()
}

/// `min(prefactor(C), prefactor(K))`.
pub fn q_factor(c: &CovarianceMatrix, k: &CovarianceMatrix) -> Result<f64> {
    check_dims(c.dim(), k.dim())?;
    Ok(prefactor(c).min(prefactor(k)))
}

/// Lower-triangular `L` with `L Lᵀ = C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// `L z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(z, &mut out);
        out
    }

    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = dot(&self.lower[i * n..i * n + i + 1], &z[..=i]);
        }
    }

    /// `L Lᵀ` reassembled.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim;
        SymMatrix::from_fn(n, |i, j| {
            let k = i.min(j) + 1;
            dot(&self.lower[i * n..i * n + k], &self.lower[j * n..j * n + k])
        })
    }
}

pub fn cholesky(c: &CovarianceMatrix) -> Result<CholeskyFactor> {
    cholesky_sym(c.matrix())
}

/// Cholesky of a symmetric matrix; pivots below `PD_TOLERANCE · max|A_ii|`
/// are rejected.
pub fn cholesky_sym(a: &SymMatrix) -> Result<CholeskyFactor> {
    let n = a.dim;
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag.is_nan() || diag <= PD_TOLERANCE * scale {
            return Err(Error::NotPositiveDefinite(format!("Cholesky pivot {diag:e} at column {j}")));
        }
        let d = diag.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(CholeskyFactor { dim: n, lower: l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm(&SymMatrix::identity(2)).unwrap(), 1.0);
        assert_eq!(operator_norm(&SymMatrix::diagonal(&[4.0, 1.0])).unwrap(), 4.0);
        assert_relative_eq!(operator_norm(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(operator_norm(&sym(&[&[-5.0, 0.0], &[0.0, 2.0]])).unwrap(), 5.0);
    }

    #[test]
    fn hs_examples() {
        let i3 = SymMatrix::identity(3);
        assert_eq!(hs_inner(&i3, &i3).unwrap(), 3.0);
        assert_eq!(hs_inner(&i3, &SymMatrix::zeros(3)).unwrap(), 0.0);
        assert_eq!(hs_norm(&sym(&[&[1.0, 2.0], &[2.0, 4.0]])), 5.0);
        assert!(matches!(hs_inner(&i3, &SymMatrix::identity(2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn prefactor_examples() {
        for sigma in [0.5_f64, 1.0, 2.0, 10.0] {
            let c = CovarianceMatrix::new(SymMatrix::identity(3).scaled(sigma * sigma)).unwrap();
            assert_eq!(prefactor(&c), 1.0 / sigma);
        }
        assert_eq!(prefactor(&CovarianceMatrix::diagonal(&[4.0, 1.0]).unwrap()), 2.0);
        assert_eq!(prefactor(&CovarianceMatrix::identity(4)), 1.0);
    }

    #[test]
    fn q_factor_examples() {
        let i = CovarianceMatrix::identity(2);
        assert_eq!(q_factor(&i, &i).unwrap(), 1.0);
        let one = CovarianceMatrix::diagonal(&[1.0]).unwrap();
        let four = CovarianceMatrix::diagonal(&[4.0]).unwrap();
        assert_eq!(q_factor(&one, &four).unwrap(), 0.5);
        assert_eq!(q_factor(&four, &one).unwrap(), q_factor(&one, &four).unwrap());
        assert!(q_factor(&one, &i).is_err());
    }

    #[test]
    fn rejects_non_pd_and_asymmetric() {
        assert!(matches!(
            CovarianceMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(CovarianceMatrix::diagonal(&[1.0, -1.0]), Err(Error::NotPositiveDefinite(_))));
        assert!(matches!(SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&CovarianceMatrix::identity(3)).unwrap();
        assert_eq!(l.reconstruct(), SymMatrix::identity(3));
        let l = cholesky(&CovarianceMatrix::diagonal(&[4.0, 1.0]).unwrap()).unwrap();
        assert_eq!((l.get(0, 0), l.get(1, 0), l.get(1, 1)), (2.0, 0.0, 1.0));
        let rho = 0.3;
        let c = CovarianceMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let l = cholesky(&c).unwrap();
        assert_relative_eq!(l.get(0, 0), 1.0);
        assert_relative_eq!(l.get(1, 0), rho);
        assert_relative_eq!(l.get(1, 1), (1.0 - rho * rho).sqrt(), epsilon = 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
    }

    fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymMatrix::from_fn(n, |i, j| {
            let s: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
            if i == j {
                s + 0.1
            } else {
                s
            }
        })
    }

    #[test]
    fn cholesky_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..100 {
            let n = 1 + t % 8;
            let a = random_pd(&mut rng, n);
            let c = CovarianceMatrix::new(a.clone()).unwrap();
            let back = cholesky(&c).unwrap().reconstruct();
            assert!(hs_norm(&back.sub(&a).unwrap()) <= 1e-12 * hs_norm(&a));
        }
    }

    #[test]
    fn jacobi_eigenvectors_diagonalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_pd(&mut rng, 12);
        let eig = jacobi_eigen(&a, true).unwrap();
        let vecs = eig.vectors.unwrap();
        for (lambda, v) in eig.values.iter().zip(&vecs) {
            let av = a.mat_vec(v);
            for (x, y) in av.iter().zip(v) {
                assert!((x - lambda * y).abs() < 1e-12 * eig.values[0]);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn json_layout() {
        let c = CovarianceMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"dim":2,"rows":[[1.0,0.5],[0.5,1.0]]}"#);
        let back: CovarianceMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<SymMatrix>(r#"{"dim":3,"rows":[[1.0]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn norm_sandwich(entries in proptest::collection::vec(-10.0..10.0f64, 1..=36)) {
            let n = (entries.len() as f64).sqrt().floor() as usize;
            let a = SymMatrix::from_fn(n, |i, j| entries[i * n + j]);
            let op = operator_norm(&a).unwrap();
            let hs = hs_norm(&a);
            prop_assert!(op <= hs * (1.0 + 1e-12) + 1e-12);
            prop_assert!(hs <= (n as f64).sqrt() * op * (1.0 + 1e-12) + 1e-12);
        }
    }
}
