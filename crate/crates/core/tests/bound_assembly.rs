use wassbound::chaos::{contraction_norm_sq_brute, wasserstein_bound_with_targets};
use wassbound::hermite::{binomial, factorial};
use wassbound::{
    kernel_family, kernel_inner, wasserstein_bound, BoundReport, CovarianceMatrix, HermiteRank, HurstIndex, SymMatrix,
};

/// Independent assembly from the definitions: O(m⁴) contractions and the
/// equal-rank pair estimate written out term by term.
fn reference_bound(h: f64, q: u32, n: usize, times: &[f64], c: &CovarianceMatrix) -> f64 {
    let hurst = HurstIndex::new(h).unwrap();
    let fam = kernel_family(hurst, HermiteRank::new(q).unwrap(), n, times).unwrap();
    let d = fam.dim();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            let (f, g) = (&fam.kernels[i], &fam.kernels[j]);
            let inner = kernel_inner(f, g, hurst).unwrap();
            let mut e = (c.get(i, j) - factorial(q).unwrap() * inner).powi(2);
            for r in 1..q {
                let coef = factorial(r - 1).unwrap().powi(2)
                    * binomial(q - 1, r - 1).powi(4)
                    * factorial(2 * q - 2 * r).unwrap();
                let cf = contraction_norm_sq_brute(f, q - r, hurst).unwrap();
                let cg = contraction_norm_sq_brute(g, q - r, hurst).unwrap();
                e += (q * q) as f64 / 2.0 * coef * (cf + cg);
            }
            total += e;
        }
    }
    wassbound::prefactor(c) * total.sqrt()
}

#[test]
fn assembly_matches_reference() {
    let c = CovarianceMatrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.2, 0.9, 0.1], vec![0.0, 0.1, 1.1]]).unwrap();
    for (h, q) in [(0.3, 2), (0.6, 2), (0.7, 3), (0.55, 4)] {
        let times = [0.0, 1.0, 1.5, 2.5];
        let fam = kernel_family(HurstIndex::new(h).unwrap(), HermiteRank::new(q).unwrap(), 8, &times).unwrap();
        let got = wasserstein_bound(&fam, &c).unwrap().bound;
        let want = reference_bound(h, q, 8, &times, &c);
        assert!((got - want).abs() <= 1e-12 * want, "H={h} q={q}: {got} vs {want}");
    }
}

#[test]
fn report_round_trips_through_json() {
    let fam = kernel_family(HurstIndex::new(0.6).unwrap(), HermiteRank::new(3).unwrap(), 50, &[0.0, 1.0, 2.0]).unwrap();
    let rep = wasserstein_bound(&fam, &CovarianceMatrix::identity(2)).unwrap();
    let text = serde_json::to_string(&rep).unwrap();
    let back: BoundReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rep);
    assert!(rep.lemma_entries.iter().flatten().all(|&e| e >= 0.0));
}

#[test]
fn targets_at_chaos_moments_leave_only_contractions() {
    let hurst = HurstIndex::new(0.65).unwrap();
    let fam = kernel_family(hurst, HermiteRank::new(2).unwrap(), 64, &[0.0, 1.0, 2.0]).unwrap();
    let moments = SymMatrix::from_fn(2, |i, j| 2.0 * kernel_inner(&fam.kernels[i], &fam.kernels[j], hurst).unwrap());
    let c = CovarianceMatrix::identity(2);
    let at_moments = wasserstein_bound_with_targets(&fam, &c, &moments).unwrap();
    let at_identity = wasserstein_bound(&fam, &c).unwrap();
    assert!(at_moments.bound <= at_identity.bound);
    for i in 0..2 {
        for j in 0..2 {
            let contraction = at_moments.contraction_norms_sq[i][0] + at_moments.contraction_norms_sq[j][0];
            assert!((at_moments.lemma_entries[i][j] - 4.0 * contraction).abs() <= 1e-12 * contraction);
        }
    }
}
