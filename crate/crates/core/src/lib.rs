//! Explicit multidimensional Wasserstein bounds from Stein's method and
//! Malliavin calculus, for Hermite functionals of fractional Gaussian noise
//! and for smooth functions of finite Gaussian vectors, together with the
//! Monte Carlo machinery that checks them.

pub mod chaos;
pub mod error;
pub mod fgn;
pub mod finite_gaussian;
pub mod harness;
pub mod hermite;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod sample;
pub mod stein;
pub mod toeplitz;

pub use chaos::{
    bound_curve, contraction_norm_sq, kernel_family, kernel_inner, lemma_pair_bound, rate_exponent, wasserstein_bound,
    BoundReport, KernelFamily, StepKernel,
};
pub use error::{Error, Result};
pub use fgn::{fbm_covariance, rho, sample_fgn, sigma_bm, FgnPath, HurstIndex};
pub use finite_gaussian::{
    chatterjee_bound, fd_gradient, gaussian_pair_bound, t_ab, ChatterjeeReport, FunctionSpec, MonteCarlo,
    SmoothVectorFunction,
};
pub use harness::{
    empirical_w1_1d, empirical_w1_multid, fit_rate, normal_quantile, pathwise_malliavin_inner, simulate_bm_vector,
    RateFit, WassersteinEstimate,
};
pub use hermite::{hermite_cross_moment, hermite_eval, hermite_variance, HermiteRank};
pub use linalg::{cholesky, hs_inner, hs_norm, operator_norm, prefactor, q_factor, CovarianceMatrix, SymMatrix};
pub use quadrature::QuadratureSpec;
pub use sample::{sample_gaussian, Estimate, SampleBatch};
pub use stein::{hessian_bound_check, stein_discrepancy, stein_residual, u0_apply, SteinDiagnostic, TestFunction};
