//! Seeded generators for random matrices, SPD operators and whole problems.
//!
//! Used by the falsification oracles, the `verify` subcommand and the test
//! suites. All randomness flows through a caller-supplied ChaCha20 generator,
//! so every draw is reproducible from a `u64` seed on any platform.

use crate::bip::LinearGaussianProblem;
use crate::gaussian::GaussianMeasure;
use crate::linalg::SpdOperator;
use crate::{Matrix, Vector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Matrix with i.i.d. standard normal entries.
pub fn random_matrix<R: Rng>(rng: &mut R, nrows: usize, ncols: usize) -> Matrix {
    Matrix::from_fn(nrows, ncols, |_, _| rng.sample(StandardNormal))
}

/// Vector with i.i.d. standard normal entries.
pub fn random_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// First `k` columns of the QR factor of a random Gaussian matrix; the
/// columns are orthonormal.
pub fn random_orthonormal<R: Rng>(rng: &mut R, dim: usize, k: usize) -> Matrix {
    assert!(k <= dim, "cannot draw {k} orthonormal columns in dim {dim}");
    let qr = random_matrix(rng, dim, dim).qr();
    let q = qr.q();
    let mut out = Matrix::zeros(dim, k);
    for j in 0..k {
        out.set_column(j, &q.column(j));
    }
    out
}

/// Random SPD operator `Q diag(l) Q^T` with eigenvalues log-uniform in
/// `[0.1, 10]`.
pub fn random_spd<R: Rng>(rng: &mut R, dim: usize) -> SpdOperator {
    let q = random_orthonormal(rng, dim, dim);
    let eigs = Vector::from_fn(dim, |_, _| {
        let exponent = uniform(rng, -1.0, 1.0);
        10.0_f64.powf(exponent)
    });
    SpdOperator::from_eigen(eigs, q).expect("constructed SPD")
}

/// Random zero-mean Gaussian measure with a [`random_spd`] covariance.
pub fn random_gaussian<R: Rng>(rng: &mut R, dim: usize) -> GaussianMeasure {
    GaussianMeasure::new(Vector::zeros(dim), random_spd(rng, dim)).expect("valid measure")
}

/// Random inverse problem: Gaussian forward map, random SPD noise and prior,
/// zero prior mean.
pub fn random_problem<R: Rng>(rng: &mut R, n_obs: usize, dim: usize) -> LinearGaussianProblem {
    let forward = random_matrix(rng, n_obs, dim);
    let noise = random_spd(rng, n_obs);
    let prior = random_gaussian(rng, dim);
    LinearGaussianProblem::new(forward, noise, prior).expect("valid problem")
}

/// Deterministic deconvolution test problem: `n_obs` samples of a
/// `dim`-dimensional signal seen through a row-normalized Gaussian blur,
/// noise covariance `1e-2 I`, and a power-law prior `diag(k^{-2})`.
pub fn deconvolution_problem(n_obs: usize, dim: usize) -> LinearGaussianProblem {
    let sigma = dim as f64 / (2.0 * n_obs as f64);
    let mut forward = Matrix::zeros(n_obs, dim);
    for i in 0..n_obs {
        let center = (i as f64 + 0.5) * dim as f64 / n_obs as f64 - 0.5;
        let mut mass = 0.0;
        for j in 0..dim {
            let z = (j as f64 - center) / sigma;
            let w = (-0.5 * z * z).exp();
            forward[(i, j)] = w;
            mass += w;
        }
        for j in 0..dim {
            forward[(i, j)] /= mass;
        }
    }
    let noise =
        SpdOperator::from_eigen(Vector::from_element(n_obs, 1e-2), Matrix::identity(n_obs, n_obs))
            .expect("diagonal noise");
    let prior_eigs = Vector::from_fn(dim, |k, _| ((k + 1) as f64).powi(-2));
    let prior_cov =
        SpdOperator::from_eigen(prior_eigs, Matrix::identity(dim, dim)).expect("power-law prior");
    let prior = GaussianMeasure::new(Vector::zeros(dim), prior_cov).expect("valid measure");
    LinearGaussianProblem::new(forward, noise, prior).expect("valid problem")
}
