//! Problem definition, exact posterior conditioning and data simulation for
//! the observation model `Y = G x + noise`.

use crate::gaussian::GaussianMeasure;
use crate::linalg::{SpdOperator, SymmetricOperator};
use crate::{Error, Matrix, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// A linear Gaussian inverse problem: forward map `G` (n×d), positive noise
/// covariance (n×n) and a Gaussian prior with positive covariance (d×d).
#[derive(Debug, Clone)]
pub struct LinearGaussianProblem {
    forward: Matrix,
    noise_cov: SpdOperator,
    prior: GaussianMeasure,
}

impl LinearGaussianProblem {
    pub fn new(forward: Matrix, noise_cov: SpdOperator, prior: GaussianMeasure) -> Result<Self> {
        if forward.nrows() == 0 || forward.ncols() == 0 {
            return Err(Error::Validation {
                field: "G".into(),
                message: "forward map must have at least one row and column".into(),
            });
        }
        if noise_cov.dim() != forward.nrows() {
            return Err(Error::DimensionMismatch {
                what: "noise covariance",
                expected: forward.nrows(),
                got: noise_cov.dim(),
            });
        }
        if prior.dim() != forward.ncols() {
            return Err(Error::DimensionMismatch {
                what: "prior",
                expected: forward.ncols(),
                got: prior.dim(),
            });
        }
        if !noise_cov.is_positive() {
            return Err(Error::Validation {
                field: "C_obs".into(),
                message: "noise covariance must be positive definite".into(),
            });
        }
        if !prior.covariance().is_positive() {
            return Err(Error::Validation {
                field: "C_pr".into(),
                message: "prior covariance must be positive definite".into(),
            });
        }
        Ok(Self {
            forward,
            noise_cov,
            prior,
        })
    }

    /// Observation dimension `n`.
    pub fn n_obs(&self) -> usize {
        self.forward.nrows()
    }

    /// Parameter dimension `d`.
    pub fn dim(&self) -> usize {
        self.forward.ncols()
    }

    pub fn forward(&self) -> &Matrix {
        &self.forward
    }

    pub fn noise_cov(&self) -> &SpdOperator {
        &self.noise_cov
    }

    pub fn prior(&self) -> &GaussianMeasure {
        &self.prior
    }

    /// Marginal data covariance `C_y = G C_pr G^T + C_obs`.
    pub fn data_cov(&self) -> Result<SpdOperator> {
        let cy = &self.forward * self.prior.covariance().matrix() * self.forward.transpose()
            + self.noise_cov.matrix();
        SpdOperator::new(SymmetricOperator::symmetrize(&cy))
    }
}

/// Exact conditioning output: the posterior measure for the supplied data,
/// the data-to-mean operator and the Hessian of the negative log-likelihood.
#[derive(Debug, Clone)]
pub struct PosteriorSolution {
    pub posterior: GaussianMeasure,
    /// `C_pos G^T C_obs^{-1}`, mapping data to the zero-prior-mean posterior
    /// mean.
    pub mean_operator: Matrix,
    pub hessian: SymmetricOperator,
}

/// Hessian of the negative log-likelihood, `H = G^T C_obs^{-1} G`.
pub fn hessian(p: &LinearGaussianProblem) -> SymmetricOperator {
    let inv = p
        .noise_cov
        .inverse_matrix()
        .expect("noise covariance is positive by construction");
    SymmetricOperator::symmetrize(&(p.forward.transpose() * inv * &p.forward))
}

/// Posterior covariance only (data-independent part of the update).
pub fn posterior_covariance(p: &LinearGaussianProblem) -> Result<SpdOperator> {
    let c_pr = p.prior.covariance().matrix();
    let cy = p.data_cov()?;
    // Solve (C_obs + G C_pr G^T) X = G C_pr through a symmetric factorization.
    let chol = nalgebra::Cholesky::new(cy.matrix().clone()).ok_or(Error::SingularBase {
        min_eigenvalue: cy.lambda_min(),
    })?;
    let g_cpr = &p.forward * c_pr;
    let solved = chol.solve(&g_cpr);
    let c_pos = c_pr - g_cpr.transpose() * solved;
    // The subtraction loses exact symmetry at round-off; restore it.
    SpdOperator::new(SymmetricOperator::symmetrize(&c_pos))
}

/// Conditions the problem on data `y`.
pub fn solve_posterior(p: &LinearGaussianProblem, y: &Vector) -> Result<PosteriorSolution> {
    if y.len() != p.n_obs() {
        return Err(Error::DimensionMismatch {
            what: "data vector",
            expected: p.n_obs(),
            got: y.len(),
        });
    }
    let c_pos = posterior_covariance(p)?;
    let mean_operator = c_pos.matrix() * p.forward.transpose() * p.noise_cov.inverse_matrix()?;
    let m_pr = p.prior.mean();
    let shifted = y - &p.forward * m_pr;
    let m_pos = m_pr + &mean_operator * shifted;
    Ok(PosteriorSolution {
        posterior: GaussianMeasure::new(m_pos, c_pos)?,
        mean_operator,
        hessian: hessian(p),
    })
}

/// Draws `G x_true + C_obs^{1/2} z` with `z` standard normal from a ChaCha20
/// generator seeded with `seed`. Deterministic per seed and platform
/// independent.
pub fn simulate_data(p: &LinearGaussianProblem, x_true: &Vector, seed: u64) -> Result<Vector> {
    if x_true.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            what: "true parameter",
            expected: p.dim(),
            got: x_true.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = Vector::from_fn(p.n_obs(), |_, _| rng.sample(StandardNormal));
    Ok(&p.forward * x_true + p.noise_cov.sqrt_matrix() * z)
}
