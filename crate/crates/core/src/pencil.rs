//! Joint spectral data of the prior/posterior covariance pencils.
//!
//! Diagonalising the prior-preconditioned Hessian
//! `C_pr^{1/2} H C_pr^{1/2} = Σ δ_i w_i w_i^T` yields, through
//! `λ_i = -δ_i/(1+δ_i)`, the eigenvalues of the comparison operator
//! `R(C_pos || C_pr)` together with the bases `w`, `v` and `φ` that generate
//! every optimal low-rank update downstream. The non-self-adjoint square
//! roots `S_pos`, `S_y` used by the mean approximation theory live here too.

use crate::bip::{hessian, posterior_covariance, LinearGaussianProblem};
use crate::linalg::{SpdOperator, SymmetricOperator, RANK_CUTOFF_REL};
use crate::{Error, Matrix, Result, Vector};

/// Joint spectrum of the three pencils associated with one problem.
///
/// Orderings: `lambdas` is nondecreasing in `(-1, 0]` (most informative
/// directions first) with exactly `rank_h` nonzero entries; `deltas` is the
/// matching nonincreasing sequence `δ_i = -λ_i/(1+λ_i) ≥ 0`. Columns of
/// `w_basis`/`v_basis` align with that order. The sign of each column is
/// arbitrary; everything downstream consumes outer products and is
/// sign-invariant.
#[derive(Debug, Clone)]
pub struct PencilSpectrum {
    problem: LinearGaussianProblem,
    posterior: SpdOperator,
    lambdas: Vec<f64>,
    deltas: Vec<f64>,
    w_basis: Matrix,
    v_basis: Matrix,
    phi_basis: Matrix,
    rank_h: usize,
    c_pr_half: Matrix,
    c_pr_inv_half: Matrix,
    c_pos_half: Matrix,
}

/// The factors `S_pos S_pos^T = C_pos` and `S_y S_y^T = C_y`.
#[derive(Debug, Clone)]
pub struct SquareRootFactors {
    pub s_pos: Matrix,
    pub s_y: Matrix,
}

/// Diagonalises the prior-preconditioned Hessian and assembles the full
/// pencil spectrum of the problem.
pub fn bayes_spectrum(p: &LinearGaussianProblem) -> Result<PencilSpectrum> {
    let prior = p.prior().covariance();
    if !prior.is_positive() {
        return Err(Error::SingularBase {
            min_eigenvalue: prior.lambda_min(),
        });
    }
    let dim = p.dim();
    let c_pr_half = prior.sqrt_matrix();
    let c_pr_inv_half = prior.inv_sqrt_matrix()?;

    let h = hessian(p);
    let preconditioned = SymmetricOperator::symmetrize(&(&c_pr_half * h.matrix() * &c_pr_half));
    let eig = preconditioned.matrix().clone().symmetric_eigen();

    // Sort δ nonincreasing; the conversion to λ happens in the δ variable to
    // avoid cancellation for δ near 0.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalue")
    });
    let delta_max = order
        .first()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .unwrap_or(0.0);
    let cutoff = RANK_CUTOFF_REL * delta_max;

    let mut deltas = Vec::with_capacity(dim);
    let mut w_basis = Matrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        let delta = eig.eigenvalues[src];
        deltas.push(if delta > cutoff { delta } else { 0.0 });
        w_basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    let rank_h = deltas.iter().filter(|&&d| d > 0.0).count();
    let lambdas: Vec<f64> = deltas.iter().map(|&d| -d / (1.0 + d)).collect();

    let posterior = posterior_covariance(p)?;
    let c_pos_half = posterior.sqrt_matrix();
    let c_pos_inv_half = posterior.inv_sqrt_matrix()?;

    // v_i = sqrt(1+λ_i) C_pos^{-1/2} C_pr^{1/2} w_i
    let mut v_basis = c_pos_inv_half * &c_pr_half * &w_basis;
    for (j, &lambda) in lambdas.iter().enumerate() {
        v_basis.column_mut(j).scale_mut((1.0 + lambda).sqrt());
    }

    // φ_i = δ_i^{-1/2} (C_obs^{-1/2} G C_pr^{1/2}) w_i for the informed
    // directions; the sign convention is thereby pinned to w.
    let whitened_forward = p.noise_cov().inv_sqrt_matrix()? * p.forward() * &c_pr_half;
    let mut phi_basis = Matrix::zeros(p.n_obs(), rank_h);
    for (i, delta) in deltas.iter().take(rank_h).enumerate() {
        let col = &whitened_forward * w_basis.column(i) / delta.sqrt();
        phi_basis.set_column(i, &col);
    }

    Ok(PencilSpectrum {
        problem: p.clone(),
        posterior,
        lambdas,
        deltas,
        w_basis,
        v_basis,
        phi_basis,
        rank_h,
        c_pr_half,
        c_pr_inv_half,
        c_pos_half,
    })
}

impl PencilSpectrum {
    pub fn problem(&self) -> &LinearGaussianProblem {
        &self.problem
    }

    /// Exact posterior covariance.
    pub fn posterior(&self) -> &SpdOperator {
        &self.posterior
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn n_obs(&self) -> usize {
        self.problem.n_obs()
    }

    /// Nondecreasing eigenvalues of `R(C_pos || C_pr)` in `(-1, 0]`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Nonincreasing eigenvalues `δ_i` of the prior-preconditioned Hessian.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn w_basis(&self) -> &Matrix {
        &self.w_basis
    }

    pub fn v_basis(&self) -> &Matrix {
        &self.v_basis
    }

    /// Orthonormal data-side directions, one column per informed direction.
    pub fn phi_basis(&self) -> &Matrix {
        &self.phi_basis
    }

    /// Numerical rank of the Hessian at the configured cutoff.
    pub fn rank_h(&self) -> usize {
        self.rank_h
    }

    pub fn c_pr_half(&self) -> &Matrix {
        &self.c_pr_half
    }

    pub fn c_pr_inv_half(&self) -> &Matrix {
        &self.c_pr_inv_half
    }

    pub fn c_pos_half(&self) -> &Matrix {
        &self.c_pos_half
    }

    /// `S_pos = C_pr^{1/2} W diag(sqrt(1+λ)) W^T`.
    pub fn s_pos_matrix(&self) -> Matrix {
        &self.c_pr_half * self.w_scaled(|l| (1.0 + l).sqrt())
    }

    /// `S_pos^{-1} = W diag(1/sqrt(1+λ)) W^T C_pr^{-1/2}`.
    pub fn s_pos_inv_matrix(&self) -> Matrix {
        self.w_scaled(|l| 1.0 / (1.0 + l).sqrt()) * &self.c_pr_inv_half
    }

    /// `S_y = C_obs^{1/2} (I + Σ ((1+λ_i)^{-1/2} - 1) φ_i φ_i^T)`.
    pub fn s_y_matrix(&self) -> Matrix {
        self.problem.noise_cov().sqrt_matrix() * self.phi_scaled(|l| 1.0 / (1.0 + l).sqrt())
    }

    /// `S_y^{-1}`.
    pub fn s_y_inv_matrix(&self) -> Matrix {
        let inv_half = self
            .problem
            .noise_cov()
            .inv_sqrt_matrix()
            .expect("noise covariance positive by construction");
        self.phi_scaled(|l| (1.0 + l).sqrt()) * inv_half
    }

    /// The whitened adjoint forward map `C_pr^{1/2} G^T C_obs^{-1/2}`, equal
    /// to `Σ sqrt(δ_i) w_i φ_i^T`.
    pub fn whitened_adjoint(&self) -> Matrix {
        self.problem.prior().covariance().sqrt_matrix()
            * self.problem.forward().transpose()
            * self
                .problem
                .noise_cov()
                .inv_sqrt_matrix()
                .expect("noise covariance positive by construction")
    }

    fn w_scaled<F: Fn(f64) -> f64>(&self, f: F) -> Matrix {
        let scaled = Vector::from_iterator(self.dim(), self.lambdas.iter().map(|&l| f(l)));
        &self.w_basis * Matrix::from_diagonal(&scaled) * self.w_basis.transpose()
    }

    /// `I + Σ_{i <= rank_h} (f(λ_i) - 1) φ_i φ_i^T`; the uninformed
    /// complement keeps coefficient 1, so no basis completion is needed.
    fn phi_scaled<F: Fn(f64) -> f64>(&self, f: F) -> Matrix {
        let n = self.n_obs();
        let mut out = Matrix::identity(n, n);
        for i in 0..self.rank_h {
            let phi = self.phi_basis.column(i);
            out += (f(self.lambdas[i]) - 1.0) * phi * phi.transpose();
        }
        out
    }
}

/// Relative posterior-to-prior variance along the `i`-th informed direction
/// (`i` is 1-based): `1 + λ_i`.
pub fn variance_reduction(s: &PencilSpectrum, i: usize) -> Result<f64> {
    if i < 1 || i > s.dim() {
        return Err(Error::IndexOutOfRange {
            index: i,
            max: s.dim(),
        });
    }
    Ok(1.0 + s.lambdas[i - 1])
}

/// Assembles the non-self-adjoint square roots `S_pos` and `S_y`.
pub fn square_root_factors(
    _p: &LinearGaussianProblem,
    s: &PencilSpectrum,
) -> Result<SquareRootFactors> {
    Ok(SquareRootFactors {
        s_pos: s.s_pos_matrix(),
        s_y: s.s_y_matrix(),
    })
}
