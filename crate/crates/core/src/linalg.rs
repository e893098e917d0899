//! Dense symmetric linear algebra primitives.
//!
//! Everything downstream runs through the types here: symmetric operators
//! validated on construction, SPD operators with a cached eigendecomposition,
//! truncated SVDs with explicit rank detection, the Moore–Penrose
//! pseudoinverse, and closed-form inverses of rank-perturbed identities.
//! All values are immutable after construction and safe to share across
//! threads.

use crate::{Error, Matrix, Result, Vector};

/// Relative symmetry tolerance for [`SymmetricOperator`] construction.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative PSD clipping tolerance: eigenvalues in `[-tol_psd, 0)` with
/// `tol_psd = PSD_TOL_REL * lambda_max` are clipped to zero.
pub const PSD_TOL_REL: f64 = 1e-10;
/// Default relative cutoff for numerical rank detection in SVDs.
pub const RANK_CUTOFF_REL: f64 = 1e-12;

/// A real square matrix validated to be symmetric up to round-off.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    entries: Matrix,
}

impl SymmetricOperator {
    /// Wraps `entries` after checking `|a_ij - a_ji| <= 1e-12 * max(1, |a_ij|)`.
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                what: "symmetric operator",
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                let diff = (entries[(i, j)] - entries[(j, i)]).abs();
                if diff > SYMMETRY_TOL * entries[(i, j)].abs().max(1.0) {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Symmetrizes `(a + a^T) / 2` without a symmetry check.
    pub fn symmetrize(a: &Matrix) -> Self {
        Self {
            entries: (a + a.transpose()) * 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }
}

/// Definiteness detected when an [`SpdOperator`] is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    Positive,
    Semidefinite,
}

/// Symmetric positive (semi)definite operator with its eigendecomposition
/// cached at construction time.
///
/// Eigenvalues are stored nonincreasing; eigenvector columns are orthonormal
/// and aligned with the eigenvalues. Negative eigenvalues within
/// `PSD_TOL_REL * lambda_max` are clipped to zero, anything below that is
/// rejected.
#[derive(Debug, Clone)]
pub struct SpdOperator {
    base: SymmetricOperator,
    eigenvalues: Vector,
    eigenvectors: Matrix,
    definiteness: Definiteness,
}

impl SpdOperator {
    /// Builds from a validated symmetric operator.
    pub fn new(base: SymmetricOperator) -> Result<Self> {
        // Eigendecompose the explicitly symmetrized matrix so round-off
        // asymmetry cannot leak into the factorization.
        let sym = SymmetricOperator::symmetrize(base.matrix());
        let eig = sym.matrix().clone().symmetric_eigen();
        let (mut eigenvalues, eigenvectors) = sort_eigen_desc(eig.eigenvalues, eig.eigenvectors);

        let lambda_max = eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let tol_psd = PSD_TOL_REL * lambda_max;
        let mut definiteness = Definiteness::Positive;
        for lambda in eigenvalues.iter_mut() {
            if *lambda < -tol_psd {
                return Err(Error::IndefiniteInput {
                    min_eigenvalue: *lambda,
                    tol: tol_psd,
                });
            }
            if *lambda <= tol_psd {
                *lambda = lambda.max(0.0);
                definiteness = Definiteness::Semidefinite;
            }
        }

        let op = Self {
            base: sym,
            eigenvalues,
            eigenvectors,
            definiteness,
        };
        debug_assert!(op.reconstruction_error() <= 1e-9, "eigensolver residual");
        Ok(op)
    }

    /// Builds directly from a raw matrix, symmetry-checking first.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        Self::new(SymmetricOperator::new(m)?)
    }

    /// Builds from an eigendecomposition known to be valid (used where the
    /// factors are constructed, not measured). Eigenvalues must be
    /// nonnegative; they are sorted here.
    pub fn from_eigen(eigenvalues: Vector, eigenvectors: Matrix) -> Result<Self> {
        for (i, &l) in eigenvalues.iter().enumerate() {
            if l < 0.0 {
                return Err(Error::IndefiniteInput {
                    min_eigenvalue: eigenvalues[i],
                    tol: 0.0,
                });
            }
        }
        let (eigenvalues, eigenvectors) = sort_eigen_desc(eigenvalues, eigenvectors);
        let lambda_max = eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let tol_psd = PSD_TOL_REL * lambda_max;
        let definiteness = if eigenvalues.iter().all(|&l| l > tol_psd) {
            Definiteness::Positive
        } else {
            Definiteness::Semidefinite
        };
        let base = SymmetricOperator::symmetrize(
            &(&eigenvectors * Matrix::from_diagonal(&eigenvalues) * eigenvectors.transpose()),
        );
        Ok(Self {
            base,
            eigenvalues,
            eigenvectors,
            definiteness,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        self.base.matrix()
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn is_positive(&self) -> bool {
        self.definiteness == Definiteness::Positive
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `V f(Λ) V^T` for a scalar spectral map `f`.
    pub fn spectral_map<F: Fn(f64) -> f64>(&self, f: F) -> Matrix {
        let mapped = Vector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| f(l)));
        &self.eigenvectors * Matrix::from_diagonal(&mapped) * self.eigenvectors.transpose()
    }

    /// The symmetric PSD square root as a plain matrix.
    pub fn sqrt_matrix(&self) -> Matrix {
        self.spectral_map(f64::sqrt)
    }

    /// `A^{-1/2}`; requires strict positivity.
    pub fn inv_sqrt_matrix(&self) -> Result<Matrix> {
        self.require_positive()?;
        Ok(self.spectral_map(|l| 1.0 / l.sqrt()))
    }

    /// `A^{-1}`; requires strict positivity.
    pub fn inverse_matrix(&self) -> Result<Matrix> {
        self.require_positive()?;
        Ok(self.spectral_map(|l| 1.0 / l))
    }

    /// The inverse as an [`SpdOperator`], reusing the cached eigenvectors.
    pub fn inverse_spd(&self) -> Result<SpdOperator> {
        self.require_positive()?;
        let inv = Vector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| 1.0 / l));
        SpdOperator::from_eigen(inv, self.eigenvectors.clone())
    }

    /// Applies `A^{-1/2}` to a vector through the eigendecomposition.
    pub fn apply_inv_sqrt(&self, v: &Vector) -> Result<Vector> {
        self.require_positive()?;
        let coords = self.eigenvectors.transpose() * v;
        let scaled = Vector::from_iterator(
            self.dim(),
            coords
                .iter()
                .zip(self.eigenvalues.iter())
                .map(|(c, &l)| c / l.sqrt()),
        );
        Ok(&self.eigenvectors * scaled)
    }

    fn require_positive(&self) -> Result<()> {
        if !self.is_positive() {
            return Err(Error::SingularBase {
                min_eigenvalue: self.lambda_min(),
            });
        }
        Ok(())
    }

    fn reconstruction_error(&self) -> f64 {
        let rebuilt =
            &self.eigenvectors * Matrix::from_diagonal(&self.eigenvalues) * self.eigenvectors.transpose();
        let denom = self.base.matrix().norm().max(f64::MIN_POSITIVE);
        (rebuilt - self.base.matrix()).norm() / denom
    }
}

/// Symmetric PSD square root: `R` with `R R = A`.
pub fn sym_sqrt(a: &SpdOperator) -> Result<SpdOperator> {
    let roots = Vector::from_iterator(a.dim(), a.eigenvalues().iter().map(|&l| l.sqrt()));
    SpdOperator::from_eigen(roots, a.eigenvectors().clone())
}

/// Truncated SVD with the detected numerical rank.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    /// Left singular vectors, one column per retained triple.
    pub left: Matrix,
    /// Retained singular values, nonincreasing.
    pub singular_values: Vector,
    /// Right singular vectors, one column per retained triple.
    pub right: Matrix,
    /// Numerical rank at the cutoff used (<= number of retained triples).
    pub rank: usize,
}

impl SvdFactorization {
    /// `U Σ V^T` of the retained triples.
    pub fn reconstruct(&self) -> Matrix {
        &self.left * Matrix::from_diagonal(&self.singular_values) * self.right.transpose()
    }
}

/// Top-`r` singular triples of `m` with the default rank cutoff.
///
/// `r` larger than `min(nrows, ncols)` clamps; triples below the cutoff are
/// excluded from the reported rank (and dropped entirely). Ties at the
/// truncation boundary keep the first `r` triples in the computed
/// nonincreasing order, so the factorization is not unique in that case.
pub fn truncated_svd(m: &Matrix, r: usize) -> SvdFactorization {
    truncated_svd_with_cutoff(m, r, RANK_CUTOFF_REL)
}

/// As [`truncated_svd`] with an explicit relative cutoff for rank detection.
pub fn truncated_svd_with_cutoff(m: &Matrix, r: usize, cutoff_rel: f64) -> SvdFactorization {
    let (nrows, ncols) = m.shape();
    if nrows == 0 || ncols == 0 {
        return SvdFactorization {
            left: Matrix::zeros(nrows, 0),
            singular_values: Vector::zeros(0),
            right: Matrix::zeros(ncols, 0),
            rank: 0,
        };
    }
    let (u, sigma, v) = jacobi_svd(m);

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = cutoff_rel * sigma_max;
    let numerical_rank = sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    let keep = r.min(nrows.min(ncols)).min(numerical_rank);

    let mut left = Matrix::zeros(nrows, keep);
    let mut right = Matrix::zeros(ncols, keep);
    let mut values = Vector::zeros(keep);
    for k in 0..keep {
        left.set_column(k, &u.column(k));
        right.set_column(k, &v.column(k));
        values[k] = sigma[k];
    }

    SvdFactorization {
        left,
        singular_values: values,
        right,
        rank: keep,
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// One-sided Jacobi SVD: `m = U diag(σ) V^T` with `min(nrows, ncols)`
/// triples, σ nonincreasing.
///
/// Rotations orthogonalize column pairs until every pair is orthogonal to
/// working precision, which keeps the singular vectors accurate to machine
/// precision even for clustered or rank-deficient spectra. Columns belonging
/// to σ = 0 are returned as zero vectors.
fn jacobi_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let transposed = m.nrows() < m.ncols();
    let work = if transposed { m.transpose() } else { m.clone() };
    let n = work.ncols();

    let mut w = work;
    let mut v = Matrix::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut converged = true;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let tau = (beta - alpha) / (2.0 * gamma);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if converged {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).expect("finite singular value"));
    sigma = order.iter().map(|&j| sigma[j]).collect();

    let k = m.nrows().min(m.ncols());
    let mut u_sorted = Matrix::zeros(w.nrows(), k);
    let mut v_sorted = Matrix::zeros(n, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        if sigma[dst] > 0.0 {
            u_sorted.set_column(dst, &(w.column(src) / sigma[dst]));
        }
        v_sorted.set_column(dst, &v.column(src));
    }
    sigma.truncate(k);

    if transposed {
        (v_sorted, sigma, u_sorted)
    } else {
        (u_sorted, sigma, v_sorted)
    }
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = c * mp - s * mq;
        m[(i, q)] = s * mp + c * mq;
    }
}

/// Moore–Penrose pseudoinverse via SVD with relative cutoff (default
/// [`RANK_CUTOFF_REL`] when `cutoff_rel` is `None`).
pub fn pinv(m: &Matrix, cutoff_rel: Option<f64>) -> Matrix {
    let cutoff_rel = cutoff_rel.unwrap_or(RANK_CUTOFF_REL);
    let min_dim = m.nrows().min(m.ncols());
    let svd = truncated_svd_with_cutoff(m, min_dim, cutoff_rel);
    if svd.rank == 0 {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let inv = Vector::from_iterator(svd.rank, svd.singular_values.iter().map(|&s| 1.0 / s));
    &svd.right * Matrix::from_diagonal(&inv) * svd.left.transpose()
}

/// Orthogonal projector onto the range of `m`.
pub fn range_projector(m: &Matrix, cutoff_rel: Option<f64>) -> Matrix {
    let svd = truncated_svd_with_cutoff(
        m,
        m.nrows().min(m.ncols()),
        cutoff_rel.unwrap_or(RANK_CUTOFF_REL),
    );
    &svd.left * svd.left.transpose()
}

/// `(I + Σ δ_i e_i e_i^T)^{-1} = I - Σ δ_i/(1+δ_i) e_i e_i^T` for an
/// orthonormal set of columns `basis` and perturbations `deltas > -1`.
pub fn perturbed_identity_inverse(basis: &Matrix, deltas: &[f64]) -> Result<Matrix> {
    if basis.ncols() != deltas.len() {
        return Err(Error::DimensionMismatch {
            what: "perturbation basis",
            expected: deltas.len(),
            got: basis.ncols(),
        });
    }
    check_orthonormal_columns(basis, 1e-10)?;
    for (index, &value) in deltas.iter().enumerate() {
        if value <= -1.0 {
            return Err(Error::DeltaOutOfRange { index, value });
        }
    }
    let dim = basis.nrows();
    let mut out = Matrix::identity(dim, dim);
    for (k, &delta) in deltas.iter().enumerate() {
        let e = basis.column(k);
        let coeff = delta / (1.0 + delta);
        out -= coeff * e * e.transpose();
    }
    Ok(out)
}

/// Errors unless `basis^T basis = I` within `tol` (max entry deviation).
pub fn check_orthonormal_columns(basis: &Matrix, tol: f64) -> Result<()> {
    let gram = basis.transpose() * basis;
    let k = gram.nrows();
    let dev = (&gram - Matrix::identity(k, k)).amax();
    if dev > tol {
        return Err(Error::NotOrthonormal(dev));
    }
    Ok(())
}

/// Frobenius-relative distance `|a - b| / max(|a|, eps)`.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / a.norm().max(f64::MIN_POSITIVE)
}

fn sort_eigen_desc(values: Vector, vectors: Matrix) -> (Vector, Matrix) {
    let (sorted, order) = sort_desc_with_order(&values);
    let mut out_vecs = Matrix::zeros(vectors.nrows(), vectors.ncols());
    for (dst, &src) in order.iter().enumerate() {
        out_vecs.set_column(dst, &vectors.column(src));
    }
    (Vector::from_vec(sorted), out_vecs)
}

fn sort_desc_with_order(values: &Vector) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite eigenvalue"));
    let sorted = order.iter().map(|&i| values[i]).collect();
    (sorted, order)
}
