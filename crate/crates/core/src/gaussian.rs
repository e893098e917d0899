//! Gaussian measures, the covariance comparison operator, Carleman
//! determinants, exact divergences, and the spectral loss class.
//!
//! The central object is `R(C2 || C1) = C1^{-1/2} C2 C1^{-1/2} - I`: its
//! eigenvalues quantify how far two covariances are apart, and every loss in
//! the class implemented here is a sum `Σ f(λ_i)` of a scalar function over
//! that spectrum. Forward/reverse KL and the Rényi family are members, with
//! the reverse variants obtained by composing with `α(x) = -x/(1+x)`.

use crate::linalg::{SpdOperator, SymmetricOperator};
use crate::{Error, Matrix, Result, Vector};
use std::fmt;
use std::sync::Arc;

/// Floor keeping comparison eigenvalues strictly above -1.
const LAMBDA_FLOOR: f64 = -1.0 + 1e-12;

/// Mean vector plus SPD covariance.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    mean: Vector,
    covariance: SpdOperator,
}

impl GaussianMeasure {
    pub fn new(mean: Vector, covariance: SpdOperator) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::DimensionMismatch {
                what: "mean vector",
                expected: covariance.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation {
                field: "mean".into(),
                message: "mean entries must be finite".into(),
            });
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn covariance(&self) -> &SpdOperator {
        &self.covariance
    }
}

/// `R(C2 || C1) = C1^{-1/2} C2 C1^{-1/2} - I`, symmetrized.
pub fn fh_operator(c2: &SpdOperator, c1: &SpdOperator) -> Result<SymmetricOperator> {
    if c2.dim() != c1.dim() {
        return Err(Error::DimensionMismatch {
            what: "covariance pair",
            expected: c1.dim(),
            got: c2.dim(),
        });
    }
    let inv_sqrt = c1.inv_sqrt_matrix().map_err(|_| Error::SingularBase {
        min_eigenvalue: c1.lambda_min(),
    })?;
    let dim = c1.dim();
    let r = &inv_sqrt * c2.matrix() * &inv_sqrt - Matrix::identity(dim, dim);
    Ok(SymmetricOperator::symmetrize(&r))
}

/// Eigen data of the comparison operator together with the two orthonormal
/// bases it induces.
///
/// `lambdas` is nondecreasing in `(-1, ∞)`; `w_basis` diagonalises
/// `R(C2 || C1)`; the columns of `v_basis` are
/// `v_i = sqrt(1+λ_i) C2^{-1/2} C1^{1/2} w_i` and diagonalise the swapped
/// operator `R(C1 || C2)` with eigenvalues `-λ_i/(1+λ_i)`.
#[derive(Debug, Clone)]
pub struct FhSpectrum {
    pub lambdas: Vector,
    pub w_basis: Matrix,
    pub v_basis: Matrix,
}

/// Diagonalises `R(C2 || C1)`; both covariances must be positive.
pub fn fh_spectrum(c2: &SpdOperator, c1: &SpdOperator) -> Result<FhSpectrum> {
    let r = fh_operator(c2, c1)?;
    if !c2.is_positive() {
        return Err(Error::SingularBase {
            min_eigenvalue: c2.lambda_min(),
        });
    }
    let eig = r.matrix().clone().symmetric_eigen();
    let (lambdas, w_basis) = sort_eigen_asc(eig.eigenvalues, eig.eigenvectors);
    let lambdas = Vector::from_iterator(
        lambdas.len(),
        lambdas.iter().map(|&l| l.max(LAMBDA_FLOOR)),
    );

    let transform = c2.inv_sqrt_matrix()? * c1.sqrt_matrix();
    let mut v_basis = &transform * &w_basis;
    for (j, &lambda) in lambdas.iter().enumerate() {
        let scale = (1.0 + lambda).sqrt();
        v_basis.column_mut(j).scale_mut(scale);
    }

    Ok(FhSpectrum {
        lambdas,
        w_basis,
        v_basis,
    })
}

/// Log of the Carleman (regularized) determinant:
/// `Σ log(1+λ_i) - λ_i`, each `λ_i > -1`.
pub fn log_carleman_det2(lambdas: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (index, &l) in lambdas.iter().enumerate() {
        if l <= -1.0 {
            return Err(Error::DeltaOutOfRange { index, value: l });
        }
        acc += l.ln_1p() - l;
    }
    Ok(acc)
}

/// `det2(I + R) = Π (1+λ_i) exp(-λ_i)`, evaluated in log-space.
pub fn carleman_det2(lambdas: &[f64]) -> Result<f64> {
    Ok(log_carleman_det2(lambdas)?.exp())
}

/// `f_kl(x) = (x - log(1+x)) / 2`, the spectral function of the forward KL
/// divergence.
pub fn f_kl(x: f64) -> f64 {
    0.5 * (x - x.ln_1p())
}

/// Derivative `f_kl'(x) = x / (2(1+x))`.
pub fn f_kl_deriv(x: f64) -> f64 {
    x / (2.0 * (1.0 + x))
}

/// Spectral function of the order-`rho` Rényi divergence.
pub fn f_renyi(rho: f64, x: f64) -> f64 {
    -x.ln_1p() / (2.0 * rho) + (rho + (1.0 - rho) * (1.0 + x)).ln() / (2.0 * rho * (1.0 - rho))
}

/// Derivative of [`f_renyi`] in `x`.
pub fn f_renyi_deriv(rho: f64, x: f64) -> f64 {
    -1.0 / (2.0 * rho * (1.0 + x)) + 1.0 / (2.0 * rho * (rho + (1.0 - rho) * (1.0 + x)))
}

/// The involution `α(x) = -x/(1+x)` mapping the spectrum of `R(C2||C1)` to
/// the spectrum of `R(C1||C2)`.
pub fn alpha(x: f64) -> f64 {
    -x / (1.0 + x)
}

fn alpha_deriv(x: f64) -> f64 {
    -1.0 / ((1.0 + x) * (1.0 + x))
}

/// Built-in members of the loss class; `Renyi`/`ReverseRenyi` carry the order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Kl,
    ReverseKl,
    Renyi(f64),
    ReverseRenyi(f64),
}

impl LossKind {
    /// Parses `kl`, `rkl`, `renyi:RHO`, `rrenyi:RHO`.
    pub fn parse(text: &str) -> Result<Self> {
        let parse_rho = |spec: &str| -> Result<f64> {
            spec.parse::<f64>()
                .map_err(|e| Error::Parse(format!("invalid Rényi order `{spec}`: {e}")))
        };
        match text.split_once(':') {
            None => match text {
                "kl" => Ok(Self::Kl),
                "rkl" => Ok(Self::ReverseKl),
                other => Err(Error::Parse(format!("unknown loss `{other}`"))),
            },
            Some(("renyi", rho)) => Ok(Self::Renyi(parse_rho(rho)?)),
            Some(("rrenyi", rho)) => Ok(Self::ReverseRenyi(parse_rho(rho)?)),
            Some((other, _)) => Err(Error::Parse(format!("unknown loss `{other}`"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kl => write!(f, "kl"),
            Self::ReverseKl => write!(f, "rkl"),
            Self::Renyi(rho) => write!(f, "renyi:{rho}"),
            Self::ReverseRenyi(rho) => write!(f, "rrenyi:{rho}"),
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A member of the spectral loss class: a scalar function on `(-1, ∞)` with
/// `f(0) = 0` and `x f'(x) > 0` away from zero, summed over the comparison
/// spectrum by [`spectral_loss`].
#[derive(Clone)]
pub struct SpectralLossFn {
    name: String,
    eval: ScalarFn,
    deriv: Option<ScalarFn>,
}

impl fmt::Debug for SpectralLossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralLossFn")
            .field("name", &self.name)
            .field("analytic_deriv", &self.deriv.is_some())
            .finish()
    }
}

impl SpectralLossFn {
    /// Forward KL.
    pub fn kl() -> Self {
        Self {
            name: "kl".into(),
            eval: Arc::new(f_kl),
            deriv: Some(Arc::new(f_kl_deriv)),
        }
    }

    /// Reverse KL, `f_kl ∘ α`.
    pub fn reverse_kl() -> Self {
        Self {
            name: "rkl".into(),
            eval: Arc::new(|x| f_kl(alpha(x))),
            deriv: Some(Arc::new(|x| f_kl_deriv(alpha(x)) * alpha_deriv(x))),
        }
    }

    /// Rényi divergence of order `rho` in `(0, 1)`.
    pub fn renyi(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self {
            name: format!("renyi:{rho}"),
            eval: Arc::new(move |x| f_renyi(rho, x)),
            deriv: Some(Arc::new(move |x| f_renyi_deriv(rho, x))),
        })
    }

    /// Reverse Rényi, `f_ren,rho ∘ α`.
    pub fn reverse_renyi(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self {
            name: format!("rrenyi:{rho}"),
            eval: Arc::new(move |x| f_renyi(rho, alpha(x))),
            deriv: Some(Arc::new(move |x| f_renyi_deriv(rho, alpha(x)) * alpha_deriv(x))),
        })
    }

    pub fn from_kind(kind: LossKind) -> Result<Self> {
        match kind {
            LossKind::Kl => Ok(Self::kl()),
            LossKind::ReverseKl => Ok(Self::reverse_kl()),
            LossKind::Renyi(rho) => Self::renyi(rho),
            LossKind::ReverseRenyi(rho) => Self::reverse_renyi(rho),
        }
    }

    /// User-supplied spectral function. Membership in the class is not
    /// decidable exactly, so `f(0) = 0` and the sign condition `x f'(x) > 0`
    /// are sampled on the grid `±10^k, k = -6..=1` (negative points below -1
    /// fall outside the domain and are skipped). Without `deriv` the
    /// derivative falls back to central differences.
    pub fn custom<F, D>(name: &str, eval: F, deriv: Option<D>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if eval(0.0).abs() > 1e-12 {
            return Err(Error::InvalidLossFn(format!(
                "f(0) = {} but must vanish at 0",
                eval(0.0)
            )));
        }
        for k in -6..=1 {
            for sign in [1.0, -1.0] {
                let x = sign * 10.0_f64.powi(k);
                if x <= -1.0 {
                    continue;
                }
                let h = 1e-7 * x.abs().max(1e-7);
                let slope = (eval(x + h) - eval(x - h)) / (2.0 * h);
                if x * slope <= 0.0 {
                    return Err(Error::InvalidLossFn(format!(
                        "x f'(x) <= 0 at x = {x} (slope {slope})"
                    )));
                }
            }
        }
        if deriv.is_none() {
            log::warn!(
                "loss `{name}`: no analytic derivative supplied, falling back to finite differences"
            );
        }
        Ok(Self {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: deriv.map(|d| Arc::new(d) as ScalarFn),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn has_analytic_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    /// Analytic derivative when available, otherwise central differences.
    pub fn deriv(&self, x: f64) -> f64 {
        match &self.deriv {
            Some(d) => d(x),
            None => {
                let h = 1e-6 * x.abs().max(1e-6);
                ((self.eval)(x + h) - (self.eval)(x - h)) / (2.0 * h)
            }
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0 < rho && rho < 1.0) {
        return Err(Error::RhoOutOfRange(rho));
    }
    Ok(())
}

/// `Σ f(λ_i)` over the spectrum of `R(C2 || C1)`.
pub fn spectral_loss(f: &SpectralLossFn, c2: &SpdOperator, c1: &SpdOperator) -> Result<f64> {
    let spectrum = fh_spectrum(c2, c1)?;
    Ok(spectrum.lambdas.iter().map(|&l| f.eval(l)).sum())
}

/// Forward KL divergence `D_kl(N2 || N1)`:
/// `1/2 |C1^{-1/2}(m2-m1)|^2 - 1/2 log det2(I + R(C2||C1))`.
pub fn kl_divergence(n2: &GaussianMeasure, n1: &GaussianMeasure) -> Result<f64> {
    let spectrum = fh_spectrum(n2.covariance(), n1.covariance())?;
    let dm = n2.mean() - n1.mean();
    let z = n1.covariance().apply_inv_sqrt(&dm)?;
    let mean_term = 0.5 * z.norm_squared();
    let cov_term = -0.5 * log_carleman_det2(spectrum.lambdas.as_slice())?;
    Ok(mean_term + cov_term)
}

/// Rényi divergence of order `rho` in `(0, 1)`.
pub fn renyi_divergence(n2: &GaussianMeasure, n1: &GaussianMeasure, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let spectrum = fh_spectrum(n2.covariance(), n1.covariance())?;
    let dm = n2.mean() - n1.mean();
    let z = n1.covariance().apply_inv_sqrt(&dm)?;
    // Mean term: 1/2 |(rho I + (1-rho)(I+R))^{-1/2} z|^2 in the w-eigenbasis.
    let coords = spectrum.w_basis.transpose() * z;
    let mean_term = 0.5
        * coords
            .iter()
            .zip(spectrum.lambdas.iter())
            .map(|(c, &l)| c * c / (rho + (1.0 - rho) * (1.0 + l)))
            .sum::<f64>();
    let cov_term: f64 = spectrum.lambdas.iter().map(|&l| f_renyi(rho, l)).sum();
    Ok(mean_term + cov_term)
}

/// Hellinger distance via the order-1/2 Rényi divergence:
/// `sqrt(2 (1 - exp(-D_ren,1/2)))`, in `[0, sqrt 2]`.
pub fn hellinger(n2: &GaussianMeasure, n1: &GaussianMeasure) -> Result<f64> {
    let d = renyi_divergence(n2, n1, 0.5)?;
    Ok((2.0 * (1.0 - (-d).exp())).max(0.0).sqrt())
}

/// Near-singularity diagnostics for a covariance pair.
///
/// In a finite discretization two positive-definite Gaussians are always
/// equivalent, so instead of a boolean test this reports how close the pair
/// sits to degeneracy: the relative smallest eigenvalue of each covariance
/// and the squared Hilbert–Schmidt norm `Σ λ_i^2` of the comparison operator.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceDiagnostics {
    pub base_margin: f64,
    pub target_margin: f64,
    pub sum_lambda_sq: f64,
}

pub fn equivalence_diagnostics(
    c2: &SpdOperator,
    c1: &SpdOperator,
) -> Result<EquivalenceDiagnostics> {
    let spectrum = fh_spectrum(c2, c1)?;
    Ok(EquivalenceDiagnostics {
        base_margin: c1.lambda_min() / c1.lambda_max(),
        target_margin: c2.lambda_min() / c2.lambda_max(),
        sum_lambda_sq: spectrum.lambdas.iter().map(|&l| l * l).sum(),
    })
}

fn sort_eigen_asc(values: Vector, vectors: Matrix) -> (Vector, Matrix) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalue"));
    let sorted = Vector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
    let mut out_vecs = Matrix::zeros(vectors.nrows(), vectors.ncols());
    for (dst, &src) in order.iter().enumerate() {
        out_vecs.set_column(dst, &vectors.column(src));
    }
    (sorted, out_vecs)
}
