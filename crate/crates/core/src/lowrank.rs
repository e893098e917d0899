//! Optimal rank-`r` posterior approximations and the generalized
//! reduced-rank solver.
//!
//! All constructions are driven by the pencil spectrum: deflating the prior
//! covariance along the `r` most informed directions (or inflating the prior
//! precision along the same directions) is simultaneously optimal for every
//! loss in the spectral class, and the two optimal mean operators reuse the
//! same data. Updates are kept in factored form so the rank structure stays
//! visible; `assemble` materialises them on demand.

use crate::gaussian::{f_kl, SpectralLossFn};
use crate::linalg::{
    pinv, truncated_svd, truncated_svd_with_cutoff, SpdOperator, SymmetricOperator,
    RANK_CUTOFF_REL,
};
use crate::pencil::PencilSpectrum;
use crate::{Error, Matrix, Result};

/// Whether the factor deflates a covariance or inflates a precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSign {
    /// Covariance form `base - factor factor^T` (base is the prior
    /// covariance).
    Minus,
    /// Precision form `base + factor factor^T` (base is the prior
    /// precision).
    Plus,
}

/// A rank-structured update `base ± factor factor^T`.
#[derive(Debug, Clone)]
pub struct LowRankUpdate {
    base: SpdOperator,
    factor: Matrix,
    sign: UpdateSign,
    rank: usize,
    unique: bool,
}

impl LowRankUpdate {
    /// Covariance-form update; fails with `NotPositive` unless
    /// `base - factor factor^T` stays positive definite.
    pub fn covariance_form(base: SpdOperator, factor: Matrix) -> Result<Self> {
        if factor.nrows() != base.dim() {
            return Err(Error::DimensionMismatch {
                what: "update factor",
                expected: base.dim(),
                got: factor.nrows(),
            });
        }
        let assembled = base.matrix() - &factor * factor.transpose();
        let eigs = SymmetricOperator::symmetrize(&assembled)
            .into_matrix()
            .symmetric_eigen()
            .eigenvalues;
        let min = eigs.min();
        if min <= 0.0 {
            return Err(Error::NotPositive { value: min });
        }
        let rank = truncated_svd(&factor, factor.ncols()).rank;
        Ok(Self {
            base,
            factor,
            sign: UpdateSign::Minus,
            rank,
            unique: true,
        })
    }

    /// Precision-form update `base + factor factor^T`; always admissible.
    pub fn precision_form(base: SpdOperator, factor: Matrix) -> Result<Self> {
        if factor.nrows() != base.dim() {
            return Err(Error::DimensionMismatch {
                what: "update factor",
                expected: base.dim(),
                got: factor.nrows(),
            });
        }
        let rank = truncated_svd(&factor, factor.ncols()).rank;
        Ok(Self {
            base,
            factor,
            sign: UpdateSign::Plus,
            rank,
            unique: true,
        })
    }

    pub fn base(&self) -> &SpdOperator {
        &self.base
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn sign(&self) -> UpdateSign {
        self.sign
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// For optimal constructions: whether the minimiser was unique (no tie
    /// at the truncation boundary). Hand-built updates report `true`.
    pub fn unique(&self) -> bool {
        self.unique
    }

    /// Materialises `base ± factor factor^T`.
    pub fn assemble(&self) -> Matrix {
        let outer = &self.factor * self.factor.transpose();
        match self.sign {
            UpdateSign::Minus => self.base.matrix() - outer,
            UpdateSign::Plus => self.base.matrix() + outer,
        }
    }

    /// The assembled operator as an SPD value.
    pub fn assemble_spd(&self) -> Result<SpdOperator> {
        SpdOperator::new(SymmetricOperator::symmetrize(&self.assemble()))
    }
}

/// Optimal covariance-form approximation of the posterior covariance:
/// deflates the prior along the `r` leading pencil directions.
pub fn optimal_covariance(s: &PencilSpectrum, r: usize) -> Result<LowRankUpdate> {
    let d = s.dim();
    if r > d {
        return Err(Error::RankOutOfRange { rank: r, max: d });
    }
    let k = r.min(s.rank_h());
    let mut factor = Matrix::zeros(d, k);
    for i in 0..k {
        let col = s.c_pr_half() * s.w_basis().column(i) * (-s.lambdas()[i]).sqrt();
        factor.set_column(i, &col);
    }
    Ok(LowRankUpdate {
        base: s.problem().prior().covariance().clone(),
        factor,
        sign: UpdateSign::Minus,
        rank: k,
        unique: truncation_is_unique(s.lambdas(), r),
    })
}

/// Optimal precision-form approximation: inflates the prior precision along
/// the same directions. Its assembled inverse equals
/// [`optimal_covariance`]'s assembled operator.
pub fn optimal_precision(s: &PencilSpectrum, r: usize) -> Result<LowRankUpdate> {
    let d = s.dim();
    if r > d {
        return Err(Error::RankOutOfRange { rank: r, max: d });
    }
    let k = r.min(s.rank_h());
    let mut factor = Matrix::zeros(d, k);
    for i in 0..k {
        let col = s.c_pr_inv_half() * s.w_basis().column(i) * s.deltas()[i].sqrt();
        factor.set_column(i, &col);
    }
    Ok(LowRankUpdate {
        base: s.problem().prior().covariance().inverse_spd()?,
        factor,
        sign: UpdateSign::Plus,
        rank: k,
        unique: truncation_is_unique(s.lambdas(), r),
    })
}

fn truncation_is_unique(lambdas: &[f64], r: usize) -> bool {
    if r == 0 || r >= lambdas.len() {
        return true;
    }
    let boundary = lambdas[r - 1];
    if boundary == 0.0 {
        return true;
    }
    let next = lambdas[r];
    (next - boundary).abs() > 1e-12 * boundary.abs().max(next.abs())
}

/// Converts between the covariance form `C_pr - K K^T` and the precision
/// form `C_pr^{-1} + U U^T` of the same operator.
///
/// Diagonalising `C_pr^{-1/2} K K^T C_pr^{-1/2} = Σ d_i^2 e_i e_i^T` gives
/// the precision factor columns `d_i/sqrt(1-d_i^2) C_pr^{-1/2} e_i`, and the
/// reverse direction maps `c_i^2` to `c_i/sqrt(1+c_i^2)`. The assembled
/// operators of input and output are inverses of each other.
pub fn convert_update(u: &LowRankUpdate) -> Result<LowRankUpdate> {
    match u.sign {
        UpdateSign::Minus => {
            let prior = &u.base;
            let whitened = prior.inv_sqrt_matrix()? * &u.factor;
            let svd = truncated_svd(&whitened, whitened.ncols());
            let d = prior.dim();
            let mut factor = Matrix::zeros(d, svd.rank);
            let inv_half = prior.inv_sqrt_matrix()?;
            for i in 0..svd.rank {
                let di2 = svd.singular_values[i].powi(2);
                if di2 >= 1.0 {
                    return Err(Error::NotPositive { value: di2 });
                }
                let coeff = svd.singular_values[i] / (1.0 - di2).sqrt();
                let col = &inv_half * svd.left.column(i) * coeff;
                factor.set_column(i, &col);
            }
            Ok(LowRankUpdate {
                base: prior.inverse_spd()?,
                factor,
                sign: UpdateSign::Plus,
                rank: svd.rank,
                unique: u.unique,
            })
        }
        UpdateSign::Plus => {
            let prior = u.base.inverse_spd()?;
            let whitened = prior.sqrt_matrix() * &u.factor;
            let svd = truncated_svd(&whitened, whitened.ncols());
            let d = prior.dim();
            let mut factor = Matrix::zeros(d, svd.rank);
            let half = prior.sqrt_matrix();
            for i in 0..svd.rank {
                let ci = svd.singular_values[i];
                let coeff = ci / (1.0 + ci * ci).sqrt();
                let col = &half * svd.left.column(i) * coeff;
                factor.set_column(i, &col);
            }
            Ok(LowRankUpdate {
                base: prior,
                factor,
                sign: UpdateSign::Minus,
                rank: svd.rank,
                unique: u.unique,
            })
        }
    }
}

/// Which mean approximation class an operator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanClass {
    /// Covariance-update structure `(C_pr - B) G^T C_obs^{-1}` with
    /// `rank(B) <= r`.
    Class1,
    /// Plain rank-`r` data-to-parameter operators.
    Class2,
}

/// A data-to-mean operator `y -> A y` together with its class and rank.
#[derive(Debug, Clone)]
pub struct MeanApproxOperator {
    pub matrix: Matrix,
    pub klass: MeanClass,
    pub rank: usize,
}

/// Optimal rank-`r` mean operator ignoring covariance structure:
/// `A = C_pr^{1/2} (Σ_{i<=r} sqrt(-λ_i(1+λ_i)) w_i φ_i^T) C_obs^{-1/2}`.
pub fn optimal_mean_class2(s: &PencilSpectrum, r: usize) -> Result<MeanApproxOperator> {
    let max = s.dim().min(s.n_obs());
    if r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    let k = r.min(s.rank_h());
    let mut core = Matrix::zeros(s.dim(), s.n_obs());
    for i in 0..k {
        let weight = (-s.lambdas()[i] * (1.0 + s.lambdas()[i])).sqrt();
        core += weight * s.w_basis().column(i) * s.phi_basis().column(i).transpose();
    }
    let matrix = s.c_pr_half() * core * s.problem().noise_cov().inv_sqrt_matrix()?;
    Ok(MeanApproxOperator {
        matrix,
        klass: MeanClass::Class2,
        rank: k,
    })
}

/// Optimal mean operator that reuses the rank-`r` covariance update:
/// `A = C_r G^T C_obs^{-1}` with `C_r` from [`optimal_covariance`].
pub fn optimal_mean_class1(s: &PencilSpectrum, r: usize) -> Result<MeanApproxOperator> {
    let cov = optimal_covariance(s, r)?;
    let matrix =
        cov.assemble() * s.problem().forward().transpose() * s.problem().noise_cov().inverse_matrix()?;
    Ok(MeanApproxOperator {
        matrix,
        klass: MeanClass::Class1,
        rank: r,
    })
}

/// Quantity whose minimal value [`predicted_loss`] reports.
#[derive(Debug, Clone)]
pub enum LossTarget {
    /// Covariance loss `Σ_{i>r} f(λ_i)` for a spectral function `f`.
    Cov(SpectralLossFn),
    /// Bayes risk of the class-1 mean operator, `Σ_{i>r} δ_i^3`.
    MeanClass1,
    /// Bayes risk of the class-2 mean operator, `Σ_{i>r} δ_i`.
    MeanClass2,
    /// Expected reverse KL of the joint pair, `Σ_{i>r} f_kl(δ_i) + δ_i^α`
    /// with `α = 3` for class 1 and `α = 1` for class 2.
    Joint(MeanClass),
}

/// Closed-form minimal loss of the rank-`r` approximation for `target`.
pub fn predicted_loss(s: &PencilSpectrum, r: usize, target: &LossTarget) -> Result<f64> {
    if r > s.dim() {
        return Err(Error::RankOutOfRange {
            rank: r,
            max: s.dim(),
        });
    }
    let tail_lambdas = &s.lambdas()[r..];
    let tail_deltas = &s.deltas()[r..];
    Ok(match target {
        LossTarget::Cov(f) => tail_lambdas.iter().map(|&l| f.eval(l)).sum(),
        LossTarget::MeanClass2 => tail_deltas.iter().sum(),
        LossTarget::MeanClass1 => tail_deltas.iter().map(|&d| d.powi(3)).sum(),
        LossTarget::Joint(klass) => {
            let exponent = match klass {
                MeanClass::Class1 => 3,
                MeanClass::Class2 => 1,
            };
            tail_deltas
                .iter()
                .map(|&d| f_kl(d) + d.powi(exponent))
                .sum()
        }
    })
}

/// Pairs the optimal rank-`r` mean of the requested class with the optimal
/// rank-`r` covariance. The expected reverse KL of the pair splits into the
/// mean and covariance terms of [`LossTarget::Joint`].
pub fn joint_approximation(
    s: &PencilSpectrum,
    r: usize,
    klass: MeanClass,
) -> Result<(MeanApproxOperator, LowRankUpdate)> {
    let mean = match klass {
        MeanClass::Class1 => optimal_mean_class1(s, r)?,
        MeanClass::Class2 => optimal_mean_class2(s, r)?,
    };
    Ok((mean, optimal_covariance(s, r)?))
}

/// Best rank-`r` solution of `min |M - T N S|_F`:
/// `N = T^+ (P_{ran T} M P_{ker S ⊥})_r S^+`.
///
/// The returned operator satisfies `N = P_{ker T ⊥} N P_{ran S}`. Rank
/// detection inside the pseudoinverses and the truncation share `cutoff_rel`
/// (default [`RANK_CUTOFF_REL`]).
pub fn reduced_rank_solve(
    t: &Matrix,
    m: &Matrix,
    s: &Matrix,
    r: usize,
    cutoff_rel: Option<f64>,
) -> Result<Matrix> {
    if t.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch {
            what: "left frame rows",
            expected: m.nrows(),
            got: t.nrows(),
        });
    }
    if s.ncols() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "right frame columns",
            expected: m.ncols(),
            got: s.ncols(),
        });
    }
    let cutoff = cutoff_rel.unwrap_or(RANK_CUTOFF_REL);
    let t_pinv = pinv(t, Some(cutoff));
    let s_pinv = pinv(s, Some(cutoff));
    let projected = t * &t_pinv * m * &s_pinv * s;
    let truncated = truncated_svd_with_cutoff(&projected, r, cutoff);
    Ok(t_pinv * truncated.reconstruct() * s_pinv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bip::{solve_posterior, LinearGaussianProblem};
    use crate::gaussian::{spectral_loss, GaussianMeasure};
    use crate::linalg::rel_frobenius;
    use crate::pencil::bayes_spectrum;
    use crate::sample;
    use crate::Vector;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn scalar_problem() -> LinearGaussianProblem {
        let forward = Matrix::from_element(1, 1, 1.0);
        let noise = SpdOperator::from_matrix(Matrix::identity(1, 1)).unwrap();
        let prior = GaussianMeasure::new(
            Vector::zeros(1),
            SpdOperator::from_matrix(Matrix::identity(1, 1)).unwrap(),
        )
        .unwrap();
        LinearGaussianProblem::new(forward, noise, prior).unwrap()
    }

    fn row_selector_problem() -> LinearGaussianProblem {
        let forward = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let noise = SpdOperator::from_matrix(Matrix::identity(1, 1)).unwrap();
        let prior = GaussianMeasure::new(
            Vector::zeros(2),
            SpdOperator::from_matrix(Matrix::identity(2, 2)).unwrap(),
        )
        .unwrap();
        LinearGaussianProblem::new(forward, noise, prior).unwrap()
    }

    #[test]
    fn rank_zero_update_is_the_prior() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let p = sample::random_problem(&mut rng, 2, 4);
        let s = bayes_spectrum(&p).unwrap();
        let cov = optimal_covariance(&s, 0).unwrap();
        assert_eq!(cov.rank(), 0);
        assert!(rel_frobenius(&cov.assemble(), p.prior().covariance().matrix()) <= 1e-14);
        let prec = optimal_precision(&s, 0).unwrap();
        assert!(
            rel_frobenius(&prec.assemble(), &p.prior().covariance().inverse_matrix().unwrap())
                <= 1e-12
        );
    }

    #[test]
    fn full_rank_update_recovers_posterior() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let p = sample::random_problem(&mut rng, 3, 5);
        let s = bayes_spectrum(&p).unwrap();
        for r in [s.rank_h(), s.dim()] {
            let cov = optimal_covariance(&s, r).unwrap();
            assert!(rel_frobenius(s.posterior().matrix(), &cov.assemble()) <= 1e-8);
        }
    }

    #[test]
    fn scalar_canonical_updates() {
        let s = bayes_spectrum(&scalar_problem()).unwrap();
        let cov = optimal_covariance(&s, 1).unwrap();
        assert_relative_eq!(cov.assemble()[(0, 0)], 0.5, epsilon = 1e-12);
        let prec = optimal_precision(&s, 1).unwrap();
        assert_relative_eq!(prec.assemble()[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn precision_is_inverse_of_covariance() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let p = sample::random_problem(&mut rng, 3, 6);
        let s = bayes_spectrum(&p).unwrap();
        for r in 0..=6 {
            let cov = optimal_covariance(&s, r).unwrap().assemble();
            let prec = optimal_precision(&s, r).unwrap().assemble();
            let inv = prec.try_inverse().expect("positive definite");
            assert!(rel_frobenius(&cov, &inv) <= 1e-8, "rank {r}");
        }
    }

    #[test]
    fn convert_zero_factor_swaps_base() {
        let prior = SpdOperator::from_matrix(Matrix::from_diagonal(&Vector::from_vec(vec![
            2.0, 0.5,
        ])))
        .unwrap();
        let u = LowRankUpdate::covariance_form(prior.clone(), Matrix::zeros(2, 0)).unwrap();
        let converted = convert_update(&u).unwrap();
        assert_eq!(converted.sign(), UpdateSign::Plus);
        assert_eq!(converted.rank(), 0);
        assert!(
            rel_frobenius(&converted.assemble(), &prior.inverse_matrix().unwrap()) <= 1e-12
        );
    }

    #[test]
    fn convert_scalar_update() {
        let prior = SpdOperator::from_matrix(Matrix::identity(1, 1)).unwrap();
        let k = Matrix::from_element(1, 1, 0.5_f64.sqrt());
        let u = LowRankUpdate::covariance_form(prior, k).unwrap();
        let converted = convert_update(&u).unwrap();
        assert_relative_eq!(converted.factor()[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(converted.assemble()[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn convert_round_trips_assembled_operator() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for trial in 0..10 {
            let d = 2 + trial % 5;
            let prior = sample::random_spd(&mut rng, d);
            // Scale the factor down until the covariance form stays positive.
            let mut factor = sample::random_matrix(&mut rng, d, 1 + trial % 3) * 0.3;
            let u = loop {
                match LowRankUpdate::covariance_form(prior.clone(), factor.clone()) {
                    Ok(u) => break u,
                    Err(_) => factor *= 0.5,
                }
            };
            let twice = convert_update(&convert_update(&u).unwrap()).unwrap();
            assert!(rel_frobenius(&u.assemble(), &twice.assemble()) <= 1e-8);
            assert_eq!(u.rank(), twice.rank());
        }
    }

    #[test]
    fn convert_rejects_updates_outside_class() {
        let prior = SpdOperator::from_matrix(Matrix::identity(1, 1)).unwrap();
        let u = LowRankUpdate {
            base: prior,
            factor: Matrix::from_element(1, 1, 1.0),
            sign: UpdateSign::Minus,
            rank: 1,
            unique: true,
        };
        assert!(matches!(
            convert_update(&u),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn mean_class2_examples() {
        let s = bayes_spectrum(&scalar_problem()).unwrap();
        let zero = optimal_mean_class2(&s, 0).unwrap();
        assert!(zero.matrix.amax() <= 1e-15);
        let exact = optimal_mean_class2(&s, 1).unwrap();
        assert_relative_eq!(exact.matrix[(0, 0)], 0.5, epsilon = 1e-12);

        let s2 = bayes_spectrum(&row_selector_problem()).unwrap();
        let a = optimal_mean_class2(&s2, 1).unwrap();
        assert_relative_eq!(a.matrix[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.matrix[(1, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_class1_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let p = sample::random_problem(&mut rng, 2, 4);
        let s = bayes_spectrum(&p).unwrap();
        let a0 = optimal_mean_class1(&s, 0).unwrap();
        let prior_map = p.prior().covariance().matrix()
            * p.forward().transpose()
            * p.noise_cov().inverse_matrix().unwrap();
        assert!(rel_frobenius(&a0.matrix, &prior_map) <= 1e-12);

        let full = optimal_mean_class1(&s, s.rank_h()).unwrap();
        let sol = solve_posterior(&p, &Vector::zeros(2)).unwrap();
        assert!(rel_frobenius(&full.matrix, &sol.mean_operator) <= 1e-8);

        let scalar = bayes_spectrum(&scalar_problem()).unwrap();
        let a = optimal_mean_class1(&scalar, 1).unwrap();
        assert_relative_eq!(a.matrix[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mean_operators_map_into_posterior_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let p = sample::random_problem(&mut rng, 3, 5);
        let s = bayes_spectrum(&p).unwrap();
        let proj = crate::linalg::range_projector(s.posterior().matrix(), None);
        for r in 0..=3 {
            for a in [
                optimal_mean_class1(&s, r).unwrap(),
                optimal_mean_class2(&s, r).unwrap(),
            ] {
                let outside = (Matrix::identity(5, 5) - &proj) * &a.matrix;
                assert!(outside.amax() <= 1e-8);
            }
        }
    }

    #[test]
    fn predicted_loss_examples() {
        let s = bayes_spectrum(&scalar_problem()).unwrap();
        for target in [
            LossTarget::Cov(SpectralLossFn::kl()),
            LossTarget::MeanClass1,
            LossTarget::MeanClass2,
            LossTarget::Joint(MeanClass::Class2),
        ] {
            assert_abs_diff_eq!(predicted_loss(&s, 1, &target).unwrap(), 0.0, epsilon = 1e-14);
        }
        assert_relative_eq!(
            predicted_loss(&s, 0, &LossTarget::MeanClass2).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            predicted_loss(&s, 0, &LossTarget::MeanClass1).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            predicted_loss(&s, 0, &LossTarget::Cov(SpectralLossFn::kl())).unwrap(),
            0.09657359027997264,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            predicted_loss(&s, 0, &LossTarget::Joint(MeanClass::Class2)).unwrap(),
            1.1534264097200273,
            epsilon = 1e-12
        );
        assert!(matches!(
            predicted_loss(&s, 5, &LossTarget::MeanClass2),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn achieved_covariance_loss_matches_prediction() {
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        let p = sample::random_problem(&mut rng, 3, 6);
        let s = bayes_spectrum(&p).unwrap();
        let losses = [
            SpectralLossFn::kl(),
            SpectralLossFn::reverse_kl(),
            SpectralLossFn::renyi(0.25).unwrap(),
            SpectralLossFn::renyi(0.5).unwrap(),
            SpectralLossFn::renyi(0.75).unwrap(),
        ];
        for r in 0..=6 {
            let approx = optimal_covariance(&s, r).unwrap().assemble_spd().unwrap();
            for f in &losses {
                let achieved = spectral_loss(f, s.posterior(), &approx).unwrap();
                let predicted = predicted_loss(&s, r, &LossTarget::Cov(f.clone())).unwrap();
                assert!(
                    (achieved - predicted).abs() <= 1e-8 * predicted.max(1.0),
                    "r={r} loss={} achieved={achieved} predicted={predicted}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn random_covariance_candidates_never_beat_optimal() {
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        let p = sample::random_problem(&mut rng, 3, 5);
        let s = bayes_spectrum(&p).unwrap();
        let f = SpectralLossFn::kl();
        for r in 0..=3usize {
            let predicted = predicted_loss(&s, r, &LossTarget::Cov(f.clone())).unwrap();
            // The optimal update attains the bound exactly.
            let optimal = optimal_covariance(&s, r).unwrap().assemble_spd().unwrap();
            let at_optimum = spectral_loss(&f, s.posterior(), &optimal).unwrap();
            assert!((at_optimum - predicted).abs() <= 1e-9 * predicted.max(1.0));
            for _ in 0..20 {
                let mut factor = sample::random_matrix(&mut rng, 5, r.max(1)) * 0.3;
                if r == 0 {
                    factor = Matrix::zeros(5, 0);
                }
                let candidate = loop {
                    match LowRankUpdate::covariance_form(
                        p.prior().covariance().clone(),
                        factor.clone(),
                    ) {
                        Ok(u) => break u,
                        Err(_) => factor *= 0.5,
                    }
                };
                let assembled = candidate.assemble_spd().unwrap();
                let loss = spectral_loss(&f, s.posterior(), &assembled).unwrap();
                assert!(
                    loss >= predicted - 1e-9,
                    "r {r}: candidate loss {loss} below predicted {predicted}"
                );
            }
        }
    }

    #[test]
    fn class1_beats_class2_below_half_reduction() {
        // When every tail δ_i <= 1 the cubic tail sum cannot exceed the
        // linear one.
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        for _ in 0..10 {
            let p = sample::random_problem(&mut rng, 3, 5);
            let s = bayes_spectrum(&p).unwrap();
            for r in 0..=5 {
                if s.deltas()[r..].iter().all(|&d| d <= 1.0) {
                    let c1 = predicted_loss(&s, r, &LossTarget::MeanClass1).unwrap();
                    let c2 = predicted_loss(&s, r, &LossTarget::MeanClass2).unwrap();
                    assert!(c1 <= c2 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn joint_pair_is_exact_at_full_rank() {
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        let p = sample::random_problem(&mut rng, 2, 4);
        let s = bayes_spectrum(&p).unwrap();
        let (mean, cov) = joint_approximation(&s, s.rank_h(), MeanClass::Class2).unwrap();
        let sol = solve_posterior(&p, &Vector::zeros(2)).unwrap();
        assert!(rel_frobenius(&mean.matrix, &sol.mean_operator) <= 1e-8);
        assert!(rel_frobenius(&cov.assemble(), s.posterior().matrix()) <= 1e-8);
        assert_abs_diff_eq!(
            predicted_loss(&s, s.rank_h(), &LossTarget::Joint(MeanClass::Class2)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn reduced_rank_identity_frames_reduce_to_truncation() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let m = sample::random_matrix(&mut rng, 4, 4);
        let id = Matrix::identity(4, 4);
        for r in 0..=4 {
            let n = reduced_rank_solve(&id, &m, &id, r, None).unwrap();
            let direct = truncated_svd(&m, r).reconstruct();
            assert!(rel_frobenius(&direct, &n) <= 1e-10 || (direct - &n).amax() <= 1e-12);
        }
    }

    #[test]
    fn reduced_rank_zero_frame_gives_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let m = sample::random_matrix(&mut rng, 3, 4);
        let t = Matrix::zeros(3, 2);
        let s = sample::random_matrix(&mut rng, 5, 4);
        let n = reduced_rank_solve(&t, &m, &s, 1, None).unwrap();
        assert!(n.amax() <= 1e-14);
    }

    #[test]
    fn reduced_rank_minimality_property() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        for _ in 0..10 {
            // Rank-deficient frames exercise the projectors.
            let t = {
                let a = sample::random_matrix(&mut rng, 4, 2);
                let b = sample::random_matrix(&mut rng, 2, 3);
                a * b
            };
            let s = {
                let a = sample::random_matrix(&mut rng, 3, 2);
                let b = sample::random_matrix(&mut rng, 2, 5);
                a * b
            };
            let m = sample::random_matrix(&mut rng, 4, 5);
            let n = reduced_rank_solve(&t, &m, &s, 2, None).unwrap();
            let p_ker_t_perp = pinv(&t, None) * &t;
            let p_ran_s = &s * pinv(&s, None);
            let projected = p_ker_t_perp * &n * p_ran_s;
            assert!((&n - projected).amax() <= 1e-9);
        }
    }
}
