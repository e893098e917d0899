//! Independent verification machinery: exact and Monte Carlo Bayes risk,
//! analytic loss gradients, and multi-start gradient descent.
//!
//! Nothing in this module consumes the closed-form optimal constructions;
//! it evaluates candidate operators from first principles so the optimality
//! claims elsewhere can be falsified numerically.

use crate::bip::{posterior_covariance, LinearGaussianProblem};
use crate::gaussian::SpectralLossFn;
use crate::linalg::SymmetricOperator;
use crate::lowrank::MeanApproxOperator;
use crate::par::{derive_seed, map_indexed};
use crate::pencil::PencilSpectrum;
use crate::{Error, Matrix, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Samples per Monte Carlo work chunk; fixed so the estimate is independent
/// of the execution mode.
const MC_CHUNK: usize = 4096;

/// Domain guard: spectral losses blow up as an eigenvalue approaches -1, so
/// candidate steps that push the spectrum below this floor are rejected.
const GAMMA_FLOOR: f64 = -1.0 + 1e-10;

/// A Bayes-risk value; `stderr` is zero for exact evaluations.
#[derive(Debug, Clone, Copy)]
pub struct RiskEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Outcome of a multi-start descent.
#[derive(Debug, Clone)]
pub struct OptimizerResult {
    pub argmin_factor: Matrix,
    pub loss: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub restarts_used: usize,
    /// Whether any restart reached the gradient tolerance. Non-convergence
    /// is reported, not fatal: the loss values remain comparable.
    pub converged: bool,
}

/// Descent hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 10_000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

/// Exact Bayes risk of a mean operator,
/// `E |A Y - m_pos(Y)|^2_{C_pos^{-1}} = |S_pos^{-1} A S_y - C_pr^{1/2} G^T C_obs^{-1/2}|_F^2`.
pub fn bayes_risk_exact(
    a: &MeanApproxOperator,
    p: &LinearGaussianProblem,
    s: &PencilSpectrum,
) -> Result<RiskEstimate> {
    if a.matrix.nrows() != p.dim() || a.matrix.ncols() != p.n_obs() {
        return Err(Error::DimensionMismatch {
            what: "mean operator",
            expected: p.dim(),
            got: a.matrix.nrows(),
        });
    }
    let whitened = s.s_pos_inv_matrix() * &a.matrix * s.s_y_matrix();
    let value = (whitened - s.whitened_adjoint()).norm_squared();
    Ok(RiskEstimate {
        value,
        stderr: 0.0,
        samples: 0,
    })
}

/// Monte Carlo Bayes risk: draws `Y ~ N(0, C_y)`, averages
/// `|S_pos^{-1}(A Y - m_pos(Y))|^2` and reports the standard error of the
/// mean. Chunks are seeded independently from `seed` and merged in chunk
/// order, so the result is identical with and without the `parallel`
/// feature.
pub fn bayes_risk_mc(
    a: &MeanApproxOperator,
    p: &LinearGaussianProblem,
    n_samples: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_samples < 100 {
        return Err(Error::Validation {
            field: "n_samples".into(),
            message: format!("need at least 100 samples, got {n_samples}"),
        });
    }
    let s = crate::pencil::bayes_spectrum(p)?;
    let exact_map = s.posterior().matrix()
        * p.forward().transpose()
        * p.noise_cov().inverse_matrix()?;
    // Per sample the error is (A - M_exact) C_y^{1/2} z with z ~ N(0, I),
    // so precompose everything into one matrix applied per draw.
    let per_draw = s.s_pos_inv_matrix() * (&a.matrix - exact_map) * p.data_cov()?.sqrt_matrix();

    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    let partials = map_indexed(n_chunks, |chunk| {
        let lo = chunk * MC_CHUNK;
        let hi = ((chunk + 1) * MC_CHUNK).min(n_samples);
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, chunk as u64));
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in lo..hi {
            let z = Vector::from_fn(per_draw.ncols(), |_, _| rng.sample(StandardNormal));
            let v = (&per_draw * z).norm_squared();
            sum += v;
            sum_sq += v * v;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partials
        .into_iter()
        .fold((0.0, 0.0), |(a0, b0), (a1, b1)| (a0 + a1, b0 + b1));

    let n = n_samples as f64;
    let mean = sum / n;
    let variance = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(RiskEstimate {
        value: mean,
        stderr: (variance / n).sqrt(),
        samples: n_samples,
    })
}

/// Shared precomputation for the precision-update loss `J_f`.
struct JfContext {
    c_pos_half: Matrix,
    c_pr_inv: Matrix,
}

impl JfContext {
    fn new(p: &LinearGaussianProblem) -> Result<Self> {
        let posterior = posterior_covariance(p)?;
        Ok(Self {
            c_pos_half: posterior.sqrt_matrix(),
            c_pr_inv: p.prior().covariance().inverse_matrix()?,
        })
    }

    /// `g(U) = C_pos^{1/2} (C_pr^{-1} + U U^T) C_pos^{1/2} - I`, symmetrized.
    fn g(&self, u: &Matrix) -> Matrix {
        let d = self.c_pos_half.nrows();
        let inner = &self.c_pr_inv + u * u.transpose();
        let g = &self.c_pos_half * inner * &self.c_pos_half - Matrix::identity(d, d);
        SymmetricOperator::symmetrize(&g).into_matrix()
    }

    /// `J_f(U) = Σ f(γ_i)`; +inf once an eigenvalue leaves the domain.
    fn value(&self, u: &Matrix, f: &SpectralLossFn) -> f64 {
        let eigs = self.g(u).symmetric_eigen().eigenvalues;
        let mut acc = 0.0;
        for &gamma in eigs.iter() {
            if gamma <= GAMMA_FLOOR {
                return f64::INFINITY;
            }
            acc += f.eval(gamma);
        }
        acc
    }

    /// `∇J_f(U) = 2 C_pos^{1/2} (Σ f'(γ_i) e_i e_i^T) C_pos^{1/2} U`.
    fn gradient(&self, u: &Matrix, f: &SpectralLossFn) -> Matrix {
        let eig = self.g(u).symmetric_eigen();
        let weights = Vector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&gamma| f.deriv(gamma)),
        );
        let weighted =
            &eig.eigenvectors * Matrix::from_diagonal(&weights) * eig.eigenvectors.transpose();
        2.0 * &self.c_pos_half * weighted * &self.c_pos_half * u
    }
}

/// Loss of the candidate precision update `C_pr^{-1} + U U^T` under `f`,
/// measured against the exact posterior.
pub fn jf_value(u: &Matrix, p: &LinearGaussianProblem, f: &SpectralLossFn) -> Result<f64> {
    check_factor_shape(u, p)?;
    Ok(JfContext::new(p)?.value(u, f))
}

/// Matrix representation of the loss gradient at `U`.
pub fn jf_gradient(u: &Matrix, p: &LinearGaussianProblem, f: &SpectralLossFn) -> Result<Matrix> {
    check_factor_shape(u, p)?;
    Ok(JfContext::new(p)?.gradient(u, f))
}

fn check_factor_shape(u: &Matrix, p: &LinearGaussianProblem) -> Result<()> {
    if u.nrows() != p.dim() {
        return Err(Error::DimensionMismatch {
            what: "precision factor",
            expected: p.dim(),
            got: u.nrows(),
        });
    }
    Ok(())
}

/// Multi-start gradient descent on `U -> J_f(U)` with Armijo backtracking.
///
/// Restarts draw independent initial factors (entries `N(0, 1/d)`) from
/// seeds derived per restart index and run independently; the best result is
/// selected by `(loss, restart index)`, so the outcome is deterministic
/// under any execution mode.
pub fn brute_force_cov_opt(
    p: &LinearGaussianProblem,
    r: usize,
    f: &SpectralLossFn,
    restarts: usize,
    seed: u64,
    config: &OptimizerConfig,
) -> Result<OptimizerResult> {
    if restarts == 0 {
        return Err(Error::Validation {
            field: "restarts".into(),
            message: "need at least one restart".into(),
        });
    }
    if r > p.dim() {
        return Err(Error::RankOutOfRange {
            rank: r,
            max: p.dim(),
        });
    }
    let ctx = JfContext::new(p)?;
    let d = p.dim();
    let scale = 1.0 / (d as f64).sqrt();

    let runs = map_indexed(restarts, |j| {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, j as u64));
        let u0 = Matrix::from_fn(d, r, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            z * scale
        });
        descend(&ctx, u0, f, config)
    });

    let mut best: Option<OptimizerResult> = None;
    let mut any_converged = false;
    for run in runs {
        any_converged |= run.converged;
        let better = match &best {
            None => true,
            Some(b) => run.loss < b.loss,
        };
        if better {
            best = Some(run);
        }
    }
    let mut out = best.expect("at least one restart");
    out.restarts_used = restarts;
    out.converged = any_converged;
    Ok(out)
}

fn descend(ctx: &JfContext, mut u: Matrix, f: &SpectralLossFn, config: &OptimizerConfig) -> OptimizerResult {
    let mut loss = ctx.value(&u, f);
    let mut iterations = 0;
    let mut gradient_norm = f64::INFINITY;
    let mut converged = false;

    while iterations < config.max_iter {
        let grad = ctx.gradient(&u, f);
        gradient_norm = grad.norm();
        if gradient_norm <= config.grad_tol {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let descent = gradient_norm * gradient_norm;
        let mut accepted = false;
        for _ in 0..config.max_backtracks {
            let candidate = &u - step * &grad;
            let candidate_loss = ctx.value(&candidate, f);
            if candidate_loss <= loss - config.armijo_c * step * descent {
                u = candidate;
                loss = candidate_loss;
                accepted = true;
                break;
            }
            step *= config.backtrack;
        }
        iterations += 1;
        if !accepted {
            // Line search stalled at floating point resolution.
            let grad = ctx.gradient(&u, f);
            gradient_norm = grad.norm();
            converged = gradient_norm <= config.grad_tol;
            break;
        }
    }
    if !converged && gradient_norm <= config.grad_tol {
        converged = true;
    }

    OptimizerResult {
        argmin_factor: u,
        loss,
        iterations,
        gradient_norm,
        restarts_used: 1,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bip::solve_posterior;
    use crate::gaussian::GaussianMeasure;
    use crate::linalg::SpdOperator;
    use crate::lowrank::{
        optimal_mean_class1, optimal_mean_class2, optimal_precision, predicted_loss, LossTarget,
        MeanClass,
    };
    use crate::pencil::bayes_spectrum;
    use crate::sample;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;

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

    fn exact_mean_operator(p: &LinearGaussianProblem) -> MeanApproxOperator {
        let sol = solve_posterior(p, &Vector::zeros(p.n_obs())).unwrap();
        MeanApproxOperator {
            matrix: sol.mean_operator,
            klass: MeanClass::Class2,
            rank: p.n_obs().min(p.dim()),
        }
    }

    #[test]
    fn exact_risk_of_exact_mean_is_zero() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(60);
        let p = sample::random_problem(&mut rng, 3, 5);
        let s = bayes_spectrum(&p).unwrap();
        let risk = bayes_risk_exact(&exact_mean_operator(&p), &p, &s).unwrap();
        assert_abs_diff_eq!(risk.value, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn exact_risk_of_zero_operator_is_delta_sum() {
        let p = scalar_problem();
        let s = bayes_spectrum(&p).unwrap();
        let zero = MeanApproxOperator {
            matrix: Matrix::zeros(1, 1),
            klass: MeanClass::Class2,
            rank: 0,
        };
        let risk = bayes_risk_exact(&zero, &p, &s).unwrap();
        assert_relative_eq!(risk.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_risk_of_full_rank_class2_mean_is_zero() {
        let forward = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let noise = SpdOperator::from_matrix(Matrix::identity(1, 1)).unwrap();
        let prior = GaussianMeasure::new(
            Vector::zeros(2),
            SpdOperator::from_matrix(Matrix::identity(2, 2)).unwrap(),
        )
        .unwrap();
        let p = LinearGaussianProblem::new(forward, noise, prior).unwrap();
        let s = bayes_spectrum(&p).unwrap();
        let a = optimal_mean_class2(&s, 1).unwrap();
        let risk = bayes_risk_exact(&a, &p, &s).unwrap();
        assert_abs_diff_eq!(risk.value, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn risks_of_optimal_means_match_tail_sums() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(61);
        for trial in 0..10 {
            let n = 1 + trial % 4;
            let d = 2 + trial % 5;
            let p = sample::random_problem(&mut rng, n, d);
            let s = bayes_spectrum(&p).unwrap();
            for r in 0..=n.min(d) {
                let a2 = optimal_mean_class2(&s, r).unwrap();
                let risk2 = bayes_risk_exact(&a2, &p, &s).unwrap().value;
                let want2 = predicted_loss(&s, r, &LossTarget::MeanClass2).unwrap();
                assert!((risk2 - want2).abs() <= 1e-8 * want2.max(1.0));

                let a1 = optimal_mean_class1(&s, r).unwrap();
                let risk1 = bayes_risk_exact(&a1, &p, &s).unwrap().value;
                let want1 = predicted_loss(&s, r, &LossTarget::MeanClass1).unwrap();
                assert!((risk1 - want1).abs() <= 1e-8 * want1.max(1.0));
            }
        }
    }

    #[test]
    fn mc_risk_of_exact_mean_is_exactly_zero() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(62);
        let p = sample::random_problem(&mut rng, 2, 3);
        let risk = bayes_risk_mc(&exact_mean_operator(&p), &p, 500, 7).unwrap();
        assert_abs_diff_eq!(risk.value, 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(risk.stderr, 0.0, epsilon = 1e-20);
    }

    #[test]
    fn mc_risk_matches_exact_within_three_stderr() {
        let p = scalar_problem();
        let zero = MeanApproxOperator {
            matrix: Matrix::zeros(1, 1),
            klass: MeanClass::Class2,
            rank: 0,
        };
        let risk = bayes_risk_mc(&zero, &p, 100_000, 3).unwrap();
        assert!((risk.value - 1.0).abs() <= 3.0 * risk.stderr);

        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(63);
        for trial in 0..20 {
            let n = 1 + trial % 3;
            let d = 2 + trial % 4;
            let p = sample::random_problem(&mut rng, n, d);
            let s = bayes_spectrum(&p).unwrap();
            let a = MeanApproxOperator {
                matrix: sample::random_matrix(&mut rng, d, n),
                klass: MeanClass::Class2,
                rank: n.min(d),
            };
            let exact = bayes_risk_exact(&a, &p, &s).unwrap().value;
            let mc = bayes_risk_mc(&a, &p, 20_000, 100 + trial as u64).unwrap();
            assert!(
                (mc.value - exact).abs() <= 3.0 * mc.stderr.max(1e-12),
                "trial {trial}: exact {exact}, mc {} ± {}",
                mc.value,
                mc.stderr
            );
        }
    }

    #[test]
    fn mc_risk_is_deterministic_per_seed() {
        let p = scalar_problem();
        let zero = MeanApproxOperator {
            matrix: Matrix::zeros(1, 1),
            klass: MeanClass::Class2,
            rank: 0,
        };
        let a = bayes_risk_mc(&zero, &p, 10_000, 5).unwrap();
        let b = bayes_risk_mc(&zero, &p, 10_000, 5).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn gradient_vanishes_when_update_matches_hessian() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(64);
        let p = sample::random_problem(&mut rng, 2, 4);
        let s = bayes_spectrum(&p).unwrap();
        // U U^T = H at full informed rank.
        let u = optimal_precision(&s, s.rank_h()).unwrap().factor().clone();
        let grad = jf_gradient(&u, &p, &SpectralLossFn::kl()).unwrap();
        assert!(grad.norm() <= 1e-8);
        assert!(jf_value(&u, &p, &SpectralLossFn::kl()).unwrap() <= 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(65);
        let losses = [
            SpectralLossFn::kl(),
            SpectralLossFn::reverse_kl(),
            SpectralLossFn::renyi(0.5).unwrap(),
        ];
        for trial in 0..30 {
            let n = 1 + trial % 3;
            let d = 2 + trial % 5;
            let r = 1 + trial % 2;
            let p = sample::random_problem(&mut rng, n, d);
            let f = &losses[trial % losses.len()];
            let u = sample::random_matrix(&mut rng, d, r) * 0.5;
            let grad = jf_gradient(&u, &p, f).unwrap();

            let h = 1e-5;
            let mut fd = Matrix::zeros(d, r);
            for i in 0..d {
                for j in 0..r {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[(i, j)] += h;
                    dn[(i, j)] -= h;
                    fd[(i, j)] = (jf_value(&up, &p, f).unwrap() - jf_value(&dn, &p, f).unwrap())
                        / (2.0 * h);
                }
            }
            let rel = (grad.clone() - &fd).norm() / fd.norm().max(1e-12);
            assert!(rel <= 1e-4, "trial {trial}: rel {rel}");
        }
    }

    #[test]
    fn gradient_is_stationary_at_closed_form_optimum() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(66);
        for trial in 0..10 {
            let n = 1 + trial % 4;
            let d = 2 + trial % 5;
            let p = sample::random_problem(&mut rng, n, d);
            let s = bayes_spectrum(&p).unwrap();
            for r in 0..=s.rank_h() {
                let u = optimal_precision(&s, r).unwrap().factor().clone();
                let grad = jf_gradient(&u, &p, &SpectralLossFn::kl()).unwrap();
                assert!(grad.norm() <= 1e-8, "trial {trial} rank {r}: {}", grad.norm());
            }
        }
    }

    #[test]
    fn descent_solves_scalar_problem() {
        let p = scalar_problem();
        let result = brute_force_cov_opt(
            &p,
            1,
            &SpectralLossFn::kl(),
            4,
            11,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(result.converged);
        assert!(result.loss <= 1e-10);
        let u2 = result.argmin_factor[(0, 0)].powi(2);
        assert_relative_eq!(u2, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn descent_reaches_zero_loss_at_full_rank() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(67);
        let p = sample::random_problem(&mut rng, 2, 3);
        let s = bayes_spectrum(&p).unwrap();
        let result = brute_force_cov_opt(
            &p,
            s.rank_h(),
            &SpectralLossFn::kl(),
            6,
            13,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(result.loss <= 1e-8, "loss {}", result.loss);
    }

    #[test]
    fn descent_never_beats_closed_form() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(68);
        for trial in 0..6 {
            let n = 1 + trial % 4;
            let d = 2 + trial % 5;
            let p = sample::random_problem(&mut rng, n, d);
            let s = bayes_spectrum(&p).unwrap();
            let r = 1 + trial % 2;
            let f = SpectralLossFn::kl();
            let predicted = predicted_loss(&s, r, &LossTarget::Cov(f.clone())).unwrap();
            let result =
                brute_force_cov_opt(&p, r, &f, 6, 17 + trial as u64, &OptimizerConfig::default())
                    .unwrap();
            assert!(
                result.loss >= predicted - 1e-6,
                "trial {trial}: brute {} < predicted {predicted}",
                result.loss
            );
        }
    }

    #[test]
    fn converged_factor_spans_leading_directions() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(69);
        let p = sample::random_problem(&mut rng, 3, 4);
        let s = bayes_spectrum(&p).unwrap();
        let r = 1;
        let result = brute_force_cov_opt(
            &p,
            r,
            &SpectralLossFn::kl(),
            10,
            23,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(result.converged);
        // Principal angle between span(U) and the leading informed direction.
        let u = crate::linalg::truncated_svd(&result.argmin_factor, r);
        let p1 = (s.c_pr_inv_half() * s.w_basis().column(0)).normalize();
        let cosine = (u.left.column(0).transpose() * &p1)[(0, 0)].abs();
        let angle = cosine.min(1.0).acos();
        assert!(angle <= 1e-4, "angle {angle}");
    }

    #[test]
    fn converged_rank_two_factor_spans_leading_subspace() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(70);
        let p = sample::random_problem(&mut rng, 4, 5);
        let s = bayes_spectrum(&p).unwrap();
        assert!(s.lambdas()[1] < s.lambdas()[2]);
        let r = 2;
        let result = brute_force_cov_opt(
            &p,
            r,
            &SpectralLossFn::kl(),
            12,
            29,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(result.converged);
        // Largest principal angle between span(U) and span(p_1, p_2) through
        // the singular values of the product of orthonormal bases.
        let u = crate::linalg::truncated_svd(&result.argmin_factor, r);
        let mut leading = Matrix::zeros(5, r);
        for i in 0..r {
            let p_i = s.c_pr_inv_half() * s.w_basis().column(i);
            leading.set_column(i, &p_i);
        }
        let q = leading.qr().q();
        let overlap = crate::linalg::truncated_svd(&(u.left.transpose() * q), r);
        let min_cosine = overlap.singular_values[r - 1].min(1.0);
        let angle = min_cosine.acos();
        assert!(angle <= 1e-4, "subspace angle {angle}");
    }

    #[test]
    fn mc_estimator_is_unbiased_across_runs() {
        let p = scalar_problem();
        let zero = MeanApproxOperator {
            matrix: Matrix::zeros(1, 1),
            klass: MeanClass::Class2,
            rank: 0,
        };
        let s = bayes_spectrum(&p).unwrap();
        let exact = bayes_risk_exact(&zero, &p, &s).unwrap().value;
        let runs = 50;
        let mut mean = 0.0;
        let mut var_acc = 0.0;
        for k in 0..runs {
            let est = bayes_risk_mc(&zero, &p, 2_000, 1000 + k).unwrap();
            mean += est.value / runs as f64;
            var_acc += (est.stderr * est.stderr) / (runs as f64 * runs as f64);
        }
        let combined_stderr = var_acc.sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * combined_stderr,
            "mean {mean} vs exact {exact} ± {combined_stderr}"
        );
    }
}
