//! Exact posteriors and provably optimal low-rank approximations for linear
//! Gaussian inverse problems.
//!
//! Given an observation model `Y = G x + noise` with Gaussian noise and a
//! Gaussian prior on `x`, the posterior is again Gaussian with a closed-form
//! mean and covariance. This crate computes that posterior exactly and builds
//! the rank-`r` approximations of its covariance, precision, mean and joint
//! law that minimise every spectral divergence in a common loss class
//! (forward/reverse KL, Rényi, Hellinger) simultaneously. Every optimality
//! claim ships with an independent brute-force oracle so the closed forms can
//! be falsified numerically.
//!
//! Organisation:
//! - [`linalg`] — dense symmetric primitives (eigendecompositions, square
//!   roots, truncated SVD, pseudoinverse, rank-perturbed-identity inverses),
//! - [`gaussian`] — Gaussian measures, the comparison operator between two
//!   covariances, Carleman determinants and exact divergences,
//! - [`bip`] — problem definition, exact conditioning and data simulation,
//! - [`pencil`] — the joint spectrum of the prior/posterior covariance
//!   pencils that generates all optimal updates,
//! - [`lowrank`] — the optimal rank-`r` covariance, precision and mean
//!   constructions plus the generalized reduced-rank solver,
//! - [`oracle`] — Bayes-risk evaluation (exact and Monte Carlo), analytic
//!   gradients and multi-start descent used to falsify optimality,
//! - [`io`] — problem files, rank-sweep reports and the drivers behind the
//!   `lowrank-bip` command line tool.
//!
//! Data-parallel inner loops (Monte Carlo batches, optimizer restarts, rank
//! sweeps) run on rayon when the default `parallel` feature is enabled and
//! fall back to sequential iteration when it is not. Results are identical
//! in both modes: work is split into fixed chunks with seeds derived from
//! the chunk index, then merged in chunk order.
//!
//! ```
//! use lowrank_bip::bip::{solve_posterior, LinearGaussianProblem};
//! use lowrank_bip::gaussian::GaussianMeasure;
//! use lowrank_bip::linalg::SpdOperator;
//! use lowrank_bip::lowrank::{optimal_covariance, predicted_loss, LossTarget};
//! use lowrank_bip::gaussian::SpectralLossFn;
//! use lowrank_bip::pencil::bayes_spectrum;
//! use lowrank_bip::{Matrix, Vector};
//!
//! // One noisy observation of a scalar parameter with a unit prior.
//! let problem = LinearGaussianProblem::new(
//!     Matrix::from_element(1, 1, 1.0),
//!     SpdOperator::from_matrix(Matrix::identity(1, 1))?,
//!     GaussianMeasure::new(Vector::zeros(1), SpdOperator::from_matrix(Matrix::identity(1, 1))?)?,
//! )?;
//!
//! let posterior = solve_posterior(&problem, &Vector::from_element(1, 1.0))?;
//! assert!((posterior.posterior.mean()[0] - 0.5).abs() < 1e-12);
//!
//! // The rank-1 update already captures the full posterior covariance here.
//! let spectrum = bayes_spectrum(&problem)?;
//! let update = optimal_covariance(&spectrum, 1)?;
//! assert!((update.assemble()[(0, 0)] - 0.5).abs() < 1e-12);
//! let tail = predicted_loss(&spectrum, 1, &LossTarget::Cov(SpectralLossFn::kl()))?;
//! assert!(tail.abs() < 1e-12);
//! # Ok::<(), lowrank_bip::Error>(())
//! ```

pub mod bip;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod lowrank;
pub mod oracle;
pub mod pencil;
pub mod sample;

mod par;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Dense dynamically sized matrix of `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense dynamically sized column vector of `f64`.
pub type Vector = nalgebra::DVector<f64>;
