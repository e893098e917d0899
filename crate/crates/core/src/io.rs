//! Problem ingestion, tolerances, rank-sweep drivers and machine-readable
//! reports.
//!
//! Problems are JSON files with a `schema_version`; covariances may be given
//! densely, as a diagonal, or (for the prior) as a `power_law` spectrum
//! `a * k^{-s}` on the standard basis. Reports serialize to JSON or CSV with
//! identical numeric content; doubles print as shortest round-trip decimals
//! in both formats, so identical inputs produce byte-identical reports.

use crate::bip::{hessian, solve_posterior, LinearGaussianProblem};
use crate::gaussian::{
    fh_operator, spectral_loss, GaussianMeasure, LossKind, SpectralLossFn,
};
use crate::linalg::{rel_frobenius, SpdOperator, SymmetricOperator};
use crate::lowrank::{
    convert_update, joint_approximation, optimal_covariance, optimal_mean_class1,
    optimal_mean_class2, optimal_precision, predicted_loss, LossTarget, MeanClass,
};
use crate::oracle::{bayes_risk_exact, jf_gradient, jf_value};
use crate::par::map_indexed;
use crate::pencil::{bayes_spectrum, square_root_factors, variance_reduction, PencilSpectrum};
use crate::sample;
use crate::{Error, Matrix, Result, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1";

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

/// Covariance specification in a problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovSpec {
    Dense(Vec<Vec<f64>>),
    Diag { diag: Vec<f64> },
    PowerLaw { power_law: PowerLaw },
}

/// Prior eigenvalues `amplitude * k^{-exponent}` on the standard basis,
/// `k = 1..d`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLaw {
    pub amplitude: f64,
    pub exponent: f64,
}

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema_version: String,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "G")]
    pub forward: Vec<Vec<f64>>,
    #[serde(rename = "C_obs")]
    pub noise_cov: CovSpec,
    #[serde(rename = "C_pr")]
    pub prior_cov: CovSpec,
    #[serde(rename = "m_pr", skip_serializing_if = "Option::is_none")]
    pub prior_mean: Option<Vec<f64>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], field: &str) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Validation {
            field: field.into(),
            message: "matrix must not be empty".into(),
        });
    }
    let ncols = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Validation {
                field: field.into(),
                message: format!("row {i} has {} entries, expected {ncols}", row.len()),
            });
        }
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cov_to_spd(spec: &CovSpec, dim: usize, field: &str) -> Result<SpdOperator> {
    let matrix = match spec {
        CovSpec::Dense(rows) => rows_to_matrix(rows, field)?,
        CovSpec::Diag { diag } => {
            if diag.len() != dim {
                return Err(Error::Validation {
                    field: field.into(),
                    message: format!("diagonal has {} entries, expected {dim}", diag.len()),
                });
            }
            Matrix::from_diagonal(&Vector::from_vec(diag.clone()))
        }
        CovSpec::PowerLaw { power_law } => {
            if power_law.amplitude <= 0.0 || power_law.exponent < 0.0 {
                return Err(Error::Validation {
                    field: field.into(),
                    message: "power law needs amplitude > 0 and exponent >= 0".into(),
                });
            }
            let eigs = Vector::from_fn(dim, |k, _| {
                power_law.amplitude * ((k + 1) as f64).powf(-power_law.exponent)
            });
            Matrix::from_diagonal(&eigs)
        }
    };
    if matrix.nrows() != dim || matrix.ncols() != dim {
        return Err(Error::Validation {
            field: field.into(),
            message: format!(
                "expected a {dim}x{dim} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ),
        });
    }
    SpdOperator::from_matrix(matrix).map_err(|e| Error::Validation {
        field: field.into(),
        message: e.to_string(),
    })
}

impl ProblemFile {
    /// Validates and assembles the in-memory problem.
    pub fn into_problem(&self) -> Result<LinearGaussianProblem> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation {
                field: "schema_version".into(),
                message: format!(
                    "unrecognized schema version `{}`, expected `{SCHEMA_VERSION}`",
                    self.schema_version
                ),
            });
        }
        let forward = rows_to_matrix(&self.forward, "G")?;
        if forward.nrows() != self.n || forward.ncols() != self.d {
            return Err(Error::Validation {
                field: "G".into(),
                message: format!(
                    "expected {}x{}, got {}x{}",
                    self.n,
                    self.d,
                    forward.nrows(),
                    forward.ncols()
                ),
            });
        }
        let noise = cov_to_spd(&self.noise_cov, self.n, "C_obs")?;
        let prior_cov = cov_to_spd(&self.prior_cov, self.d, "C_pr")?;
        let mean = match &self.prior_mean {
            Some(m) => {
                if m.len() != self.d {
                    return Err(Error::Validation {
                        field: "m_pr".into(),
                        message: format!("expected {} entries, got {}", self.d, m.len()),
                    });
                }
                Vector::from_vec(m.clone())
            }
            None => Vector::zeros(self.d),
        };
        let prior = GaussianMeasure::new(mean, prior_cov)?;
        LinearGaussianProblem::new(forward, noise, prior)
    }

    /// Dense representation of an in-memory problem.
    pub fn from_problem(p: &LinearGaussianProblem) -> Self {
        let mean = p.prior().mean();
        Self {
            schema_version: SCHEMA_VERSION.into(),
            n: p.n_obs(),
            d: p.dim(),
            forward: matrix_to_rows(p.forward()),
            noise_cov: CovSpec::Dense(matrix_to_rows(p.noise_cov().matrix())),
            prior_cov: CovSpec::Dense(matrix_to_rows(p.prior().covariance().matrix())),
            prior_mean: if mean.iter().all(|&x| x == 0.0) {
                None
            } else {
                Some(mean.iter().copied().collect())
            },
        }
    }
}

/// Parses and validates a problem file.
pub fn load_problem(path: &Path) -> Result<LinearGaussianProblem> {
    Ok(load_problem_with_digest(path)?.0)
}

/// As [`load_problem`], also returning the SHA-256 of the file bytes for
/// report metadata.
pub fn load_problem_with_digest(path: &Path) -> Result<(LinearGaussianProblem, String)> {
    let bytes = std::fs::read(path)?;
    let digest = hex_digest(&bytes);
    let file: ProblemFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((file.into_problem()?, digest))
}

/// Writes the dense JSON representation of a problem.
pub fn save_problem(p: &LinearGaussianProblem, path: &Path) -> Result<()> {
    let file = ProblemFile::from_problem(p);
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------

/// Numerical thresholds used by report checks; loadable from a TOML
/// `[tolerances]` block and embedded verbatim in report metadata.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// PSD clipping, relative to the largest eigenvalue (library default).
    pub spd_rel: f64,
    /// Numerical rank detection, relative to the largest singular value.
    pub rank_cutoff_rel: f64,
    /// Residual bound for spectral identities.
    pub residual: f64,
    /// Relative bound for achieved-vs-predicted loss comparisons.
    pub loss_match_rel: f64,
    /// Orthonormality deviation bound.
    pub orthonormality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spd_rel: crate::linalg::PSD_TOL_REL,
            rank_cutoff_rel: crate::linalg::RANK_CUTOFF_REL,
            residual: 1e-8,
            loss_match_rel: 1e-8,
            orthonormality: 1e-10,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceFile {
    #[serde(default)]
    tolerances: Tolerances,
}

/// Reads a `[tolerances]` TOML file; missing keys keep their defaults.
pub fn load_tolerances(path: &Path) -> Result<Tolerances> {
    let text = std::fs::read_to_string(path)?;
    let parsed: ToleranceFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(parsed.tolerances)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub timestamp: String,
    pub input_digest: String,
}

/// One row of a rank sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRecord {
    pub r: usize,
    pub predicted_cov_loss: BTreeMap<String, f64>,
    pub achieved_cov_loss: BTreeMap<String, f64>,
    pub predicted_mean_loss_class1: f64,
    pub predicted_mean_loss_class2: f64,
    pub achieved_bayes_risk_class1: f64,
    pub achieved_bayes_risk_class2: f64,
    pub joint_loss_class1: f64,
    pub joint_loss_class2: f64,
    pub unique: bool,
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: String,
    pub metadata: ReportMetadata,
    pub records: Vec<RankRecord>,
}

impl SweepReport {
    /// True when every achieved quantity matches its prediction within the
    /// recorded tolerances.
    pub fn all_checks_pass(&self) -> bool {
        let tol = self.metadata.tolerances.loss_match_rel;
        self.records.iter().all(|rec| {
            let cov_ok = rec.predicted_cov_loss.iter().all(|(name, &pred)| {
                rec.achieved_cov_loss
                    .get(name)
                    .is_some_and(|&ach| (ach - pred).abs() <= tol * pred.max(1.0))
            });
            let mean_ok = (rec.achieved_bayes_risk_class1 - rec.predicted_mean_loss_class1).abs()
                <= tol * rec.predicted_mean_loss_class1.max(1.0)
                && (rec.achieved_bayes_risk_class2 - rec.predicted_mean_loss_class2).abs()
                    <= tol * rec.predicted_mean_loss_class2.max(1.0);
            cov_ok && mean_ok
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Flat CSV with the same numeric content as the JSON form. Spectrum
    /// columns are expanded as `lambda_i`/`delta_i`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let loss_names: Vec<&String> = self
            .records
            .first()
            .map(|r| r.predicted_cov_loss.keys().collect())
            .unwrap_or_default();
        let dim = self.records.first().map(|r| r.lambdas.len()).unwrap_or(0);

        let mut header = vec!["r".to_string(), "unique".to_string()];
        for name in &loss_names {
            header.push(format!("predicted_cov_{name}"));
            header.push(format!("achieved_cov_{name}"));
        }
        header.extend([
            "predicted_mean_class1".to_string(),
            "predicted_mean_class2".to_string(),
            "achieved_risk_class1".to_string(),
            "achieved_risk_class2".to_string(),
            "joint_class1".to_string(),
            "joint_class2".to_string(),
        ]);
        for i in 0..dim {
            header.push(format!("lambda_{i}"));
        }
        for i in 0..dim {
            header.push(format!("delta_{i}"));
        }
        out.push_str(&header.join(","));
        out.push('\n');

        for rec in &self.records {
            let mut row = vec![rec.r.to_string(), rec.unique.to_string()];
            for name in &loss_names {
                row.push(format_f64(rec.predicted_cov_loss[*name]));
                row.push(format_f64(rec.achieved_cov_loss[*name]));
            }
            row.push(format_f64(rec.predicted_mean_loss_class1));
            row.push(format_f64(rec.predicted_mean_loss_class2));
            row.push(format_f64(rec.achieved_bayes_risk_class1));
            row.push(format_f64(rec.achieved_bayes_risk_class2));
            row.push(format_f64(rec.joint_loss_class1));
            row.push(format_f64(rec.joint_loss_class2));
            for &l in &rec.lambdas {
                row.push(format_f64(l));
            }
            for &d in &rec.deltas {
                row.push(format_f64(d));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn format_f64(x: f64) -> String {
    // Display already prints the shortest round-trip decimal; pin the float
    // suffix so CSV cells parse back bit-exactly as f64.
    format!("{x}")
}

/// Sweep configuration; ranks must lie in `0..=d`.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub ranks: Vec<usize>,
    pub losses: Vec<LossKind>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub input_digest: String,
}

/// Computes the spectrum once, then all predicted and achieved quantities
/// per rank (ranks run in parallel under the `parallel` feature; rows are
/// assembled in rank order).
pub fn run_sweep(p: &LinearGaussianProblem, config: &SweepConfig) -> Result<SweepReport> {
    for &r in &config.ranks {
        if r > p.dim() {
            return Err(Error::RankOutOfRange {
                rank: r,
                max: p.dim(),
            });
        }
    }
    let losses: Vec<(String, SpectralLossFn)> = config
        .losses
        .iter()
        .map(|kind| SpectralLossFn::from_kind(*kind).map(|f| (kind.to_string(), f)))
        .collect::<Result<_>>()?;
    let spectrum = bayes_spectrum(p)?;

    let rows: Vec<Result<RankRecord>> = map_indexed(config.ranks.len(), |idx| {
        let r = config.ranks[idx];
        sweep_record(p, &spectrum, r, &losses)
    });
    let records = rows.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(SweepReport {
        schema_version: SCHEMA_VERSION.into(),
        metadata: ReportMetadata {
            seed: config.seed,
            tolerances: config.tolerances,
            timestamp: chrono::Utc::now().to_rfc3339(),
            input_digest: config.input_digest.clone(),
        },
        records,
    })
}

fn sweep_record(
    p: &LinearGaussianProblem,
    spectrum: &PencilSpectrum,
    r: usize,
    losses: &[(String, SpectralLossFn)],
) -> Result<RankRecord> {
    let update = optimal_covariance(spectrum, r)?;
    let assembled = update.assemble_spd()?;

    let mut predicted_cov_loss = BTreeMap::new();
    let mut achieved_cov_loss = BTreeMap::new();
    for (name, f) in losses {
        let predicted = predicted_loss(spectrum, r, &LossTarget::Cov(f.clone()))?;
        let achieved = spectral_loss(f, spectrum.posterior(), &assembled)?;
        predicted_cov_loss.insert(name.clone(), predicted);
        achieved_cov_loss.insert(name.clone(), achieved);
    }

    let mean1 = optimal_mean_class1(spectrum, r)?;
    let risk1 = bayes_risk_exact(&mean1, p, spectrum)?.value;
    let r2 = r.min(p.dim()).min(p.n_obs());
    let mean2 = optimal_mean_class2(spectrum, r2)?;
    let risk2 = bayes_risk_exact(&mean2, p, spectrum)?.value;

    Ok(RankRecord {
        r,
        predicted_cov_loss,
        achieved_cov_loss,
        predicted_mean_loss_class1: predicted_loss(spectrum, r, &LossTarget::MeanClass1)?,
        predicted_mean_loss_class2: predicted_loss(spectrum, r2, &LossTarget::MeanClass2)?,
        achieved_bayes_risk_class1: risk1,
        achieved_bayes_risk_class2: risk2,
        joint_loss_class1: predicted_loss(spectrum, r, &LossTarget::Joint(MeanClass::Class1))?,
        joint_loss_class2: predicted_loss(spectrum, r2, &LossTarget::Joint(MeanClass::Class2))?,
        unique: update.unique(),
        lambdas: spectrum.lambdas().to_vec(),
        deltas: spectrum.deltas().to_vec(),
    })
}

// ---------------------------------------------------------------------------
// Single-shot outputs
// ---------------------------------------------------------------------------

/// Spectrum dump: eigenvalues, bases and per-direction variance reduction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumOutput {
    pub schema_version: String,
    pub n: usize,
    pub d: usize,
    pub rank_h: usize,
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub variance_reductions: Vec<f64>,
    pub w_basis: Vec<Vec<f64>>,
    pub v_basis: Vec<Vec<f64>>,
    pub phi_basis: Vec<Vec<f64>>,
    pub s_pos: Vec<Vec<f64>>,
    pub s_y: Vec<Vec<f64>>,
}

pub fn run_spectrum(p: &LinearGaussianProblem) -> Result<SpectrumOutput> {
    let s = bayes_spectrum(p)?;
    let factors = square_root_factors(p, &s)?;
    let variance_reductions = (1..=p.dim())
        .map(|i| variance_reduction(&s, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumOutput {
        schema_version: SCHEMA_VERSION.into(),
        n: p.n_obs(),
        d: p.dim(),
        rank_h: s.rank_h(),
        lambdas: s.lambdas().to_vec(),
        deltas: s.deltas().to_vec(),
        variance_reductions,
        w_basis: matrix_to_rows(s.w_basis()),
        v_basis: matrix_to_rows(s.v_basis()),
        phi_basis: matrix_to_rows(s.phi_basis()),
        s_pos: matrix_to_rows(&factors.s_pos),
        s_y: matrix_to_rows(&factors.s_y),
    })
}

/// Exact posterior for one data vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub schema_version: String,
    pub posterior_mean: Vec<f64>,
    pub posterior_covariance: Vec<Vec<f64>>,
    pub mean_operator: Vec<Vec<f64>>,
    pub hessian: Vec<Vec<f64>>,
}

pub fn run_solve(p: &LinearGaussianProblem, y: &Vector) -> Result<SolveOutput> {
    let sol = solve_posterior(p, y)?;
    Ok(SolveOutput {
        schema_version: SCHEMA_VERSION.into(),
        posterior_mean: sol.posterior.mean().iter().copied().collect(),
        posterior_covariance: matrix_to_rows(sol.posterior.covariance().matrix()),
        mean_operator: matrix_to_rows(&sol.mean_operator),
        hessian: matrix_to_rows(sol.hessian.matrix()),
    })
}

/// What `approx` should emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxTarget {
    Cov,
    Prec,
    Mean1,
    Mean2,
    Joint1,
    Joint2,
}

impl ApproxTarget {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "cov" => Ok(Self::Cov),
            "prec" => Ok(Self::Prec),
            "mean1" => Ok(Self::Mean1),
            "mean2" => Ok(Self::Mean2),
            "joint1" => Ok(Self::Joint1),
            "joint2" => Ok(Self::Joint2),
            other => Err(Error::Parse(format!("unknown approximation target `{other}`"))),
        }
    }
}

/// Serialized optimal approximation: factors, base identifier, spectra and
/// predicted losses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxOutput {
    pub schema_version: String,
    pub target: String,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unique: Option<bool>,
    pub predicted_loss: BTreeMap<String, f64>,
    pub spectrum: SpectrumOutput,
}

pub fn run_approx(
    p: &LinearGaussianProblem,
    target: ApproxTarget,
    rank: usize,
) -> Result<ApproxOutput> {
    let s = bayes_spectrum(p)?;
    let spectrum = run_spectrum(p)?;
    let mut out = ApproxOutput {
        schema_version: SCHEMA_VERSION.into(),
        target: format!("{target:?}").to_lowercase(),
        rank,
        base: None,
        sign: None,
        factor: None,
        mean_matrix: None,
        unique: None,
        predicted_loss: BTreeMap::new(),
        spectrum,
    };
    let cov_losses = [
        ("kl", SpectralLossFn::kl()),
        ("rkl", SpectralLossFn::reverse_kl()),
        ("renyi:0.5", SpectralLossFn::renyi(0.5)?),
    ];
    match target {
        ApproxTarget::Cov | ApproxTarget::Prec => {
            let update = if target == ApproxTarget::Cov {
                optimal_covariance(&s, rank)?
            } else {
                optimal_precision(&s, rank)?
            };
            out.base = Some(
                if target == ApproxTarget::Cov {
                    "C_pr"
                } else {
                    "C_pr_inv"
                }
                .into(),
            );
            out.sign = Some(
                match update.sign() {
                    crate::lowrank::UpdateSign::Minus => "minus",
                    crate::lowrank::UpdateSign::Plus => "plus",
                }
                .into(),
            );
            out.factor = Some(matrix_to_rows(update.factor()));
            out.unique = Some(update.unique());
            for (name, f) in &cov_losses {
                out.predicted_loss.insert(
                    name.to_string(),
                    predicted_loss(&s, rank, &LossTarget::Cov(f.clone()))?,
                );
            }
        }
        ApproxTarget::Mean1 => {
            let a = optimal_mean_class1(&s, rank)?;
            out.mean_matrix = Some(matrix_to_rows(&a.matrix));
            out.predicted_loss.insert(
                "bayes_risk".into(),
                predicted_loss(&s, rank, &LossTarget::MeanClass1)?,
            );
        }
        ApproxTarget::Mean2 => {
            let a = optimal_mean_class2(&s, rank)?;
            out.mean_matrix = Some(matrix_to_rows(&a.matrix));
            out.predicted_loss.insert(
                "bayes_risk".into(),
                predicted_loss(&s, rank, &LossTarget::MeanClass2)?,
            );
        }
        ApproxTarget::Joint1 | ApproxTarget::Joint2 => {
            let klass = if target == ApproxTarget::Joint1 {
                MeanClass::Class1
            } else {
                MeanClass::Class2
            };
            let (mean, cov) = joint_approximation(&s, rank, klass)?;
            out.mean_matrix = Some(matrix_to_rows(&mean.matrix));
            out.factor = Some(matrix_to_rows(cov.factor()));
            out.base = Some("C_pr".into());
            out.sign = Some("minus".into());
            out.unique = Some(cov.unique());
            out.predicted_loss.insert(
                "joint".into(),
                predicted_loss(&s, rank, &LossTarget::Joint(klass))?,
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Verify driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub schema_version: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Runs the self-check battery on one problem: exact-posterior identities,
/// pencil residuals, achieved-vs-predicted losses, duality, mean risks and a
/// finite-difference gradient probe.
pub fn run_verify(p: &LinearGaussianProblem, seed: u64, tol: &Tolerances) -> Result<VerifyOutput> {
    let mut checks = Vec::new();
    let mut check = |name: &str, measured: f64, threshold: f64| {
        checks.push(CheckResult {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
        });
    };

    let d = p.dim();
    let n = p.n_obs();
    let sol = solve_posterior(p, &Vector::zeros(n))?;
    let c_pos = sol.posterior.covariance();

    // Posterior precision = prior precision + Hessian.
    let precision_residual = rel_frobenius(
        &(p.prior().covariance().inverse_matrix()? + hessian(p).matrix()),
        &c_pos.inverse_matrix()?,
    );
    check("precision_identity", precision_residual, tol.residual);

    // The covariance update is PSD with rank at most n.
    let update = p.prior().covariance().matrix() - c_pos.matrix();
    let update_eigs = SymmetricOperator::symmetrize(&update)
        .into_matrix()
        .symmetric_eigen()
        .eigenvalues;
    check("update_psd", (-update_eigs.min()).max(0.0), 1e-10);
    let rank_excess = update_eigs
        .iter()
        .filter(|&&l| l > tol.spd_rel * update_eigs.amax().max(f64::MIN_POSITIVE))
        .count()
        .saturating_sub(n) as f64;
    check("update_rank", rank_excess, 0.0);

    // Pencil eigenvalues agree with the comparison operator spectrum.
    let s = bayes_spectrum(p)?;
    let r_op = fh_operator(c_pos, p.prior().covariance())?;
    let mut fh_eigs = r_op.into_matrix().symmetric_eigen().eigenvalues.as_slice().to_vec();
    fh_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lambda_dev = fh_eigs
        .iter()
        .zip(s.lambdas().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    check("pencil_vs_comparison_spectrum", lambda_dev, tol.residual);

    // Pencil residual identities.
    let h = hessian(p);
    let pre_prior = s.c_pr_half() * h.matrix() * s.c_pr_half();
    let pre_pos = s.c_pos_half() * h.matrix() * s.c_pos_half();
    let mut prior_residual = 0.0_f64;
    let mut pos_residual = 0.0_f64;
    let mut pencil_residual = 0.0_f64;
    for i in 0..d {
        let w = s.w_basis().column(i);
        prior_residual = prior_residual.max((&pre_prior * w - s.deltas()[i] * w).norm());
        let v = s.v_basis().column(i);
        pos_residual = pos_residual.max((&pre_pos * v - (-s.lambdas()[i]) * v).norm());
        let p_i = s.c_pr_inv_half() * w;
        let lhs = c_pos.matrix() * &p_i;
        let rhs = (1.0 + s.lambdas()[i]) * (p.prior().covariance().matrix() * &p_i);
        pencil_residual = pencil_residual.max((lhs - rhs).norm());
    }
    check("prior_preconditioned_residual", prior_residual, tol.residual);
    check("posterior_preconditioned_residual", pos_residual, tol.residual);
    check("covariance_pencil_residual", pencil_residual, tol.residual);

    let v_gram = s.v_basis().transpose() * s.v_basis();
    check(
        "v_basis_orthonormality",
        (v_gram - Matrix::identity(d, d)).amax(),
        tol.residual,
    );

    let mut rebuilt = Matrix::zeros(d, n);
    for i in 0..s.rank_h() {
        rebuilt +=
            s.deltas()[i].sqrt() * s.w_basis().column(i) * s.phi_basis().column(i).transpose();
    }
    check(
        "whitened_adjoint_reconstruction",
        (s.whitened_adjoint() - rebuilt).norm(),
        tol.residual,
    );

    // Square-root factors.
    let factors = square_root_factors(p, &s)?;
    check(
        "s_pos_factorization",
        rel_frobenius(c_pos.matrix(), &(&factors.s_pos * factors.s_pos.transpose())),
        tol.residual,
    );
    check(
        "s_y_factorization",
        rel_frobenius(
            p.data_cov()?.matrix(),
            &(&factors.s_y * factors.s_y.transpose()),
        ),
        tol.residual,
    );

    // Achieved vs predicted covariance losses, duality and mean risks.
    let losses = [
        SpectralLossFn::kl(),
        SpectralLossFn::reverse_kl(),
        SpectralLossFn::renyi(0.5)?,
    ];
    let mut loss_dev = 0.0_f64;
    let mut duality_dev = 0.0_f64;
    let mut mean_dev = 0.0_f64;
    for r in 0..=d {
        let cov = optimal_covariance(&s, r)?;
        let assembled = cov.assemble_spd()?;
        for f in &losses {
            let achieved = spectral_loss(f, s.posterior(), &assembled)?;
            let predicted = predicted_loss(&s, r, &LossTarget::Cov(f.clone()))?;
            loss_dev = loss_dev.max((achieved - predicted).abs() / predicted.max(1.0));
        }
        let prec = optimal_precision(&s, r)?.assemble();
        let inv = prec.clone().try_inverse().ok_or(Error::SingularBase {
            min_eigenvalue: f64::NAN,
        })?;
        duality_dev = duality_dev.max(rel_frobenius(&cov.assemble(), &inv));
        let round_trip = convert_update(&cov)?.assemble();
        duality_dev = duality_dev.max(rel_frobenius(&prec, &round_trip));

        let a1 = optimal_mean_class1(&s, r)?;
        let want1 = predicted_loss(&s, r, &LossTarget::MeanClass1)?;
        let got1 = bayes_risk_exact(&a1, p, &s)?.value;
        mean_dev = mean_dev.max((got1 - want1).abs() / want1.max(1.0));
        if r <= n.min(d) {
            let a2 = optimal_mean_class2(&s, r)?;
            let want2 = predicted_loss(&s, r, &LossTarget::MeanClass2)?;
            let got2 = bayes_risk_exact(&a2, p, &s)?.value;
            mean_dev = mean_dev.max((got2 - want2).abs() / want2.max(1.0));
        }
    }
    check("achieved_vs_predicted_cov_loss", loss_dev, tol.loss_match_rel);
    check("precision_covariance_duality", duality_dev, tol.loss_match_rel);
    check("mean_risk_vs_tail_sums", mean_dev, tol.loss_match_rel);

    // Gradient probe at a seeded random factor.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let r_probe = 1 + (d - 1).min(1);
    let u = sample::random_matrix(&mut rng, d, r_probe) * 0.5;
    let f = SpectralLossFn::kl();
    let grad = jf_gradient(&u, p, &f)?;
    let h_step = 1e-5;
    let mut fd = Matrix::zeros(d, r_probe);
    for i in 0..d {
        for j in 0..r_probe {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[(i, j)] += h_step;
            dn[(i, j)] -= h_step;
            fd[(i, j)] = (jf_value(&up, p, &f)? - jf_value(&dn, p, &f)?) / (2.0 * h_step);
        }
    }
    let grad_rel = (grad - &fd).norm() / fd.norm().max(1e-12);
    check("gradient_vs_finite_differences", grad_rel, 1e-4);

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyOutput {
        schema_version: SCHEMA_VERSION.into(),
        seed,
        passed,
        checks,
    })
}
