//! Command line front end: exact posteriors, pencil spectra, optimal
//! low-rank approximations, rank sweeps, data simulation and self-checks.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error,
//! 3 numerical check failure.

use clap::{Args, Parser, Subcommand};
use lowrank_bip::bip::simulate_data;
use lowrank_bip::gaussian::LossKind;
use lowrank_bip::io::{
    load_problem_with_digest, load_tolerances, run_approx, run_solve, run_spectrum, run_sweep,
    run_verify, ApproxTarget, SweepConfig, Tolerances, SCHEMA_VERSION,
};
use lowrank_bip::{Error, Vector};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CHECK_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lowrank-bip",
    version,
    about = "Exact posteriors and optimal low-rank approximations for linear Gaussian inverse problems",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProblemArg {
    /// Problem description (JSON).
    #[arg(long, value_name = "PATH")]
    problem: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the exact posterior for one data vector.
    Solve {
        #[command(flatten)]
        problem: ProblemArg,
        /// Data vector as a JSON array; zeros when omitted.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Eigenvalues, bases and square-root factors of the covariance pencils.
    Spectrum {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// One optimal rank-r approximation in machine-readable form.
    Approx {
        #[command(flatten)]
        problem: ProblemArg,
        /// One of: cov, prec, mean1, mean2, joint1, joint2.
        #[arg(long)]
        target: String,
        #[arg(long)]
        rank: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Predicted and achieved losses for a range of ranks.
    Sweep {
        #[command(flatten)]
        problem: ProblemArg,
        /// Ranks as `A..B` (inclusive) or a comma list `0,2,5`.
        #[arg(long, value_name = "RANKS")]
        ranks: String,
        /// Covariance losses to tabulate (repeatable): kl, rkl, renyi:RHO,
        /// rrenyi:RHO.
        #[arg(long = "loss", value_name = "LOSS", default_values = ["kl", "rkl"])]
        losses: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// json or csv.
        #[arg(long, default_value = "json")]
        format: String,
        /// TOML file with a [tolerances] block.
        #[arg(long = "tol-file", value_name = "PATH")]
        tol_file: Option<PathBuf>,
    },
    /// Draw data from the observation model.
    Simulate {
        #[command(flatten)]
        problem: ProblemArg,
        /// True parameter as a JSON array; zeros when omitted.
        #[arg(long = "x-true", value_name = "PATH")]
        x_true: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run the numerical self-check battery on a problem.
    Verify {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "tol-file", value_name = "PATH")]
        tol_file: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LOWRANK_BIP_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::NotSymmetric { .. }
        | Error::IndefiniteInput { .. }
        | Error::DimensionMismatch { .. }
        | Error::RankOutOfRange { .. }
        | Error::IndexOutOfRange { .. }
        | Error::RhoOutOfRange(_)
        | Error::DeltaOutOfRange { .. }
        | Error::NotPositive { .. }
        | Error::NotOrthonormal(_)
        | Error::InvalidLossFn(_)
        | Error::SingularBase { .. }
        | Error::Io(_) => EXIT_VALIDATION,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve { problem, data, out } => {
            let (p, _) = load_problem_with_digest(&problem.problem)?;
            let y = load_vector_or_zeros(data.as_deref(), p.n_obs(), "data")?;
            let output = run_solve(&p, &y)?;
            emit(&to_pretty(&output)?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { problem, out } => {
            let (p, _) = load_problem_with_digest(&problem.problem)?;
            let output = run_spectrum(&p)?;
            emit(&to_pretty(&output)?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Approx {
            problem,
            target,
            rank,
            out,
        } => {
            let (p, _) = load_problem_with_digest(&problem.problem)?;
            let target = ApproxTarget::parse(&target)?;
            let output = run_approx(&p, target, rank)?;
            emit(&to_pretty(&output)?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            problem,
            ranks,
            losses,
            seed,
            out,
            format,
            tol_file,
        } => {
            let (p, digest) = load_problem_with_digest(&problem.problem)?;
            let ranks = parse_ranks(&ranks)?;
            let losses = losses
                .iter()
                .map(|text| LossKind::parse(text))
                .collect::<Result<Vec<_>, _>>()?;
            let tolerances = tolerances_from(tol_file.as_deref())?;
            let config = SweepConfig {
                ranks,
                losses,
                seed,
                tolerances,
                input_digest: digest,
            };
            let report = run_sweep(&p, &config)?;
            let text = match format.as_str() {
                "json" => report.to_json()?,
                "csv" => report.to_csv(),
                other => return Err(Error::Parse(format!("unknown format `{other}`"))),
            };
            emit(&text, out.as_deref())?;
            if report.all_checks_pass() {
                eprintln!("sweep: all achieved-vs-predicted checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("sweep: achieved-vs-predicted checks FAILED");
                Ok(ExitCode::from(EXIT_CHECK_FAILURE))
            }
        }
        Command::Simulate {
            problem,
            x_true,
            seed,
            out,
        } => {
            let (p, _) = load_problem_with_digest(&problem.problem)?;
            let x = load_vector_or_zeros(x_true.as_deref(), p.dim(), "x-true")?;
            let y = simulate_data(&p, &x, seed)?;
            let output = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "seed": seed,
                "y": y.iter().copied().collect::<Vec<f64>>(),
            });
            emit(&to_pretty(&output)?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            problem,
            seed,
            tol_file,
            out,
        } => {
            let (p, _) = load_problem_with_digest(&problem.problem)?;
            let tolerances = tolerances_from(tol_file.as_deref())?;
            let output = run_verify(&p, seed, &tolerances)?;
            for check in &output.checks {
                println!(
                    "{} {} (measured {:.3e}, threshold {:.3e})",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.measured,
                    check.threshold
                );
            }
            if let Some(path) = out.as_deref() {
                emit(&to_pretty(&output)?, Some(path))?;
            }
            if output.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_CHECK_FAILURE))
            }
        }
    }
}

fn to_pretty<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => {
            let with_newline = if text.ends_with('\n') {
                text.to_string()
            } else {
                format!("{text}\n")
            };
            std::fs::write(path, with_newline)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn load_vector_or_zeros(path: Option<&Path>, dim: usize, what: &str) -> Result<Vector, Error> {
    match path {
        None => Ok(Vector::zeros(dim)),
        Some(path) => {
            let bytes = std::fs::read(path)?;
            let values: Vec<f64> = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Parse(format!("{what}: {e}")))?;
            Ok(Vector::from_vec(values))
        }
    }
}

/// `A..B` (inclusive) or a comma list.
fn parse_ranks(text: &str) -> Result<Vec<usize>, Error> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("ranks: {e}")))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("ranks: {e}")))?;
        if hi < lo {
            return Err(Error::Parse(format!("ranks: empty range {lo}..{hi}")));
        }
        Ok((lo..=hi).collect())
    } else {
        text.split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("ranks: {e}")))
            })
            .collect()
    }
}

fn tolerances_from(path: Option<&Path>) -> Result<Tolerances, Error> {
    match path {
        Some(path) => load_tolerances(path),
        None => Ok(Tolerances::default()),
    }
}
