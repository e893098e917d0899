//! Regenerates the problem files under `problems/`.
//!
//! Run from the workspace root:
//! `cargo run -p lowrank-bip --example make_problems`

use lowrank_bip::io::{CovSpec, PowerLaw, ProblemFile, SCHEMA_VERSION};
use lowrank_bip::sample::deconvolution_problem;

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    std::fs::create_dir_all(&root).expect("problems directory");

    let scalar = ProblemFile {
        schema_version: SCHEMA_VERSION.into(),
        n: 1,
        d: 1,
        forward: vec![vec![1.0]],
        noise_cov: CovSpec::Dense(vec![vec![1.0]]),
        prior_cov: CovSpec::Dense(vec![vec![1.0]]),
        prior_mean: None,
    };
    write(&root.join("scalar.json"), &scalar);

    let (n, d) = (16, 64);
    let blur = deconvolution_problem(n, d);
    let rows = (0..n)
        .map(|i| (0..d).map(|j| blur.forward()[(i, j)]).collect())
        .collect();
    let deconvolution = ProblemFile {
        schema_version: SCHEMA_VERSION.into(),
        n,
        d,
        forward: rows,
        noise_cov: CovSpec::Diag {
            diag: vec![1e-2; n],
        },
        prior_cov: CovSpec::PowerLaw {
            power_law: PowerLaw {
                amplitude: 1.0,
                exponent: 2.0,
            },
        },
        prior_mean: None,
    };
    write(&root.join("deconvolution_64.json"), &deconvolution);
}

fn write(path: &std::path::Path, file: &ProblemFile) {
    let text = serde_json::to_string_pretty(file).expect("serializable");
    std::fs::write(path, text + "\n").expect("writable");
    println!("wrote {}", path.display());
}
