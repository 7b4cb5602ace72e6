// Writes a dataset to CSV and runs the `fit` command on it, the same path
// the `pennmm` binary takes.

use pennmm::cli::{main_with_args, read_coefficients};
use pennmm::simulation::{Example, GeneratorSpec};
use pennmm::tsv::write_dataset;

pub fn run_example() -> pennmm::Result<()> {
    let spec = GeneratorSpec::new(Example::Linear1 { rho: 0.5 }).with_seed(1);
    let data = spec.generate(&mut spec.rng(0))?;
    let dir = std::env::temp_dir().join(format!("pennmm-fit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|source| pennmm::Error::Io { path: dir.clone(), source })?;
    let csv = dir.join("linear.csv");
    write_dataset(&csv, &data.fit_view)?;

    let out = dir.join("out");
    let args = [
        "pennmm", "fit", "--input-path", csv.to_str().unwrap(), "--family", "linear",
        "--penalty", "scad", "--lambda", "0.3", "--output-dir", out.to_str().unwrap(),
    ];
    let code = main_with_args(args);
    println!("exit code {code}");
    for (name, estimate) in read_coefficients(&out.join("coefficients.tsv"))? {
        println!("{name:>4} {estimate:>10.5}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
