// Local convergence rate of the MM iteration: the predicted rate against the
// observed shrinkage of the distance to the fixed point.

use nalgebra::{DMatrix, DVector};
use pennmm::cli::contraction_ratios;
use pennmm::solver::rate_diagnostic;
use pennmm::{fit, Dataset, Family, FitConfig, LikelihoodModel, PenaltySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn run_example() -> pennmm::Result<()> {
    let (n, d) = (100, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = DVector::from_vec(vec![3.0, -2.0, 1.5]);
    let y = &x * &beta + DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    let model = LikelihoodModel::new(Family::Linear, Dataset::new(x, y, names)?)?;

    let config = FitConfig::default();
    for lambda in [0.2, 0.5, 1.0] {
        let f = fit(&model, &PenaltySpec::l1(lambda)?, None, &config)?;
        let diag = rate_diagnostic(&model, &f.penalty, &f.beta_eps, config.tau)?;
        let ratios = contraction_ratios(&f);
        let tail: Vec<String> = ratios.iter().rev().skip(1).take(4).rev().map(|r| format!("{r:.3}")).collect();
        println!(
            "lambda = {lambda}: rho = {:.3}, eigenvalues {:?}, {} iterations, late ratios [{}]",
            diag.rho,
            diag.eigenvalues.iter().map(|e| (e * 1e3).round() / 1e3).collect::<Vec<_>>(),
            f.iterations,
            tail.join(", ")
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
