// Sandwich standard errors against the replicate spread of the estimate.

use pennmm::selection::default_lambda_grid;
use pennmm::simulation::{mean, std_dev, Example, GeneratorSpec};
use pennmm::{gcv_select, sandwich_cov, FitConfig, LikelihoodModel, PenaltyKind};

pub fn run_example() -> pennmm::Result<()> {
    let spec = GeneratorSpec::new(Example::Linear1 { rho: 0.5 }).with_seed(5);
    let reps = 30;
    let mut estimates = Vec::new();
    let mut ses = Vec::new();
    for rep in 0..reps {
        let data = spec.generate(&mut spec.rng(rep))?;
        let model = LikelihoodModel::new(spec.example.family(), data.fit_view)?;
        let grid = default_lambda_grid(model.n(), 20);
        let (_, best) = gcv_select(&model, PenaltyKind::Scad { a: 3.7 }, &grid, &FitConfig::default())?;
        let cov = sandwich_cov(&model, &best.penalty, &best)?;
        if cov.available[0] {
            estimates.push(best.beta_hat[0]);
            ses.push(cov.se[0]);
        }
    }
    println!("beta_1 over {} replicates:", estimates.len());
    println!("  SD of estimates  {:.4}", std_dev(&estimates));
    println!("  mean SE          {:.4}", mean(&ses));
    println!("  std(SE)          {:.4}", std_dev(&ses));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
