// SCAD-penalized logistic regression tuned by GCV, with sandwich standard errors.

use pennmm::simulation::{Example, GeneratorSpec};
use pennmm::selection::default_lambda_grid;
use pennmm::{gcv_select, sandwich_cov, FitConfig, LikelihoodModel, PenaltyKind};

pub fn run_example() -> pennmm::Result<()> {
    let spec = GeneratorSpec::new(Example::Logistic2 { rho: 0.25, d: 9 }).with_seed(11);
    let data = spec.generate(&mut spec.rng(0))?;
    let model = LikelihoodModel::new(spec.example.family(), data.fit_view)?;

    let grid = default_lambda_grid(model.n(), 30);
    let (curve, best) = gcv_select(&model, PenaltyKind::Scad { a: 3.7 }, &grid, &FitConfig::default())?;
    println!(
        "GCV picked lambda = {:.4} (grid point {} of {}), {} active",
        curve.chosen_lambda(),
        curve.chosen + 1,
        grid.len(),
        best.n_active()
    );
    let cov = sandwich_cov(&model, &best.penalty, &best)?;
    println!("{:>4} {:>8} {:>10} {:>10}", "j", "truth", "estimate", "se");
    for j in 0..model.d() {
        let se = if cov.available[j] { format!("{:.4}", cov.se[j]) } else { "NA".into() };
        println!("{:>4} {:>8.2} {:>10.4} {:>10}", j + 1, data.true_beta[j], best.beta_hat[j], se);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
