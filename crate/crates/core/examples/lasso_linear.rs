// L1-penalized least squares on an orthonormal design, where the exact answer
// is soft thresholding of the least-squares coefficients.

use nalgebra::{DMatrix, DVector};
use pennmm::{fit, mle, Dataset, Family, FitConfig, LikelihoodModel, PenaltySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn run_example() -> pennmm::Result<()> {
    let (n, d) = (50, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    // Columns with X^T X = n I.
    let x = raw.qr().q() * (n as f64).sqrt();
    let truth = DVector::from_vec(vec![2.0, -1.0, 0.3, 0.0]);
    let y = &x * &truth + DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    let model = LikelihoodModel::new(Family::Linear, Dataset::new(x, y, names)?)?;

    let config = FitConfig::default();
    let ols = mle(&model, &config)?;
    let lambda = 0.5;
    let lasso = fit(&model, &PenaltySpec::l1(lambda)?, None, &config)?;
    println!("lambda = {lambda}, epsilon = {:.3e}, {} iterations", lasso.epsilon, lasso.iterations);
    println!("{:>4} {:>10} {:>10} {:>10}", "j", "ols", "lasso", "soft");
    for j in 0..d {
        let z = ols.beta_hat[j];
        let soft = z.signum() * (z.abs() - lambda).max(0.0);
        println!("{:>4} {:>10.6} {:>10.6} {:>10.6}", j + 1, z, lasso.beta_hat[j], soft);
        assert!((lasso.beta_hat[j] - soft).abs() < 1e-6);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
