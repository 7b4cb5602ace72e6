// Poisson regression of daily counts on a cubic spline in time plus
// pollutant terms, with SCAD tuned by GCV.

use nalgebra::{DMatrix, DVector};
use pennmm::likelihood::{spline_basis, standardize};
use pennmm::selection::log_grid;
use pennmm::{gcv_select, Dataset, Family, FitConfig, LikelihoodModel, PenaltyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};

pub const DAYS: usize = 730;

/// Synthetic counts with a seasonal trend, two active pollutants and four inert terms.
pub fn daily_counts(seed: u64) -> pennmm::Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t: Vec<f64> = (0..DAYS).map(|i| i as f64).collect();
    let basis = spline_basis(&t, &[0.2, 0.4, 0.6, 0.8])?;
    let mut pollutants = vec![vec![0.0; DAYS]; 3];
    for k in 0..3 {
        let mut prev = 0.0;
        for i in 0..DAYS {
            prev = 0.7 * prev + rng.sample::<f64, _>(StandardNormal);
            pollutants[k][i] = prev;
        }
        pollutants[k] = standardize(&pollutants[k])?;
    }
    let mut extra = Vec::new();
    for k in 0..3 {
        extra.push(pollutants[k].clone());
    }
    for k in 0..3 {
        let sq: Vec<f64> = pollutants[k].iter().map(|v| v * v).collect();
        extra.push(standardize(&sq)?);
    }
    let coefs = [0.06, 0.04, 0.0, 0.0, 0.0, 0.0];
    let d = basis.ncols() + extra.len();
    let design = DMatrix::from_fn(DAYS, d, |i, j| if j < basis.ncols() { basis[(i, j)] } else { extra[j - basis.ncols()][i] });
    let response = DVector::from_fn(DAYS, |i, _| {
        let season = 0.25 * (2.0 * std::f64::consts::PI * t[i] / 365.0).cos();
        let eta = 3.5 + season + (0..6).map(|k| coefs[k] * extra[k][i]).sum::<f64>();
        rng.sample(Poisson::new(eta.exp()).expect("positive mean"))
    });
    let mut names: Vec<String> = (0..basis.ncols()).map(|j| format!("s{j}")).collect();
    names.extend(["x1", "x2", "x3", "x1sq", "x2sq", "x3sq"].map(String::from));
    Dataset::new(design, response, names)
}

pub fn run_example() -> pennmm::Result<()> {
    let data = daily_counts(4)?;
    let model = LikelihoodModel::new(Family::Poisson, data)?;
    let grid = log_grid(1e-3, 1.0, 25);
    // Coordinates sitting near their thresholding boundary contract slowly.
    let config = FitConfig { max_iter: 5000, ..FitConfig::default() };
    let (curve, best) = gcv_select(&model, PenaltyKind::Scad { a: 3.7 }, &grid, &config)?;
    println!("{:>10} {:>12} {:>8}", "lambda", "gcv", "edf");
    for k in 0..grid.len() {
        let mark = if k == curve.chosen { " <" } else { "" };
        println!("{:>10.5} {:>12.6} {:>8.3}{mark}", curve.lambdas[k], curve.scores[k], curve.edf[k]);
    }
    println!("interior minimum: {}", curve.interior_minimum());
    let names = model.data().column_names();
    for j in 0..model.d() {
        println!("{:>6} {:>10.5}", names[j], best.beta_hat[j]);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
