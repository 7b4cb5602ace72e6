//! Sandwich covariance for the penalized estimator.
//!
//! `cov = B^{-1} V B^{-1}` with bread `B = Hess loglik - n E` at the estimate
//! and meat `V = n * cov_hat(per-observation scores)`. Both are restricted to
//! the coordinates the fit left active.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::likelihood::{CurvatureKind, Family, LikelihoodModel};
use crate::linalg::{self, Cholesky};
use crate::penalty::PenaltySpec;
use crate::solver::FitResult;

#[derive(Debug, Clone)]
pub struct CovarianceReport {
    /// `d x d`; rows and columns of unavailable coordinates are zero.
    pub cov: DMatrix<f64>,
    pub se: DVector<f64>,
    /// False where no standard error could be formed ("NA").
    pub available: Vec<bool>,
    /// Ratio of extreme eigenvalues of the negated active bread.
    pub bread_condition: f64,
    /// Residual variance `RSS / (n - |active|)` for the linear family.
    pub sigma2: Option<f64>,
}

/// Per-observation score covariance `(1/n) sum (g_i - s)(g_i - s)^T - (mean - s)(mean - s)^T`.
///
/// Any constant shift `s` gives the same matrix; with `s = 0` this is the
/// plain centered form, with `s = E beta` the rows are the per-observation
/// shares of the surrogate gradient.
pub fn score_covariance(scores: &DMatrix<f64>, shift: Option<&DVector<f64>>) -> DMatrix<f64> {
    let n = scores.nrows();
    let d = scores.ncols();
    let mut shifted = scores.clone();
    if let Some(s) = shift {
        for mut row in shifted.row_iter_mut() {
            for j in 0..d {
                row[j] -= s[j];
            }
        }
    }
    let nf = n as f64;
    let mean = DVector::from_iterator(d, shifted.column_iter().map(|c| c.sum() / nf));
    let mut out = shifted.tr_mul(&shifted) / nf - &mean * mean.transpose();
    linalg::symmetrize(&mut out);
    out
}

pub fn sandwich_cov(model: &LikelihoodModel, spec: &PenaltySpec, fit: &FitResult) -> Result<CovarianceReport> {
    let d = model.d();
    let n = model.n() as f64;
    let active: Vec<usize> = (0..d).filter(|&j| fit.active[j]).collect();
    let beta = &fit.beta_hat;

    let sigma2 = (model.family() == Family::Linear).then(|| {
        let resid = model.data().response() - model.linear_predictor(beta);
        let dof = (model.n() as f64 - active.len() as f64).max(1.0);
        resid.norm_squared() / dof
    });

    let mut report = CovarianceReport {
        cov: DMatrix::zeros(d, d),
        se: DVector::zeros(d),
        available: vec![false; d],
        bread_condition: f64::NAN,
        sigma2,
    };
    if active.is_empty() {
        return Ok(report);
    }

    let hess = model.curvature(beta, CurvatureKind::ObservedHessian)?;
    let mut neg_bread = -linalg::submatrix(&hess, &active, &active);
    for (k, &j) in active.iter().enumerate() {
        neg_bread[(k, k)] += n * spec.curvature_weight(beta[j])?;
    }
    let eig = linalg::symmetric_eigenvalues(&neg_bread);
    report.bread_condition = eig.first().copied().unwrap_or(f64::NAN) / eig.last().copied().unwrap_or(f64::NAN);

    let chol = match Cholesky::new(&neg_bread) {
        Ok(c) => c,
        Err(_) => return Ok(report),
    };
    let bread_inv = chol.inverse();
    let scores = model.per_observation_scores(beta)?;
    let active_scores = DMatrix::from_fn(scores.nrows(), active.len(), |i, k| scores[(i, active[k])]);
    let meat = score_covariance(&active_scores, None) * n;
    let mut cov_active = &bread_inv * meat * &bread_inv;
    linalg::symmetrize(&mut cov_active);

    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            report.cov[(i, j)] = cov_active[(a, b)];
        }
        let var = cov_active[(a, a)];
        if var.is_finite() && var >= 0.0 {
            report.se[i] = var.sqrt();
            report.available[i] = true;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Dataset;
    use crate::solver::{fit, FitConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn names(d: usize) -> Vec<String> {
        (1..=d).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn one_parameter_two_observation_hand_arithmetic() {
        // x = (1, 2), y = (1, 3): OLS b = 7/5, residuals (-0.4, 0.2).
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0]);
        let m = LikelihoodModel::new(Family::Linear, Dataset::new(x, y, names(1)).unwrap()).unwrap();
        let f = fit(&m, &PenaltySpec::l1(0.0).unwrap(), None, &FitConfig::default()).unwrap();
        assert!((f.beta_hat[0] - 1.4).abs() < 1e-12);
        // Scores g = x * r = (-0.4, 0.4); mean 0; meat = sum g^2 = 0.32; bread = 5.
        let r = sandwich_cov(&m, &f.penalty, &f).unwrap();
        assert!((r.cov[(0, 0)] - 0.32 / 25.0).abs() < 1e-12);
        assert!((r.se[0] - (0.32f64 / 25.0).sqrt()).abs() < 1e-12);
        assert!((r.sigma2.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unpenalized_linear_matches_robust_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let (n, d) = (60, 3);
        let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 0)] - 0.5 * x[(i, 2)] + (1.0 + x[(i, 1)].abs()) * rng.sample::<f64, _>(StandardNormal)
        });
        let m = LikelihoodModel::new(Family::Linear, Dataset::new(x.clone(), y.clone(), names(d)).unwrap()).unwrap();
        let f = fit(&m, &PenaltySpec::l1(0.0).unwrap(), None, &FitConfig::default()).unwrap();
        let rep = sandwich_cov(&m, &f.penalty, &f).unwrap();

        // Hand-rolled: (X'X)^{-1} [sum r_i^2 x_i x_i' - n gbar gbar'] (X'X)^{-1}.
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let b = &xtx_inv * x.transpose() * &y;
        let r = &y - &x * &b;
        let mut meat = DMatrix::<f64>::zeros(d, d);
        let mut gbar = DVector::<f64>::zeros(d);
        for i in 0..n {
            let xi = x.row(i).transpose();
            meat += &xi * xi.transpose() * (r[i] * r[i]);
            gbar += &xi * r[i];
        }
        gbar /= n as f64;
        meat -= &gbar * gbar.transpose() * n as f64;
        let oracle = &xtx_inv * meat * &xtx_inv;
        assert!((rep.cov - oracle).amax() < 1e-12);
    }

    #[test]
    fn meat_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = DMatrix::from_fn(40, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let shift = DVector::from_vec(vec![3.0, -1.0, 0.5, 100.0]);
        let plain = score_covariance(&g, None);
        let shifted = score_covariance(&g, Some(&shift));
        assert!((plain - shifted).amax() < 1e-10);
    }

    #[test]
    fn penalized_cov_is_symmetric_psd_with_zeros_off_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let (n, d) = (100, 5);
        let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 0)] + x[(i, 3)] + rng.sample::<f64, _>(StandardNormal));
        let m = LikelihoodModel::new(Family::Linear, Dataset::new(x, y, names(d)).unwrap()).unwrap();
        let f = fit(&m, &PenaltySpec::scad(0.3, 3.7).unwrap(), None, &FitConfig::default()).unwrap();
        let rep = sandwich_cov(&m, &f.penalty, &f).unwrap();
        assert!((&rep.cov - rep.cov.transpose()).amax() == 0.0);
        let scale = rep.cov.amax();
        assert!(linalg::symmetric_eigenvalues(&rep.cov).iter().all(|&e| e >= -1e-10 * scale));
        for j in 0..d {
            if !f.active[j] {
                assert!(!rep.available[j]);
                assert_eq!(rep.se[j], 0.0);
                assert!(rep.cov.row(j).iter().all(|&v| v == 0.0));
            } else {
                assert!((rep.se[j] - rep.cov[(j, j)].sqrt()).abs() < 1e-15);
            }
        }
    }
}
