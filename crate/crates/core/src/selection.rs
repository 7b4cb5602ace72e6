//! Tuning-parameter selection by generalized cross-validation, exhaustive
//! best-subset baselines (AIC/BIC) and the oracle fit on a known support.

use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::likelihood::{CurvatureKind, Family, LikelihoodModel};
use crate::linalg::{self, Cholesky};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::solver::{self, FitConfig, FitResult, FitStatus, IterRecord};

/// Largest dimension accepted by [`best_subset`].
pub const MAX_SUBSET_DIM: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct GcvCurve {
    pub lambdas: Vec<f64>,
    pub scores: Vec<f64>,
    /// Effective degrees of freedom at each grid point (NaN where the fit failed).
    pub edf: Vec<f64>,
    pub chosen: usize,
}

impl GcvCurve {
    pub fn chosen_lambda(&self) -> f64 {
        self.lambdas[self.chosen]
    }

    /// True when the minimizer is neither the first nor the last grid point.
    pub fn interior_minimum(&self) -> bool {
        self.chosen > 0 && self.chosen + 1 < self.lambdas.len()
    }
}

/// `count` log-spaced values over `[1e-3, 2] * sqrt(log(n) / n)`.
pub fn default_lambda_grid(n: usize, count: usize) -> Vec<f64> {
    let scale = ((n as f64).ln() / n as f64).sqrt();
    log_grid(1e-3 * scale, 2.0 * scale, count)
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Deviance used by GCV: RSS for the linear family, `2 (l_sat - l)` for the
/// GLMs, and `-2 l_P` for Cox (the partial likelihood is bounded above by 0).
pub fn deviance(model: &LikelihoodModel, beta: &DVector<f64>) -> Result<f64> {
    let ll = model.loglik(beta)?;
    Ok(match model.family() {
        Family::Linear => -2.0 * ll,
        Family::Logistic => {
            let sat: f64 = model
                .data()
                .response()
                .iter()
                .map(|&y| xlogx(y) + xlogx(1.0 - y))
                .sum();
            2.0 * (sat - ll)
        }
        Family::Poisson => {
            let sat: f64 = model.data().response().iter().map(|&y| xlogx(y) - y).sum();
            2.0 * (sat - ll)
        }
        Family::Cox => -2.0 * ll,
    })
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `trace{(Hess l - n E)^{-1} Hess l}` over the active coordinates.
pub fn effective_dof(model: &LikelihoodModel, fit: &FitResult) -> Result<f64> {
    let active: Vec<usize> = (0..model.d()).filter(|&j| fit.active[j]).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    let n = model.n() as f64;
    let beta = &fit.beta_hat;
    let neg_h = -linalg::submatrix(&model.curvature(beta, CurvatureKind::ObservedHessian)?, &active, &active);
    let mut lhs = neg_h.clone();
    for (k, &j) in active.iter().enumerate() {
        lhs[(k, k)] += n * fit.penalty.curvature_weight(beta[j])?;
    }
    let chol = Cholesky::new(&lhs)?;
    let mut tr = 0.0;
    for k in 0..active.len() {
        let col = chol.solve(&neg_h.column(k).into_owned());
        tr += col[k];
    }
    Ok(tr)
}

pub fn gcv_score(model: &LikelihoodModel, fit: &FitResult) -> Result<(f64, f64)> {
    let n = model.n() as f64;
    let edf = effective_dof(model, fit)?;
    let dev = deviance(model, &fit.beta_hat)?;
    let denom = 1.0 - edf / n;
    Ok((dev / (n * denom * denom), edf))
}

/// Fits every grid value of `lambda` from the common MLE start and returns the
/// GCV curve with the fit at its minimizer (ties go to the larger `lambda`).
pub fn gcv_select(
    model: &LikelihoodModel,
    kind: PenaltyKind,
    lambda_grid: &[f64],
    config: &FitConfig,
) -> Result<(GcvCurve, FitResult)> {
    if lambda_grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    let mut lambdas = lambda_grid.to_vec();
    lambdas.sort_by(f64::total_cmp);
    let start = solver::mle(model, config)?.beta_eps;

    let mut scores = Vec::with_capacity(lambdas.len());
    let mut edf = Vec::with_capacity(lambdas.len());
    let mut best: Option<(usize, FitResult)> = None;
    for (i, &lambda) in lambdas.iter().enumerate() {
        let spec = PenaltySpec::new(kind, lambda)?;
        let outcome = solver::fit(model, &spec, Some(&start), config)
            .and_then(|f| gcv_score(model, &f).map(|s| (f, s)));
        match outcome {
            Ok((f, (score, e))) if f.status == FitStatus::Converged && score.is_finite() => {
                scores.push(score);
                edf.push(e);
                let better = best
                    .as_ref()
                    .map_or(true, |(b, _)| score <= scores[*b]);
                if better {
                    best = Some((i, f));
                }
            }
            _ => {
                scores.push(f64::INFINITY);
                edf.push(f64::NAN);
            }
        }
    }
    let (chosen, fit) = best.ok_or_else(|| Error::Config("no lambda on the grid produced a converged fit".into()))?;
    Ok((
        GcvCurve {
            lambdas,
            scores,
            edf,
            chosen,
        },
        fit,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Aic,
    Bic,
}

impl Criterion {
    /// Entropy-penalty tuning value: `sqrt(2/n)` or `sqrt(log(n)/n)`.
    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Criterion::Aic => (2.0 / n).sqrt(),
            Criterion::Bic => (n.ln() / n).sqrt(),
        }
    }

    /// `0.5 * n * lambda^2`, the charge per selected coefficient.
    pub fn charge_per_parameter(&self, n: usize) -> f64 {
        let l = self.lambda(n);
        0.5 * n as f64 * l * l
    }

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubsetSearchResult {
    pub best_subset: Vec<bool>,
    pub criterion_value: f64,
    pub n_models_evaluated: usize,
    pub elapsed: f64,
    /// Unpenalized MLE on the chosen subset, zeros elsewhere.
    pub beta: DVector<f64>,
}

pub fn best_subset(model: &LikelihoodModel, criterion: Criterion) -> Result<SubsetSearchResult> {
    best_subset_with(model, criterion, &FitConfig::default())
}

/// Minimizes `-l(beta_S) + 0.5 n lambda^2 |S|` over all `2^d` subsets.
pub fn best_subset_with(model: &LikelihoodModel, criterion: Criterion, config: &FitConfig) -> Result<SubsetSearchResult> {
    let d = model.d();
    if d > MAX_SUBSET_DIM {
        return Err(Error::TooManyCovariates {
            d,
            limit: MAX_SUBSET_DIM,
        });
    }
    let started = Instant::now();
    let charge = criterion.charge_per_parameter(model.n());
    let total = 1usize << d;
    let mut best_value = f64::INFINITY;
    let mut best_mask = 0usize;
    let mut best_beta = DVector::zeros(d);
    for mask in 0..total {
        let cols: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
        let (ll, beta) = if cols.is_empty() {
            let zero = DVector::zeros(d);
            match model.loglik(&zero) {
                Ok(ll) => (ll, zero),
                Err(_) => continue,
            }
        } else {
            let sub = model.select_columns(&cols);
            match solver::mle(&sub, config) {
                Ok(f) => {
                    let ll = match sub.loglik(&f.beta_eps) {
                        Ok(v) => v,
                        Err(_) => continue,
                    };
                    let mut full = DVector::zeros(d);
                    for (k, &j) in cols.iter().enumerate() {
                        full[j] = f.beta_eps[k];
                    }
                    (ll, full)
                }
                Err(_) => continue,
            }
        };
        let value = -ll + charge * cols.len() as f64;
        if value < best_value {
            best_value = value;
            best_mask = mask;
            best_beta = beta;
        }
    }
    Ok(SubsetSearchResult {
        best_subset: (0..d).map(|j| best_mask >> j & 1 == 1).collect(),
        criterion_value: best_value,
        n_models_evaluated: total,
        elapsed: started.elapsed().as_secs_f64(),
        beta: best_beta,
    })
}

/// Unpenalized MLE restricted to `support`, zeros elsewhere.
pub fn oracle_fit(model: &LikelihoodModel, support: &[bool]) -> Result<FitResult> {
    oracle_fit_with(model, support, &FitConfig::default())
}

pub fn oracle_fit_with(model: &LikelihoodModel, support: &[bool], config: &FitConfig) -> Result<FitResult> {
    let d = model.d();
    if support.len() != d {
        return Err(Error::Config(format!("support has length {}, expected {d}", support.len())));
    }
    let cols: Vec<usize> = (0..d).filter(|&j| support[j]).collect();
    let unpenalized = PenaltySpec::l1(0.0)?;
    if cols.is_empty() {
        let zero = DVector::zeros(d);
        let q = model.loglik(&zero)?;
        return Ok(FitResult {
            beta_hat: zero.clone(),
            active: vec![false; d],
            beta_eps: zero.clone(),
            penalty: unpenalized,
            epsilon: 0.0,
            epsilon_degenerate: true,
            epsilon_refinements: 0,
            iterations: 0,
            trace: vec![IterRecord {
                iteration: 0,
                q_eps: q,
                alpha: 0.0,
                grad_max: 0.0,
                epsilon: 0.0,
                beta: zero.clone(),
            }],
            status: FitStatus::Converged,
            zero_rule_gradients: model.score(&zero)?.abs(),
            start: zero,
            config: *config,
            shift_fallbacks: 0,
            ascent_violations: 0,
            refit: false,
        });
    }
    let sub = model.select_columns(&cols);
    let f = solver::mle(&sub, config)?;
    let embed = |v: &DVector<f64>| {
        let mut full = DVector::zeros(d);
        for (k, &j) in cols.iter().enumerate() {
            full[j] = v[k];
        }
        full
    };
    let mut zero_rule = DVector::zeros(d);
    for (k, &j) in cols.iter().enumerate() {
        zero_rule[j] = f.zero_rule_gradients[k];
    }
    Ok(FitResult {
        beta_hat: embed(&f.beta_hat),
        active: support.to_vec(),
        beta_eps: embed(&f.beta_eps),
        penalty: f.penalty,
        epsilon: f.epsilon,
        epsilon_degenerate: f.epsilon_degenerate,
        epsilon_refinements: f.epsilon_refinements,
        iterations: f.iterations,
        trace: f
            .trace
            .iter()
            .map(|r| IterRecord {
                beta: embed(&r.beta),
                ..r.clone()
            })
            .collect(),
        status: f.status,
        zero_rule_gradients: zero_rule,
        start: embed(&f.start),
        config: f.config,
        shift_fallbacks: f.shift_fallbacks,
        ascent_violations: f.ascent_violations,
        refit: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{sigmoid, Dataset};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn names(d: usize) -> Vec<String> {
        (1..=d).map(|j| format!("x{j}")).collect()
    }

    fn linear(rng: &mut ChaCha8Rng, n: usize, beta: &[f64]) -> LikelihoodModel {
        let d = beta.len();
        let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DVector::from_column_slice(beta);
        let y = (&x * &b).map(|m| m + rng.sample::<f64, _>(StandardNormal));
        LikelihoodModel::new(Family::Linear, Dataset::new(x, y, names(d)).unwrap()).unwrap()
    }

    #[test]
    fn unpenalized_grid_point_has_full_dof() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let m = linear(&mut rng, 50, &[1.0, 0.0, 2.0]);
        let (curve, _) = gcv_select(&m, PenaltyKind::Scad { a: 3.7 }, &[0.0, 0.05, 0.2], &FitConfig::default()).unwrap();
        assert!((curve.edf[0] - 3.0).abs() < 1e-10);
        assert!(curve.edf.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn chosen_fit_matches_independent_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = linear(&mut rng, 80, &[2.0, 0.0, 0.0, 1.0]);
        let grid = default_lambda_grid(80, 15);
        let cfg = FitConfig::default();
        let (curve, chosen) = gcv_select(&m, PenaltyKind::Scad { a: 3.7 }, &grid, &cfg).unwrap();
        let min = curve.scores.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(curve.scores[curve.chosen], min);
        let spec = PenaltySpec::scad(curve.chosen_lambda(), 3.7).unwrap();
        let again = solver::fit(&m, &spec, None, &cfg).unwrap();
        assert_eq!(again.beta_hat, chosen.beta_hat);
        assert_eq!(again.active, chosen.active);
    }

    #[test]
    fn ties_go_to_the_larger_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = linear(&mut rng, 40, &[1.0, 1.0]);
        // Two identical lambdas produce identical scores.
        let (curve, _) = gcv_select(&m, PenaltyKind::L1, &[1e-9, 1e-9], &FitConfig::default()).unwrap();
        assert_eq!(curve.chosen, 1);
    }

    #[test]
    fn two_covariate_search_matches_hand_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let m = linear(&mut rng, 30, &[0.8, 0.0]);
        let res = best_subset(&m, Criterion::Bic).unwrap();
        assert_eq!(res.n_models_evaluated, 4);
        let charge = (30f64).ln() / 2.0;
        let mut best = (f64::INFINITY, vec![]);
        for subset in [vec![], vec![0], vec![1], vec![0, 1]] {
            let ll = if subset.is_empty() {
                m.loglik(&DVector::zeros(2)).unwrap()
            } else {
                let sub = m.select_columns(&subset);
                let x = sub.data().design();
                let b = x.tr_mul(x).try_inverse().unwrap() * x.tr_mul(sub.data().response());
                sub.loglik(&b).unwrap()
            };
            let v = -ll + charge * subset.len() as f64;
            if v < best.0 {
                best = (v, subset);
            }
        }
        let mask: Vec<bool> = (0..2).map(|j| best.1.contains(&j)).collect();
        assert_eq!(res.best_subset, mask);
        assert!((res.criterion_value - best.0).abs() < 1e-9);
    }

    #[test]
    fn oversized_search_is_refused() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let m = linear(&mut rng, 40, &[0.0; 26]);
        assert!(matches!(
            best_subset(&m, Criterion::Aic),
            Err(Error::TooManyCovariates { d: 26, .. })
        ));
    }

    #[test]
    fn aic_charges_less_than_bic_from_eight_observations() {
        for n in 8..200 {
            assert!(Criterion::Bic.charge_per_parameter(n) > Criterion::Aic.charge_per_parameter(n));
            assert!(Criterion::Bic.lambda(n) > Criterion::Aic.lambda(n));
        }
        assert!((Criterion::Aic.charge_per_parameter(57) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn column_permutation_permutes_the_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let n = 120;
        let x = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            let e = 1.5 * x[(i, 0)] - x[(i, 2)];
            if rng.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 }
        });
        let m = LikelihoodModel::new(Family::Logistic, Dataset::new(x, y, names(4)).unwrap()).unwrap();
        let perm = [2, 0, 3, 1];
        let pm = m.select_columns(&perm);
        let a = best_subset(&m, Criterion::Bic).unwrap();
        let b = best_subset(&pm, Criterion::Bic).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            assert_eq!(b.best_subset[k], a.best_subset[j]);
        }
        assert!((a.criterion_value - b.criterion_value).abs() < 1e-8);
    }

    #[test]
    fn oracle_edge_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let m = linear(&mut rng, 50, &[1.0, -1.0, 0.5]);
        let all = oracle_fit(&m, &[true, true, true]).unwrap();
        let plain = solver::mle(&m, &FitConfig::default()).unwrap();
        assert!((all.beta_hat - plain.beta_hat).amax() < 1e-12);
        let none = oracle_fit(&m, &[false, false, false]).unwrap();
        assert!(none.beta_hat.iter().all(|&b| b == 0.0));
        let some = oracle_fit(&m, &[true, false, true]).unwrap();
        assert_eq!(some.beta_hat[1], 0.0);
        assert_eq!(some.active, vec![true, false, true]);
    }
}
