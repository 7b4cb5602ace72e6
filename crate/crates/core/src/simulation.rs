//! Seeded Monte Carlo studies: data generators for the linear, logistic and
//! Cox examples (including a misspecified Cox design), model-error metrics,
//! per-method summaries and a timing study.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::sandwich_cov;
use crate::likelihood::{sigmoid, Dataset, Family, LikelihoodModel};
use crate::penalty::PenaltyKind;
use crate::selection::{best_subset_with, default_lambda_grid, gcv_select, oracle_fit_with, Criterion};
use crate::solver::{self, FitConfig, FitResult};
use crate::tsv;

pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_MC_DRAWS: usize = 50_000;
pub const DEFAULT_GRID_LEN: usize = 50;
pub const SCAD_A: f64 = 3.7;

/// Assumed constants for the linear example (not given by the source study).
pub const LINEAR1_N: usize = 100;
pub const LINEAR1_SIGMA: f64 = 1.0;
pub const LINEAR1_BETA: [f64; 9] = [3.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 2.0];

pub const LOGISTIC2_N: usize = 200;
pub const LOGISTIC2_D: usize = 9;
/// Nonzero coefficients of the logistic example at positions 1, 4, 7.
pub const LOGISTIC2_NONZERO: [(usize, f64); 3] = [(0, 3.0), (3, 1.5), (6, 2.0)];

pub const COX_N: usize = 60;
pub const COX_RHO: f64 = 0.5;
pub const COX_BETA: [f64; 8] = [0.8, 0.0, 0.0, 1.0, 0.0, 0.0, 0.6, 0.0];
/// Censoring mean multiplier `U ~ Uniform[COX_U_LOW, COX_U_HIGH]`, drawn once per dataset.
pub const COX_U_LOW: f64 = 1.0;
pub const COX_U_HIGH: f64 = 3.0;
/// Truth columns used by the oracle in the misspecified design (x1, x4, x7, x9, x10).
pub const COX_MISSPEC_ORACLE: [usize; 5] = [0, 3, 6, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Example {
    Linear1 { rho: f64 },
    Logistic2 { rho: f64, d: usize },
    Cox3,
    CoxMisspec { beta_extra: f64 },
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::Linear1 { .. } => "linear1",
            Example::Logistic2 { .. } => "logistic2",
            Example::Cox3 => "cox3",
            Example::CoxMisspec { .. } => "cox-misspec",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Example::Linear1 { .. } => Family::Linear,
            Example::Logistic2 { .. } => Family::Logistic,
            Example::Cox3 | Example::CoxMisspec { .. } => Family::Cox,
        }
    }

    pub fn default_n(&self) -> usize {
        match self {
            Example::Linear1 { .. } => LINEAR1_N,
            Example::Logistic2 { .. } => LOGISTIC2_N,
            Example::Cox3 | Example::CoxMisspec { .. } => COX_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub example: Example,
    pub n: usize,
    pub seed: u64,
    pub replicates: usize,
    pub mc_draws: usize,
    pub grid_len: usize,
}

impl GeneratorSpec {
    pub fn new(example: Example) -> Self {
        GeneratorSpec {
            example,
            n: example.default_n(),
            seed: 0,
            replicates: DEFAULT_REPLICATES,
            mc_draws: DEFAULT_MC_DRAWS,
            grid_len: DEFAULT_GRID_LEN,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_mc_draws(mut self, draws: usize) -> Self {
        self.mc_draws = draws;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.example {
            Example::Linear1 { rho } | Example::Logistic2 { rho, .. } => {
                if !(rho > -1.0 && rho < 1.0) {
                    return bad(format!("rho must lie in (-1, 1), got {rho}"));
                }
                let d = self.base_dim() as f64;
                if rho <= -1.0 / (d - 1.0) {
                    return bad(format!("constant correlation {rho} is not positive definite for d = {d}"));
                }
            }
            Example::CoxMisspec { beta_extra } if !beta_extra.is_finite() => {
                return bad("beta_extra must be finite".into());
            }
            _ => {}
        }
        if let Example::Logistic2 { d, .. } = self.example {
            if d < 7 {
                return bad(format!("logistic example needs d >= 7, got {d}"));
            }
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.n < 10 {
            return bad(format!("n must be at least 10, got {}", self.n));
        }
        if self.mc_draws == 0 {
            return bad("mc_draws must be at least 1".into());
        }
        if self.grid_len == 0 {
            return bad("grid_len must be at least 1".into());
        }
        Ok(())
    }

    /// Independent stream for replicate `rep`, fixed by `(seed, rep)`.
    pub fn rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }

    /// Number of correlated normal covariates drawn per row.
    pub fn base_dim(&self) -> usize {
        match self.example {
            Example::Linear1 { .. } => 9,
            Example::Logistic2 { d, .. } => d,
            Example::Cox3 | Example::CoxMisspec { .. } => 8,
        }
    }

    /// Covariance of the base covariates.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.base_dim();
        match self.example {
            Example::Linear1 { rho } | Example::Logistic2 { rho, .. } => {
                DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
            }
            Example::Cox3 | Example::CoxMisspec { .. } => {
                DMatrix::from_fn(d, d, |i, j| COX_RHO.powi((i as i32 - j as i32).abs()))
            }
        }
    }

    /// Coefficients of the data-generating model over all truth features.
    pub fn true_beta(&self) -> DVector<f64> {
        match self.example {
            Example::Linear1 { .. } => DVector::from_column_slice(&LINEAR1_BETA),
            Example::Logistic2 { d, .. } => {
                let mut b = DVector::zeros(d);
                for (j, v) in LOGISTIC2_NONZERO {
                    b[j] = v;
                }
                b
            }
            Example::Cox3 => DVector::from_column_slice(&COX_BETA),
            Example::CoxMisspec { beta_extra } => {
                let mut b = DVector::zeros(10);
                b.rows_mut(0, 8).copy_from_slice(&COX_BETA);
                b[8] = beta_extra;
                b[9] = beta_extra;
                b
            }
        }
    }

    pub fn truth_dim(&self) -> usize {
        match self.example {
            Example::CoxMisspec { .. } => 10,
            _ => self.base_dim(),
        }
    }

    /// Truth features visible to every method except the oracle.
    pub fn fit_columns(&self) -> Vec<usize> {
        (0..self.base_dim()).collect()
    }

    /// Truth features the oracle fits.
    pub fn oracle_columns(&self) -> Vec<usize> {
        match self.example {
            Example::CoxMisspec { .. } => COX_MISSPEC_ORACLE.to_vec(),
            _ => {
                let b = self.true_beta();
                (0..b.len()).filter(|&j| b[j] != 0.0).collect()
            }
        }
    }

    /// `rho` for the correlation examples, `n` for the Cox examples.
    pub fn rho_or_n(&self) -> f64 {
        match self.example {
            Example::Linear1 { rho } | Example::Logistic2 { rho, .. } => rho,
            Example::Cox3 | Example::CoxMisspec { .. } => self.n as f64,
        }
    }

    pub fn generate(&self, rng: &mut ChaCha8Rng) -> Result<SimData> {
        match self.example {
            Example::Linear1 { .. } => gen_linear(self, rng),
            Example::Logistic2 { .. } => gen_logistic(self, rng),
            Example::Cox3 => gen_cox(self, rng),
            Example::CoxMisspec { .. } => gen_cox_misspecified(self, rng),
        }
    }
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct SimData {
    /// All truth features (equal to `fit_view` except in the misspecified design).
    pub truth: Dataset,
    pub fit_view: Dataset,
    pub true_beta: DVector<f64>,
}

fn names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn lower_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Config("covariate covariance is not positive definite".into()))
}

/// `n` rows of correlated standard normal covariates.
pub fn draw_covariates(spec: &GeneratorSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let l = lower_factor(&spec.covariance())?;
    let d = spec.base_dim();
    let z = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((l * z).transpose())
}

/// Appends the standardized squares of the first two columns.
pub fn misspecified_features(base: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = base.shape();
    let mut out = DMatrix::zeros(n, d + 2);
    out.columns_mut(0, d).copy_from(base);
    for i in 0..n {
        out[(i, d)] = (base[(i, 0)].powi(2) - 1.0) / 2f64.sqrt();
        out[(i, d + 1)] = (base[(i, 1)].powi(2) - 1.0) / 2f64.sqrt();
    }
    out
}

pub fn gen_linear(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<SimData> {
    gen_linear_with_sigma(spec, LINEAR1_SIGMA, rng)
}

pub fn gen_linear_with_sigma(spec: &GeneratorSpec, sigma: f64, rng: &mut ChaCha8Rng) -> Result<SimData> {
    let x = draw_covariates(spec, spec.n, rng)?;
    let beta = spec.true_beta();
    let mean = &x * &beta;
    let y = mean.map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal));
    let data = Dataset::new(x, y, names(beta.len()))?;
    Ok(SimData {
        truth: data.clone(),
        fit_view: data,
        true_beta: beta,
    })
}

pub fn gen_logistic(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<SimData> {
    let x = draw_covariates(spec, spec.n, rng)?;
    let beta = spec.true_beta();
    let eta = &x * &beta;
    let y = eta.map(|e| if rng.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 });
    let data = Dataset::new(x, y, names(beta.len()))?;
    Ok(SimData {
        truth: data.clone(),
        fit_view: data,
        true_beta: beta,
    })
}

/// Survival times with hazard `exp(eta)`; if `censoring_u` is given, censoring
/// times are exponential with mean `u * exp(eta)`.
pub fn survival_response(eta: &DVector<f64>, censoring_u: Option<f64>, rng: &mut ChaCha8Rng) -> (DVector<f64>, Vec<bool>) {
    let n = eta.len();
    let mut times = DVector::zeros(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let e: f64 = rng.sample(Exp::new(1.0).expect("unit rate"));
        let t = e * (-eta[i]).exp();
        match censoring_u {
            Some(u) => {
                let e2: f64 = rng.sample(Exp::new(1.0).expect("unit rate"));
                let c = e2 * u * eta[i].exp();
                times[i] = t.min(c);
                status.push(t <= c);
            }
            None => {
                times[i] = t;
                status.push(true);
            }
        }
    }
    (times, status)
}

fn cox_data(spec: &GeneratorSpec, truth_x: DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<(Dataset, DVector<f64>)> {
    let beta = spec.true_beta();
    let u = rng.random_range(COX_U_LOW..COX_U_HIGH);
    let eta = &truth_x * &beta;
    let (times, status) = survival_response(&eta, Some(u), rng);
    let d = truth_x.ncols();
    Ok((Dataset::survival(truth_x, times, status, names(d))?, beta))
}

pub fn gen_cox(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<SimData> {
    let x = draw_covariates(spec, spec.n, rng)?;
    let (data, beta) = cox_data(spec, x, rng)?;
    Ok(SimData {
        truth: data.clone(),
        fit_view: data,
        true_beta: beta,
    })
}

pub fn gen_cox_misspecified(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<SimData> {
    let base = draw_covariates(spec, spec.n, rng)?;
    let x = misspecified_features(&base);
    let (truth, beta) = cox_data(spec, x, rng)?;
    let fit_view = truth.select_columns(&spec.fit_columns());
    Ok(SimData {
        truth,
        fit_view,
        true_beta: beta,
    })
}

/// Mean function used by the model error. For Cox it is the mean survival
/// time `exp(-eta)` under the unit baseline hazard of the generators.
pub fn mean_function(family: Family, eta: f64) -> f64 {
    match family {
        Family::Linear => eta,
        Family::Logistic => sigmoid(eta),
        Family::Poisson => eta.exp(),
        Family::Cox => (-eta).exp(),
    }
}

/// `(b - beta)' Sigma (b - beta)`: the exact linear-model error for
/// mean-zero covariates with covariance `sigma`.
pub fn linear_model_error(sigma: &DMatrix<f64>, beta_hat: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let diff = beta_hat - beta;
    (diff.transpose() * sigma * &diff)[(0, 0)]
}

/// Monte Carlo estimate of `E{mu(x' b) - mu(x' beta)}^2` for each `b`, all
/// evaluated on the same `draws` fresh covariate rows.
pub fn mc_model_error(
    spec: &GeneratorSpec,
    beta_hats: &[&DVector<f64>],
    beta: &DVector<f64>,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let family = spec.example.family();
    let l = lower_factor(&spec.covariance())?;
    let d = spec.base_dim();
    let misspec = matches!(spec.example, Example::CoxMisspec { .. });
    let mut sums = vec![0.0; beta_hats.len()];
    let mut z = DVector::zeros(d);
    let mut x = DVector::zeros(spec.truth_dim());
    for _ in 0..draws {
        for v in z.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        let base = &l * &z;
        x.rows_mut(0, d).copy_from(&base);
        if misspec {
            x[d] = (base[0] * base[0] - 1.0) / 2f64.sqrt();
            x[d + 1] = (base[1] * base[1] - 1.0) / 2f64.sqrt();
        }
        let truth = mean_function(family, x.dot(beta));
        for (s, b) in sums.iter_mut().zip(beta_hats) {
            let diff = mean_function(family, x.dot(b)) - truth;
            *s += diff * diff;
        }
    }
    Ok(sums.into_iter().map(|s| s / draws as f64).collect())
}

/// Model error for each coefficient vector (all over the truth features).
pub fn model_error(
    spec: &GeneratorSpec,
    beta_hats: &[&DVector<f64>],
    beta: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if spec.example.family() == Family::Linear {
        let sigma = spec.covariance();
        return Ok(beta_hats.iter().map(|b| linear_model_error(&sigma, b, beta)).collect());
    }
    mc_model_error(spec, beta_hats, beta, spec.mc_draws, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    New,
    Lqa,
    Aic,
    Bic,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::New, Method::Lqa, Method::Aic, Method::Bic, Method::Oracle];

    pub fn name(&self) -> &'static str {
        match self {
            Method::New => "New",
            Method::Lqa => "LQA",
            Method::Aic => "AIC",
            Method::Bic => "BIC",
            Method::Oracle => "Oracle",
        }
    }
}

/// What one method produced on one replicate.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    /// Estimate over the truth features.
    pub beta: DVector<f64>,
    pub model_error: f64,
    pub se_b1: Option<f64>,
    pub secs: f64,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub full_model_error: Option<f64>,
    /// Indexed like [`Method::ALL`]; `None` marks a failed replicate.
    pub methods: Vec<Option<MethodOutcome>>,
    pub censoring_fraction: Option<f64>,
}

fn embed(b: &DVector<f64>, cols: &[usize], dim: usize) -> DVector<f64> {
    let mut out = DVector::zeros(dim);
    for (k, &j) in cols.iter().enumerate() {
        out[j] = b[k];
    }
    out
}

struct Fitted {
    fit: FitResult,
    model_cols: Vec<usize>,
    oracle: bool,
    secs: f64,
    lambda: Option<f64>,
}

fn run_method(method: Method, spec: &GeneratorSpec, model: &LikelihoodModel, truth_model: &LikelihoodModel, grid: &[f64]) -> Result<Fitted> {
    let config = FitConfig::default();
    let cols = spec.fit_columns();
    let started = Instant::now();
    let (fit, lambda, oracle) = match method {
        Method::New | Method::Lqa => {
            let cfg = if method == Method::Lqa { FitConfig::lqa() } else { config };
            let (curve, fit) = gcv_select(model, PenaltyKind::Scad { a: SCAD_A }, grid, &cfg)?;
            (fit, Some(curve.chosen_lambda()), false)
        }
        Method::Aic | Method::Bic => {
            let criterion = if method == Method::Aic { Criterion::Aic } else { Criterion::Bic };
            let res = best_subset_with(model, criterion, &config)?;
            (oracle_fit_with(model, &res.best_subset, &config)?, None, false)
        }
        Method::Oracle => {
            let oc = spec.oracle_columns();
            let sub = truth_model.select_columns(&oc);
            let support = vec![true; oc.len()];
            (oracle_fit_with(&sub, &support, &config)?, None, true)
        }
    };
    let secs = started.elapsed().as_secs_f64();
    if !fit.converged() {
        return Err(Error::NotStationary {
            grad_max: fit.trace.last().map_or(f64::NAN, |r| r.grad_max),
            tau: fit.config.tau,
        });
    }
    Ok(Fitted {
        fit,
        model_cols: if oracle { spec.oracle_columns() } else { cols },
        oracle,
        secs,
        lambda,
    })
}

/// Generates replicate `rep`, fits the full model and every method, and
/// evaluates model errors on a shared Monte Carlo sample.
pub fn run_replicate(spec: &GeneratorSpec, rep: usize) -> Result<ReplicateOutcome> {
    let mut rng = spec.rng(rep);
    let data = spec.generate(&mut rng)?;
    let family = spec.example.family();
    let model = LikelihoodModel::new(family, data.fit_view.clone())?;
    let truth_model = LikelihoodModel::new(family, data.truth.clone())?;
    let grid = default_lambda_grid(spec.n, spec.grid_len);
    let dim = spec.truth_dim();

    let full = solver::mle(&model, &FitConfig::default())
        .ok()
        .filter(|f| f.converged())
        .map(|f| embed(&f.beta_hat, &spec.fit_columns(), dim));

    let fitted: Vec<Option<Fitted>> = Method::ALL
        .iter()
        .map(|&m| run_method(m, spec, &model, &truth_model, &grid).ok())
        .collect();

    let mut betas: Vec<DVector<f64>> = Vec::new();
    if let Some(f) = &full {
        betas.push(f.clone());
    }
    for f in fitted.iter().flatten() {
        betas.push(embed(&f.fit.beta_hat, &f.model_cols, dim));
    }
    let refs: Vec<&DVector<f64>> = betas.iter().collect();
    let errors = model_error(spec, &refs, &data.true_beta, &mut rng)?;
    let mut errors = errors.into_iter();
    let full_model_error = full.as_ref().and_then(|_| errors.next());

    let methods = fitted
        .into_iter()
        .map(|f| {
            let f = f?;
            let me = errors.next()?;
            let beta = embed(&f.fit.beta_hat, &f.model_cols, dim);
            let se_model = if f.oracle {
                truth_model.select_columns(&f.model_cols)
            } else {
                model.clone()
            };
            let se_b1 = f
                .model_cols
                .iter()
                .position(|&j| j == 0)
                .and_then(|k| {
                    let report = sandwich_cov(&se_model, &f.fit.penalty, &f.fit).ok()?;
                    report.available[k].then_some(report.se[k])
                });
            Some(MethodOutcome {
                beta,
                model_error: me,
                se_b1,
                secs: f.secs,
                lambda: f.lambda,
            })
        })
        .collect();

    let censoring_fraction = data
        .truth
        .status()
        .map(|s| s.iter().filter(|&&d| !d).count() as f64 / s.len() as f64);
    Ok(ReplicateOutcome {
        replicate: rep,
        full_model_error,
        methods,
        censoring_fraction,
    })
}

/// Runs every replicate on a pool of `threads` workers; results are ordered by replicate.
pub fn run_experiment(spec: &GeneratorSpec, threads: usize) -> Result<Vec<ReplicateOutcome>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<ReplicateOutcome>> =
        pool.install(|| (0..spec.replicates).into_par_iter().map(|r| run_replicate(spec, r)).collect());
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub rho_or_n: f64,
    pub rme_median: f64,
    /// Mean number of true zeros estimated as zero.
    pub c: f64,
    /// Mean number of true nonzeros estimated as zero.
    pub i: f64,
    pub sd_b1: f64,
    pub se_b1: f64,
    pub stdse_b1: f64,
    /// Median wall-clock seconds of the method's full procedure per replicate.
    pub secs_per_fit: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub spec: GeneratorSpec,
    pub rows: Vec<MethodRow>,
    pub baseline_failures: usize,
    pub mean_censoring: Option<f64>,
}

impl ExperimentReport {
    pub fn row(&self, method: Method) -> &MethodRow {
        self.rows.iter().find(|r| r.method == method).expect("every method has a row")
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `len - 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Aggregates replicate outcomes into one row per method. Zero counts run over
/// the columns every non-oracle method sees.
pub fn summarize(spec: &GeneratorSpec, outcomes: &[ReplicateOutcome]) -> ExperimentReport {
    let truth = spec.true_beta();
    let cols = spec.fit_columns();
    let rows = Method::ALL
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let done: Vec<(&ReplicateOutcome, &MethodOutcome)> = outcomes
                .iter()
                .filter_map(|o| o.methods[k].as_ref().map(|m| (o, m)))
                .collect();
            let rme: Vec<f64> = done
                .iter()
                .filter_map(|(o, m)| o.full_model_error.map(|full| m.model_error / full))
                .collect();
            let zero_counts = |want_zero_truth: bool| -> Vec<f64> {
                done.iter()
                    .map(|(_, m)| {
                        cols.iter()
                            .filter(|&&j| (truth[j] == 0.0) == want_zero_truth && m.beta[j] == 0.0)
                            .count() as f64
                    })
                    .collect()
            };
            let b1: Vec<f64> = done.iter().map(|(_, m)| m.beta[0]).collect();
            let se: Vec<f64> = done.iter().filter_map(|(_, m)| m.se_b1).collect();
            let secs: Vec<f64> = done.iter().map(|(_, m)| m.secs).collect();
            MethodRow {
                method,
                rho_or_n: spec.rho_or_n(),
                rme_median: median(&rme),
                c: mean(&zero_counts(true)),
                i: mean(&zero_counts(false)),
                sd_b1: std_dev(&b1),
                se_b1: mean(&se),
                stdse_b1: std_dev(&se),
                secs_per_fit: median(&secs),
                successes: done.len(),
                failures: outcomes.len() - done.len(),
            }
        })
        .collect();
    let censoring: Vec<f64> = outcomes.iter().filter_map(|o| o.censoring_fraction).collect();
    ExperimentReport {
        spec: spec.clone(),
        rows,
        baseline_failures: outcomes.iter().filter(|o| o.full_model_error.is_none()).count(),
        mean_censoring: (!censoring.is_empty()).then(|| mean(&censoring)),
    }
}

pub const REPORT_HEADER: [&str; 9] = [
    "method", "rho_or_n", "rme_median", "C", "I", "sd_b1", "se_b1", "stdse_b1", "secs_per_fit",
];

pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                tsv::fmt_f64(r.rho_or_n),
                tsv::fmt_f64(r.rme_median),
                tsv::fmt_f64(r.c),
                tsv::fmt_f64(r.i),
                tsv::fmt_f64(r.sd_b1),
                tsv::fmt_f64(r.se_b1),
                tsv::fmt_f64(r.stdse_b1),
                tsv::fmt_f64(r.secs_per_fit),
            ]
        })
        .collect();
    tsv::write_table(path, &REPORT_HEADER, &rows)
}

/// Generator settings and every fixed constant behind a report.
pub fn sidecar_text(report: &ExperimentReport) -> String {
    let s = &report.spec;
    let mut out = String::new();
    let _ = writeln!(out, "example\t{:?}", s.example);
    let _ = writeln!(out, "n\t{}", s.n);
    let _ = writeln!(out, "seed\t{}", s.seed);
    let _ = writeln!(out, "replicates\t{}", s.replicates);
    let _ = writeln!(out, "mc_draws\t{}", s.mc_draws);
    let _ = writeln!(out, "grid_len\t{}", s.grid_len);
    let grid = default_lambda_grid(s.n, s.grid_len);
    let _ = writeln!(out, "lambda_grid\t{}..{} log-spaced", tsv::fmt_f64(grid[0]), tsv::fmt_f64(grid[grid.len() - 1]));
    let _ = writeln!(out, "scad_a\t{SCAD_A}");
    let _ = writeln!(out, "true_beta\t{}", join(s.true_beta().iter()));
    let _ = writeln!(out, "fit_columns\t{:?}", s.fit_columns());
    let _ = writeln!(out, "oracle_columns\t{:?}", s.oracle_columns());
    let _ = writeln!(out, "rme_baseline\tfull-model unpenalized MLE, per replicate");
    let _ = writeln!(out, "model_error\t{}", if s.example.family() == Family::Linear {
        "closed form (b-beta)' Sigma (b-beta)".to_string()
    } else {
        format!("Monte Carlo, {} draws", s.mc_draws)
    });
    if let Example::Linear1 { .. } = s.example {
        let _ = writeln!(out, "assumed_linear_constants\tn={LINEAR1_N} sigma={LINEAR1_SIGMA} beta={}", join(LINEAR1_BETA.iter()));
    }
    if s.example.family() == Family::Cox {
        let _ = writeln!(out, "cox_censoring\texponential, mean U*exp(x'beta), U~Uniform[{COX_U_LOW},{COX_U_HIGH}] per dataset");
    }
    let fc = FitConfig::default();
    let _ = writeln!(out, "tau\t{}", fc.tau);
    let _ = writeln!(out, "max_iter\t{}", fc.max_iter);
    let _ = writeln!(out, "max_halvings\t{}", fc.max_halvings);
    let _ = writeln!(out, "lqa_drop_below\t{}", FitConfig::LQA_DROP_BELOW);
    let _ = writeln!(out, "baseline_failures\t{}", report.baseline_failures);
    if let Some(c) = report.mean_censoring {
        let _ = writeln!(out, "mean_censoring_fraction\t{}", tsv::fmt_f64(c));
    }
    for r in &report.rows {
        let _ = writeln!(out, "failures_{}\t{}", r.method.name(), r.failures);
    }
    out
}

fn join<'a>(v: impl Iterator<Item = &'a f64>) -> String {
    v.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_sidecar(report: &ExperimentReport, path: &Path) -> Result<()> {
    std::fs::write(path, sidecar_text(report)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub d: usize,
    /// Median seconds of one exhaustive BIC search.
    pub subset_secs: f64,
    /// Median seconds of one SCAD fit, including its MLE start.
    pub mm_secs: f64,
}

/// Single fits are fast, so each timing sample averages this many of them.
const MM_BATCH: usize = 20;

/// Times best-subset BIC against a single SCAD fit on logistic-example data
/// of growing dimension. Each of `replicates` datasets is drawn once at the
/// largest dimension and every smaller `d` uses its leading columns, so the
/// sizes differ only in the added noise covariates. Reported times are
/// medians over the replicate datasets.
pub fn timing_study(dims: &[usize], n: usize, rho: f64, lambda: f64, seed: u64, replicates: usize) -> Result<Vec<TimingRow>> {
    let config = FitConfig::default();
    let spec_pen = crate::penalty::PenaltySpec::scad(lambda, SCAD_A)?;
    let d_max = dims.iter().copied().max().unwrap_or(LOGISTIC2_D);
    for &d in dims {
        GeneratorSpec::new(Example::Logistic2 { rho, d }).with_n(n).validate()?;
    }
    let spec = GeneratorSpec::new(Example::Logistic2 { rho, d: d_max }).with_n(n).with_seed(seed);
    let mut subset = vec![Vec::new(); dims.len()];
    let mut mm = vec![Vec::new(); dims.len()];
    for rep in 0..replicates.max(1) {
        let full = spec.generate(&mut spec.rng(rep))?.fit_view;
        for (k, &d) in dims.iter().enumerate() {
            let cols: Vec<usize> = (0..d).collect();
            let model = LikelihoodModel::new(Family::Logistic, full.select_columns(&cols))?;
            let t = Instant::now();
            best_subset_with(&model, Criterion::Bic, &config)?;
            subset[k].push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            for _ in 0..MM_BATCH {
                solver::fit(&model, &spec_pen, None, &config)?;
            }
            mm[k].push(t.elapsed().as_secs_f64() / MM_BATCH as f64);
        }
    }
    Ok(dims
        .iter()
        .enumerate()
        .map(|(k, &d)| TimingRow {
            d,
            subset_secs: median(&subset[k]),
            mm_secs: median(&mm[k]),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_corr(x: &DMatrix<f64>, a: usize, b: usize) -> f64 {
        let n = x.nrows() as f64;
        let (ca, cb) = (x.column(a), x.column(b));
        let (ma, mb) = (ca.sum() / n, cb.sum() / n);
        let cov = ca.iter().zip(cb.iter()).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>();
        let va = ca.iter().map(|u| (u - ma).powi(2)).sum::<f64>();
        let vb = cb.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn identical_seed_gives_identical_data() {
        let spec = GeneratorSpec::new(Example::Logistic2 { rho: 0.25, d: 9 }).with_seed(9);
        let a = spec.generate(&mut spec.rng(3)).unwrap();
        let b = spec.generate(&mut spec.rng(3)).unwrap();
        assert_eq!(a.truth, b.truth);
        let c = spec.generate(&mut spec.rng(4)).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn constant_correlation_generator() {
        for rho in [0.25, 0.75] {
            let spec = GeneratorSpec::new(Example::Logistic2 { rho, d: 9 }).with_n(10_000).with_seed(1);
            let x = draw_covariates(&spec, 10_000, &mut spec.rng(0)).unwrap();
            assert!((sample_corr(&x, 0, 1) - rho).abs() < 0.03);
        }
        let spec = GeneratorSpec::new(Example::Linear1 { rho: 0.0 }).with_seed(2);
        let x = draw_covariates(&spec, 10_000, &mut spec.rng(0)).unwrap();
        let cov = x.tr_mul(&x) / 10_000.0;
        assert!((cov - DMatrix::identity(9, 9)).amax() < 0.05);
    }

    #[test]
    fn ar_generator_and_zero_counts() {
        let spec = GeneratorSpec::new(Example::Cox3).with_seed(3);
        let x = draw_covariates(&spec, 10_000, &mut spec.rng(0)).unwrap();
        assert!((sample_corr(&x, 0, 1) - 0.5).abs() < 0.03);
        assert!((sample_corr(&x, 0, 2) - 0.25).abs() < 0.03);
        let zeros = |s: GeneratorSpec| s.true_beta().iter().filter(|&&b| b == 0.0).count();
        assert_eq!(zeros(GeneratorSpec::new(Example::Logistic2 { rho: 0.25, d: 9 })), 6);
        assert_eq!(zeros(GeneratorSpec::new(Example::Linear1 { rho: 0.5 })), 6);
        assert_eq!(zeros(spec), 5);
    }

    #[test]
    fn noiseless_linear_recovers_beta() {
        let spec = GeneratorSpec::new(Example::Linear1 { rho: 0.5 }).with_seed(4);
        let data = gen_linear_with_sigma(&spec, 0.0, &mut spec.rng(0)).unwrap();
        let x = data.fit_view.design();
        let b = x.tr_mul(x).cholesky().unwrap().solve(&x.tr_mul(data.fit_view.response()));
        assert!((b - spec.true_beta()).amax() < 1e-12);
    }

    #[test]
    fn uncensored_limit_has_all_failures() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, status) = survival_response(&DVector::zeros(50), None, &mut rng);
        assert!(status.iter().all(|&s| s));
    }

    #[test]
    fn misspecified_views_share_columns() {
        let spec = GeneratorSpec::new(Example::CoxMisspec { beta_extra: 0.2 }).with_seed(6);
        let data = spec.generate(&mut spec.rng(0)).unwrap();
        assert_eq!(data.truth.d(), 10);
        assert_eq!(data.fit_view.d(), 8);
        assert_eq!(data.truth.design().columns(0, 8), data.fit_view.design().columns(0, 8));
        let big = GeneratorSpec::new(Example::CoxMisspec { beta_extra: 0.2 }).with_seed(7);
        let x = misspecified_features(&draw_covariates(&big, 20_000, &mut big.rng(0)).unwrap());
        let col = x.column(8);
        let m = col.sum() / 20_000.0;
        let v = col.iter().map(|u| (u - m).powi(2)).sum::<f64>() / 20_000.0;
        assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.1, "{m} {v}");
    }

    #[test]
    fn zero_extra_coefficient_matches_plain_cox_truth() {
        let a = GeneratorSpec::new(Example::CoxMisspec { beta_extra: 0.0 }).with_seed(8);
        let b = GeneratorSpec::new(Example::Cox3).with_seed(8);
        let da = a.generate(&mut a.rng(0)).unwrap();
        let db = b.generate(&mut b.rng(0)).unwrap();
        // Same draws, same linear predictor, so the survival data coincide.
        assert_eq!(da.fit_view.response(), db.fit_view.response());
        assert_eq!(da.fit_view.status(), db.fit_view.status());
    }

    #[test]
    fn linear_closed_form_matches_monte_carlo() {
        let spec = GeneratorSpec::new(Example::Linear1 { rho: 0.5 });
        let beta = spec.true_beta();
        let mut hat = beta.clone();
        hat[0] += 0.3;
        hat[2] -= 0.2;
        let exact = linear_model_error(&spec.covariance(), &hat, &beta);
        let mc = mc_model_error(&spec, &[&hat], &beta, 50_000, &mut spec.rng(0)).unwrap()[0];
        assert!((mc / exact - 1.0).abs() < 0.02, "{mc} vs {exact}");
        assert_eq!(linear_model_error(&spec.covariance(), &beta, &beta), 0.0);
    }

    #[test]
    fn self_ratio_gives_unit_rme() {
        let spec = GeneratorSpec::new(Example::Linear1 { rho: 0.5 });
        let outcomes: Vec<ReplicateOutcome> = (0..5)
            .map(|r| {
                let m = MethodOutcome {
                    beta: spec.true_beta(),
                    model_error: 0.1 * (r + 1) as f64,
                    se_b1: Some(0.1),
                    secs: 0.0,
                    lambda: None,
                };
                ReplicateOutcome {
                    replicate: r,
                    full_model_error: Some(0.1 * (r + 1) as f64),
                    methods: vec![Some(m); 5],
                    censoring_fraction: None,
                }
            })
            .collect();
        let rep = summarize(&spec, &outcomes);
        for r in &rep.rows {
            assert_eq!(r.rme_median, 1.0);
            assert_eq!(r.c, 6.0);
            assert_eq!(r.i, 0.0);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(GeneratorSpec::new(Example::Linear1 { rho: 1.0 }).validate().is_err());
        assert!(GeneratorSpec::new(Example::Linear1 { rho: -0.2 }).validate().is_err());
        assert!(GeneratorSpec::new(Example::Cox3).with_replicates(0).validate().is_err());
        assert!(GeneratorSpec::new(Example::Cox3).validate().is_ok());
    }
}
