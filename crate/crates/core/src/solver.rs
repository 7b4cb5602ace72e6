//! MM–Newton maximization of the perturbed penalized likelihood
//! `Q_eps(beta) = loglik(beta) - n * sum_j p_eps(|beta_j|)`.
//!
//! Each iteration builds the quadratic minorizer `S_k` at the current iterate
//! (the log-likelihood minus `n` times the coordinate-wise majorizers of the
//! penalty), takes a Newton step on it and halves the step until `S_k`
//! increases. The linear family has a closed-form maximizer of `S_k`
//! (iterative ridge regression).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::{CurvatureKind, Family, LikelihoodModel};
use crate::linalg::{self, Cholesky};
use crate::penalty::{epsilon_rule, PenaltySpec};

/// Relative size of rounding noise tolerated when comparing objective values.
const NOISE_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Perturbed MM: epsilon set from the start (reduced only if the zero rule
    /// would otherwise delete a clearly nonzero coordinate); no coordinate is
    /// ever deleted during iteration.
    Perturbed,
    /// Unperturbed local quadratic approximation: epsilon = 0 and a coordinate
    /// is removed for good once `|beta_j| < drop_below`.
    Lqa { drop_below: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub tau: f64,
    pub max_iter: usize,
    pub curvature: CurvatureKind,
    pub max_halvings: u32,
    pub epsilon_override: Option<f64>,
    pub algorithm: Algorithm,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tau: 1e-8,
            max_iter: 500,
            curvature: CurvatureKind::ObservedHessian,
            max_halvings: 30,
            epsilon_override: None,
            algorithm: Algorithm::Perturbed,
        }
    }
}

impl FitConfig {
    /// Default drop threshold for the unperturbed variant.
    pub const LQA_DROP_BELOW: f64 = 1e-6;

    pub fn lqa() -> Self {
        FitConfig {
            algorithm: Algorithm::Lqa {
                drop_below: Self::LQA_DROP_BELOW,
            },
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.max_iter == 0 || self.max_halvings == 0 {
            return Err(Error::Config("max_iter and max_halvings must be positive".into()));
        }
        if let Some(e) = self.epsilon_override {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("epsilon override must be nonnegative, got {e}")));
            }
        }
        if let Algorithm::Lqa { drop_below } = self.algorithm {
            if !(drop_below > 0.0) {
                return Err(Error::Config("LQA drop threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIter,
    LineSearchFailed,
}

impl FitStatus {
    pub fn name(&self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::MaxIter => "max_iter",
            FitStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub q_eps: f64,
    /// Step size that produced this iterate (0 for the starting point).
    pub alpha: f64,
    pub grad_max: f64,
    /// Perturbation in force when `q_eps` was evaluated.
    pub epsilon: f64,
    pub beta: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Estimate after the zero rule.
    pub beta_hat: DVector<f64>,
    pub active: Vec<bool>,
    /// Final iterate before the zero rule.
    pub beta_eps: DVector<f64>,
    /// Penalty including the epsilon actually used.
    pub penalty: PenaltySpec,
    pub epsilon: f64,
    pub epsilon_degenerate: bool,
    /// Times epsilon was reduced after convergence; see [`refined_epsilon`].
    pub epsilon_refinements: usize,
    pub iterations: usize,
    pub trace: Vec<IterRecord>,
    pub status: FitStatus,
    /// `|dQ/d beta_j|` at exit, with `p'` taken at the fitted `|beta_j|`.
    pub zero_rule_gradients: DVector<f64>,
    pub start: DVector<f64>,
    pub config: FitConfig,
    /// Newton systems that needed the diagonal shift fallback.
    pub shift_fallbacks: usize,
    /// Accepted steps where `Q_eps` dropped by more than rounding noise.
    pub ascent_violations: usize,
    /// The surviving submodel is not refit after the zero rule.
    pub refit: bool,
}

impl FitResult {
    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    /// Largest drop of `Q_eps` between consecutive trace entries, relative to
    /// scale. Entries on either side of an epsilon refinement are not compared.
    pub fn worst_ascent_gap(&self) -> f64 {
        self.trace
            .windows(2)
            .filter(|w| w[0].epsilon == w[1].epsilon)
            .map(|w| (w[0].q_eps - w[1].q_eps) / w[0].q_eps.abs().max(1.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn q_eps(model: &LikelihoodModel, spec: &PenaltySpec, beta: &DVector<f64>) -> Result<f64> {
    let n = model.n() as f64;
    let penalty: f64 = beta.iter().map(|&b| spec.perturbed_value(b)).sum();
    Ok(model.loglik(beta)? - n * penalty)
}

/// Gradient of `Q_eps`.
pub fn q_eps_gradient(model: &LikelihoodModel, spec: &PenaltySpec, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let n = model.n() as f64;
    let mut g = model.score(beta)?;
    for j in 0..g.len() {
        let b = beta[j];
        if b != 0.0 {
            g[j] -= n * spec.perturbed_derivative(b) * b.signum();
        }
    }
    Ok(g)
}

/// Gradient of the unperturbed objective, `p'(|beta_j|+) sgn(beta_j)` for the penalty.
pub fn q_gradient(model: &LikelihoodModel, spec: &PenaltySpec, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let n = model.n() as f64;
    let mut g = model.score(beta)?;
    for j in 0..g.len() {
        let b = beta[j];
        if b != 0.0 {
            g[j] -= n * spec.derivative_plus(b.abs()) * b.signum();
        }
    }
    Ok(g)
}

/// The minorizer `S_k` of `Q_eps` at `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    pub center: DVector<f64>,
    /// Diagonal of `E_k`: `p'(|beta_j|+) / (epsilon + |beta_j|)`.
    pub ek_diag: DVector<f64>,
    penalty_at_center: DVector<f64>,
}

pub fn surrogate(spec: &PenaltySpec, beta_k: &DVector<f64>) -> Result<SurrogateState> {
    let all: Vec<usize> = (0..beta_k.len()).collect();
    surrogate_on(spec, beta_k, &all)
}

fn surrogate_on(spec: &PenaltySpec, beta_k: &DVector<f64>, free: &[usize]) -> Result<SurrogateState> {
    let d = beta_k.len();
    let mut ek = DVector::zeros(d);
    let mut at_center = DVector::zeros(d);
    for &j in free {
        ek[j] = spec.curvature_weight(beta_k[j])?;
        at_center[j] = spec.perturbed_value(beta_k[j]);
    }
    Ok(SurrogateState {
        center: beta_k.clone(),
        ek_diag: ek,
        penalty_at_center: at_center,
    })
}

impl SurrogateState {
    /// `S_k(beta) = loglik(beta) - n * sum_j Phi_j(beta_j)`.
    pub fn value(&self, model: &LikelihoodModel, beta: &DVector<f64>) -> Result<f64> {
        let n = model.n() as f64;
        let mut penalty = 0.0;
        for j in 0..beta.len() {
            let c = self.center[j];
            penalty += self.penalty_at_center[j] + 0.5 * self.ek_diag[j] * (beta[j] - c) * (beta[j] + c);
        }
        Ok(model.loglik(beta)? - n * penalty)
    }

    pub fn gradient(&self, model: &LikelihoodModel, beta: &DVector<f64>) -> Result<DVector<f64>> {
        let n = model.n() as f64;
        Ok(model.score(beta)? - self.ek_diag.component_mul(beta) * n)
    }

    pub fn hessian(&self, model: &LikelihoodModel, beta: &DVector<f64>, kind: CurvatureKind) -> Result<DMatrix<f64>> {
        let n = model.n() as f64;
        let mut h = model.curvature(beta, kind)?;
        for j in 0..beta.len() {
            h[(j, j)] -= n * self.ek_diag[j];
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub beta: DVector<f64>,
    pub alpha: f64,
    pub halvings: u32,
    pub shifted: bool,
    pub status: StepStatus,
}

/// One MM iteration from `state.center`.
pub fn mm_step(
    model: &LikelihoodModel,
    spec: &PenaltySpec,
    state: &SurrogateState,
    config: &FitConfig,
) -> Result<StepOutcome> {
    let _ = spec;
    let all: Vec<usize> = (0..state.center.len()).collect();
    step_on(model, state, config, &all)
}

fn noise(value: f64) -> f64 {
    NOISE_RTOL * (1.0 + value.abs())
}

/// Newton direction on the free coordinates; other coordinates stay fixed.
fn newton_direction(
    model: &LikelihoodModel,
    state: &SurrogateState,
    kind: CurvatureKind,
    free: &[usize],
) -> Result<(DVector<f64>, bool)> {
    let beta = &state.center;
    let g = linalg::subvector(&state.gradient(model, beta)?, free);
    let h = linalg::submatrix(&state.hessian(model, beta, kind)?, free, free);
    let (delta, shifted) = linalg::solve_negative_definite(&h, &g)?;
    let mut full = DVector::zeros(beta.len());
    for (k, &j) in free.iter().enumerate() {
        full[j] = delta[k];
    }
    Ok((full, shifted))
}

/// Closed-form maximizer of `S_k` for the linear family: `(X'X + n E_k) b = X'y`.
fn ridge_solve(model: &LikelihoodModel, state: &SurrogateState, free: &[usize]) -> Result<(DVector<f64>, bool)> {
    let n = model.n() as f64;
    let x = model.data().design();
    let xf = DMatrix::from_fn(x.nrows(), free.len(), |i, k| x[(i, free[k])]);
    let mut lhs = xf.tr_mul(&xf);
    for (k, &j) in free.iter().enumerate() {
        lhs[(k, k)] += n * state.ek_diag[j];
    }
    let rhs = xf.tr_mul(model.data().response());
    let (sol, shifted) = linalg::solve_negative_definite(&(-lhs), &rhs)?;
    let mut full = DVector::zeros(state.center.len());
    for (k, &j) in free.iter().enumerate() {
        full[j] = sol[k];
    }
    Ok((full, shifted))
}

fn step_on(
    model: &LikelihoodModel,
    state: &SurrogateState,
    config: &FitConfig,
    free: &[usize],
) -> Result<StepOutcome> {
    let start = &state.center;
    let s0 = state.value(model, start)?;
    if model.family() == Family::Linear {
        let (beta, shifted) = ridge_solve(model, state, free)?;
        let s1 = state.value(model, &beta)?;
        let status = if s1 >= s0 - noise(s0) {
            StepStatus::Accepted
        } else {
            StepStatus::LineSearchFailed
        };
        return Ok(StepOutcome {
            beta,
            alpha: 1.0,
            halvings: 0,
            shifted,
            status,
        });
    }

    let (direction, shifted) = newton_direction(model, state, config.curvature, free)?;
    let mut alpha = 1.0;
    for halvings in 0..=config.max_halvings {
        let trial = start + &direction * alpha;
        if let Ok(s1) = state.value(model, &trial) {
            if s1 > s0 || (halvings == 0 && s1 >= s0 - noise(s0)) {
                return Ok(StepOutcome {
                    beta: trial,
                    alpha,
                    halvings,
                    shifted,
                    status: StepStatus::Accepted,
                });
            }
        }
        alpha *= 0.5;
    }
    Ok(StepOutcome {
        beta: start.clone(),
        alpha: 0.0,
        halvings: config.max_halvings,
        shifted,
        status: StepStatus::LineSearchFailed,
    })
}

/// The algorithm map with unit step, `M(beta) = beta - [Hess S_k]^{-1} grad Q_eps`.
pub fn mm_map(model: &LikelihoodModel, spec: &PenaltySpec, beta: &DVector<f64>, kind: CurvatureKind) -> Result<DVector<f64>> {
    let state = surrogate(spec, beta)?;
    let all: Vec<usize> = (0..beta.len()).collect();
    if model.family() == Family::Linear {
        return Ok(ridge_solve(model, &state, &all)?.0);
    }
    let (direction, _) = newton_direction(model, &state, kind, &all)?;
    Ok(beta + direction)
}

/// Errors unless the design has full column rank.
pub fn check_full_rank(model: &LikelihoodModel) -> Result<()> {
    let x = model.data().design();
    Cholesky::new(&x.tr_mul(x)).map(|_| ())
}

/// Unpenalized maximum likelihood estimate from the zero vector.
pub fn mle(model: &LikelihoodModel, config: &FitConfig) -> Result<FitResult> {
    let unpenalized = PenaltySpec::l1(0.0)?;
    let cfg = FitConfig {
        epsilon_override: Some(0.0),
        algorithm: Algorithm::Perturbed,
        ..*config
    };
    fit(model, &unpenalized, Some(&DVector::zeros(model.d())), &cfg)
}

/// Maximizes `Q_eps` for the penalty `spec` (its epsilon is ignored and
/// chosen from the starting value unless overridden).
///
/// The start defaults to the unpenalized MLE. Iteration stops once every
/// coordinate of the gradient of `Q_eps` is below `tau / 2`; coordinates whose
/// unperturbed gradient then exceeds `tau` are set to zero.
pub fn fit(
    model: &LikelihoodModel,
    spec: &PenaltySpec,
    beta0: Option<&DVector<f64>>,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_full_rank(model)?;
    let d = model.d();
    let n = model.n();
    let start = match beta0 {
        Some(b) => {
            if b.len() != d {
                return Err(Error::Config(format!("start has length {}, expected {d}", b.len())));
            }
            b.clone()
        }
        None => mle(model, config)?.beta_eps,
    };

    let (epsilon, degenerate) = match (config.algorithm, config.epsilon_override) {
        (Algorithm::Lqa { .. }, _) => (0.0, false),
        (Algorithm::Perturbed, Some(e)) => (e, false),
        (Algorithm::Perturbed, None) => {
            let choice = epsilon_rule(spec, start.as_slice(), config.tau, n);
            (choice.epsilon, choice.degenerate)
        }
    };
    let mut spec = spec.with_epsilon(epsilon)?;
    let refine = config.algorithm == Algorithm::Perturbed && config.epsilon_override.is_none() && !degenerate;
    let mut refinements = 0;

    let mut beta = start.clone();
    let mut free: Vec<usize> = (0..d).collect();
    let drop_below = match config.algorithm {
        Algorithm::Lqa { drop_below } => Some(drop_below),
        Algorithm::Perturbed => None,
    };
    if let Some(threshold) = drop_below {
        free.retain(|&j| beta[j].abs() >= threshold);
        for j in 0..d {
            if beta[j].abs() < threshold {
                beta[j] = 0.0;
            }
        }
    }

    let mut trace = Vec::new();
    let status;
    let mut shift_fallbacks = 0;
    let mut ascent_violations = 0;
    let mut alpha = 0.0;
    let mut dropped_last = false;
    let mut iteration = 0;
    loop {
        let q = q_eps(model, &spec, &beta)?;
        let grad = if drop_below.is_some() {
            q_gradient(model, &spec, &beta)?
        } else {
            q_eps_gradient(model, &spec, &beta)?
        };
        let grad_max = free.iter().map(|&j| grad[j].abs()).fold(0.0, f64::max);
        if let Some(prev) = trace.last().map(|r: &IterRecord| r.q_eps) {
            if !dropped_last && q < prev - noise(prev) {
                ascent_violations += 1;
            }
        }
        trace.push(IterRecord {
            iteration,
            q_eps: q,
            alpha,
            grad_max,
            epsilon: spec.epsilon(),
            beta: beta.clone(),
        });
        if grad_max < 0.5 * config.tau {
            if refine && refinements < MAX_EPSILON_REFINEMENTS {
                if let Some(smaller) = refined_epsilon(model, &spec, &beta, config.tau)? {
                    spec = spec.with_epsilon(smaller)?;
                    refinements += 1;
                    dropped_last = true;
                    trace.pop();
                    continue;
                }
            }
            status = FitStatus::Converged;
            break;
        }
        if iteration >= config.max_iter {
            status = FitStatus::MaxIter;
            break;
        }
        let state = surrogate_on(&spec, &beta, &free)?;
        let step = step_on(model, &state, config, &free)?;
        if step.shifted {
            shift_fallbacks += 1;
        }
        if step.status == StepStatus::LineSearchFailed {
            status = FitStatus::LineSearchFailed;
            break;
        }
        beta = step.beta;
        alpha = step.alpha;
        dropped_last = false;
        if let Some(threshold) = drop_below {
            let before = free.len();
            free.retain(|&j| beta[j].abs() >= threshold);
            for j in 0..d {
                if !free.contains(&j) {
                    beta[j] = 0.0;
                }
            }
            dropped_last = free.len() != before;
        }
        iteration += 1;
    }

    let beta_eps = beta.clone();
    let q_grad = q_gradient(model, &spec, &beta)?;
    let mut beta_hat = beta;
    let mut active = vec![true; d];
    for j in 0..d {
        let is_free = free.contains(&j);
        let zeroed = !is_free || beta_hat[j] == 0.0 || q_grad[j].abs() > config.tau;
        if zeroed {
            beta_hat[j] = 0.0;
            active[j] = false;
        }
    }

    Ok(FitResult {
        beta_hat,
        active,
        beta_eps,
        penalty: spec,
        epsilon: spec.epsilon(),
        epsilon_degenerate: degenerate,
        epsilon_refinements: refinements,
        iterations: iteration,
        trace,
        status,
        zero_rule_gradients: q_grad.abs(),
        start,
        config: *config,
        shift_fallbacks,
        ascent_violations,
        refit: false,
    })
}

/// Upper limit on post-convergence epsilon reductions in one fit.
pub const MAX_EPSILON_REFINEMENTS: usize = 4;

/// A coordinate more than this many epsilons from zero is not a perturbed zero.
pub const PERTURBED_ZERO_RATIO: f64 = 1e3;

/// Smaller epsilon to continue with, if the zero rule at `beta` would delete a
/// coordinate only because epsilon is too large for it.
///
/// At a stationary point of `Q_eps` a coordinate the penalty holds at zero
/// sits at `|b| = eps * r / (1 - r)` with `r < 1`, while the gap
/// `|dQ_eps - dQ| = n p'(|b|) eps / (eps + |b|)` exceeds `tau / 2` for a
/// genuinely nonzero coordinate whenever `|b|` falls below the start value
/// epsilon was sized from. Such a coordinate gets epsilon recomputed from its
/// own magnitude by the same rule.
pub fn refined_epsilon(model: &LikelihoodModel, spec: &PenaltySpec, beta: &DVector<f64>, tau: f64) -> Result<Option<f64>> {
    let eps = spec.epsilon();
    let slope = spec.derivative_at_zero();
    if eps == 0.0 || slope <= 0.0 {
        return Ok(None);
    }
    let q_grad = q_gradient(model, spec, beta)?;
    let q_eps_grad = q_eps_gradient(model, spec, beta)?;
    let smallest = (0..beta.len())
        .filter(|&j| {
            let b = beta[j].abs();
            q_grad[j].abs() > tau && (q_grad[j] - q_eps_grad[j]).abs() >= 0.5 * tau && b > PERTURBED_ZERO_RATIO * eps
        })
        .map(|j| beta[j].abs())
        .fold(f64::INFINITY, f64::min);
    if !smallest.is_finite() {
        return Ok(None);
    }
    let smaller = tau * smallest / (2.0 * model.n() as f64 * slope);
    Ok((smaller < eps).then_some(smaller))
}

/// Local convergence rate at a stationary point of `Q_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateDiagnostic {
    /// Eigenvalues of the derivative of the algorithm map, decreasing.
    pub eigenvalues: Vec<f64>,
    pub rho: f64,
}

/// Penalty curvature gap `a(t) = |t|/(eps+|t|) * (p''(|t|+) - p'(|t|+)/(eps+|t|))`.
pub fn rate_function(spec: &PenaltySpec, t: f64) -> f64 {
    let t = t.abs();
    let denom = spec.epsilon() + t;
    if t == 0.0 || denom == 0.0 {
        return 0.0;
    }
    t / denom * (spec.second_derivative_plus(t) - spec.derivative_plus(t) / denom)
}

/// Eigenvalues of `[Hess S]^{-1} (Hess S - Hess Q_eps)` at `beta_star`,
/// where `Hess S - Hess Q_eps = n * diag(a(beta_j))`.
pub fn rate_diagnostic(
    model: &LikelihoodModel,
    spec: &PenaltySpec,
    beta_star: &DVector<f64>,
    tau: f64,
) -> Result<RateDiagnostic> {
    let grad = q_eps_gradient(model, spec, beta_star)?;
    let grad_max = linalg::max_abs(&grad);
    if grad_max > tau {
        return Err(Error::NotStationary { grad_max, tau });
    }
    let n = model.n() as f64;
    let state = surrogate(spec, beta_star)?;
    let mut neg_hess_s = -state.hessian(model, beta_star, CurvatureKind::ObservedHessian)?;
    let d = beta_star.len();
    // Diagonal equilibration D B D leaves the eigenvalues of B^{-1} C unchanged
    // when C is scaled the same way, and keeps huge penalty weights from
    // tripping the pivot test.
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let m = neg_hess_s[(j, j)];
            if m > 0.0 && m.is_finite() { 1.0 / m.sqrt() } else { 1.0 }
        })
        .collect();
    for i in 0..d {
        for j in 0..d {
            neg_hess_s[(i, j)] *= scale[i] * scale[j];
        }
    }
    let chol = Cholesky::new(&neg_hess_s)?;
    // Symmetric similarity transform L^{-1} C L^{-T} with C = -n D A D.
    let mut c = DMatrix::zeros(d, d);
    for j in 0..d {
        c[(j, j)] = -n * rate_function(spec, beta_star[j]) * scale[j] * scale[j];
    }
    let mut tmp = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut col = c.column(j).into_owned();
        chol.forward(&mut col);
        tmp.set_column(j, &col);
    }
    let tmp_t = tmp.transpose();
    let mut sym = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut col = tmp_t.column(j).into_owned();
        chol.forward(&mut col);
        sym.set_column(j, &col);
    }
    let eigenvalues = linalg::symmetric_eigenvalues(&sym);
    let rho = eigenvalues.first().copied().unwrap_or(0.0);
    Ok(RateDiagnostic { eigenvalues, rho })
}
