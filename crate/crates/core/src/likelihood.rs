//! Log-likelihood families with exact score and curvature.
//!
//! The linear family uses unit dispersion, `-0.5 * ||y - X beta||^2`; the
//! maximizing coefficients do not depend on the error variance, which is
//! estimated afterwards from the residuals. Cox ties use the Breslow
//! convention: every failure in a tied group shares the full risk set.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Linear predictors are clamped to this magnitude when evaluating GLM means.
pub const ETA_CLAMP: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Linear,
    Logistic,
    Poisson,
    Cox,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
            Family::Cox => "cox",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "gaussian" => Some(Family::Linear),
            "logistic" | "binomial" => Some(Family::Logistic),
            "poisson" => Some(Family::Poisson),
            "cox" => Some(Family::Cox),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureKind {
    ObservedHessian,
    FisherInformation,
}

/// Design matrix, response and (for survival data) failure indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    design: DMatrix<f64>,
    response: DVector<f64>,
    status: Option<Vec<bool>>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>, column_names: Vec<String>) -> Result<Self> {
        Self::build(design, response, None, column_names)
    }

    /// Survival data: observed times `min(T, C)` and `status[i] = true` for a failure.
    pub fn survival(
        design: DMatrix<f64>,
        times: DVector<f64>,
        status: Vec<bool>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        Self::build(design, times, Some(status), column_names)
    }

    fn build(
        design: DMatrix<f64>,
        response: DVector<f64>,
        status: Option<Vec<bool>>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = design.nrows();
        if n == 0 || design.ncols() == 0 {
            return Err(Error::InvalidData("design must have at least one row and one column".into()));
        }
        if response.len() != n {
            return Err(Error::InvalidData(format!(
                "response has {} entries but the design has {n} rows",
                response.len()
            )));
        }
        if column_names.len() != design.ncols() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} columns",
                column_names.len(),
                design.ncols()
            )));
        }
        if let Some(s) = &status {
            if s.len() != n {
                return Err(Error::InvalidData(format!("status has {} entries, expected {n}", s.len())));
            }
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite value in design or response".into()));
        }
        Ok(Dataset {
            design,
            response,
            status,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn d(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn status(&self) -> Option<&[bool]> {
        self.status.as_deref()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Keeps the listed columns, in the order given.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let design = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.design[(i, cols[j])]);
        Dataset {
            design,
            response: self.response.clone(),
            status: self.status.clone(),
            column_names: cols.iter().map(|&c| self.column_names[c].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct RiskSets {
    /// Observation indices by decreasing observed time.
    order: Vec<usize>,
    /// Half-open ranges of `order` sharing one time value.
    groups: Vec<(usize, usize)>,
}

impl RiskSets {
    fn new(times: &DVector<f64>) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut start = 0;
        for k in 1..=order.len() {
            if k == order.len() || times[order[k]] != times[order[start]] {
                groups.push((start, k));
                start = k;
            }
        }
        RiskSets { order, groups }
    }
}

/// A likelihood family bound to a dataset.
#[derive(Debug)]
pub struct LikelihoodModel {
    family: Family,
    data: Dataset,
    risk: Option<RiskSets>,
    clamp_events: AtomicUsize,
}

impl Clone for LikelihoodModel {
    fn clone(&self) -> Self {
        LikelihoodModel {
            family: self.family,
            data: self.data.clone(),
            risk: self.risk.clone(),
            clamp_events: AtomicUsize::new(self.clamp_events()),
        }
    }
}

struct CoxPass {
    loglik: f64,
    scores: Option<DMatrix<f64>>,
    hessian: Option<DMatrix<f64>>,
}

impl LikelihoodModel {
    pub fn new(family: Family, data: Dataset) -> Result<Self> {
        match (family, data.status()) {
            (Family::Cox, None) => {
                return Err(Error::InvalidData("Cox family needs failure indicators".into()))
            }
            (Family::Cox, Some(_)) => {
                if data.response().iter().any(|&t| !(t > 0.0)) {
                    return Err(Error::InvalidData("observed times must be positive".into()));
                }
            }
            (_, Some(_)) => {
                return Err(Error::InvalidData(format!(
                    "failure indicators are only valid for the Cox family, not {family}"
                )))
            }
            (Family::Logistic, None) => {
                if data.response().iter().any(|&y| !(0.0..=1.0).contains(&y)) {
                    return Err(Error::InvalidData("logistic response must lie in [0, 1]".into()));
                }
            }
            (Family::Poisson, None) => {
                if data.response().iter().any(|&y| y < 0.0) {
                    return Err(Error::InvalidData("Poisson response must be nonnegative".into()));
                }
            }
            (Family::Linear, None) => {}
        }
        let risk = (family == Family::Cox).then(|| RiskSets::new(data.response()));
        Ok(LikelihoodModel {
            family,
            data,
            risk,
            clamp_events: AtomicUsize::new(0),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    /// Number of linear predictors clamped at `ETA_CLAMP` so far.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events.load(Ordering::Relaxed)
    }

    /// Same family on a subset of columns.
    pub fn select_columns(&self, cols: &[usize]) -> LikelihoodModel {
        LikelihoodModel {
            family: self.family,
            data: self.data.select_columns(cols),
            risk: self.risk.clone(),
            clamp_events: AtomicUsize::new(0),
        }
    }

    pub fn linear_predictor(&self, beta: &DVector<f64>) -> DVector<f64> {
        assert_eq!(beta.len(), self.d(), "coefficient dimension mismatch");
        self.data.design() * beta
    }

    fn clamped(&self, eta: f64) -> f64 {
        if eta.abs() > ETA_CLAMP {
            self.clamp_events.fetch_add(1, Ordering::Relaxed);
            eta.signum() * ETA_CLAMP
        } else {
            eta
        }
    }

    fn check_finite(value: f64, eta: &DVector<f64>) -> Result<f64> {
        if value.is_finite() {
            Ok(value)
        } else {
            let worst = eta.iter().copied().fold(0.0f64, |m, e| if e.abs() > m.abs() || e.is_nan() { e } else { m });
            Err(Error::NonFinite { eta: worst })
        }
    }

    pub fn loglik(&self, beta: &DVector<f64>) -> Result<f64> {
        let eta = self.linear_predictor(beta);
        let y = self.data.response();
        let value = match self.family {
            Family::Linear => -0.5 * (y - &eta).norm_squared(),
            Family::Logistic => eta
                .iter()
                .zip(y.iter())
                .map(|(&e, &yi)| yi * e - softplus(e))
                .sum(),
            Family::Poisson => eta.iter().zip(y.iter()).map(|(&e, &yi)| yi * e - e.exp()).sum(),
            Family::Cox => self.cox_pass(&eta, false, false).loglik,
        };
        Self::check_finite(value, &eta)
    }

    /// Working residuals `y - mu` for the GLM families.
    fn residuals(&self, eta: &DVector<f64>) -> DVector<f64> {
        let y = self.data.response();
        match self.family {
            Family::Linear => y - eta,
            Family::Logistic => DVector::from_iterator(
                eta.len(),
                eta.iter().zip(y.iter()).map(|(&e, &yi)| yi - sigmoid(self.clamped(e))),
            ),
            Family::Poisson => DVector::from_iterator(
                eta.len(),
                eta.iter().zip(y.iter()).map(|(&e, &yi)| yi - self.clamped(e).exp()),
            ),
            Family::Cox => unreachable!("Cox scores come from risk-set moments"),
        }
    }

    pub fn score(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        let eta = self.linear_predictor(beta);
        Self::check_finite(eta.iter().sum(), &eta)?;
        match self.family {
            Family::Cox => {
                let pass = self.cox_pass(&eta, true, false);
                Self::check_finite(pass.loglik, &eta)?;
                let scores = pass.scores.expect("scores requested");
                Ok(DVector::from_iterator(
                    self.d(),
                    scores.column_iter().map(|c| c.sum()),
                ))
            }
            _ => Ok(self.data.design().tr_mul(&self.residuals(&eta))),
        }
    }

    /// Hessian of the log-likelihood, or minus the total Fisher information.
    ///
    /// For the canonical-link families both coincide; for Cox the observed
    /// information serves as the information estimate.
    pub fn curvature(&self, beta: &DVector<f64>, _kind: CurvatureKind) -> Result<DMatrix<f64>> {
        let eta = self.linear_predictor(beta);
        Self::check_finite(eta.iter().sum(), &eta)?;
        let x = self.data.design();
        let weights: DVector<f64> = match self.family {
            Family::Linear => DVector::from_element(self.n(), 1.0),
            Family::Logistic => eta.map(|e| {
                let mu = sigmoid(self.clamped(e));
                mu * (1.0 - mu)
            }),
            Family::Poisson => eta.map(|e| self.clamped(e).exp()),
            Family::Cox => {
                let pass = self.cox_pass(&eta, false, true);
                Self::check_finite(pass.loglik, &eta)?;
                return Ok(pass.hessian.expect("hessian requested"));
            }
        };
        let mut weighted = x.clone();
        for (mut row, w) in weighted.row_iter_mut().zip(weights.iter()) {
            row *= *w;
        }
        let mut h = -(x.tr_mul(&weighted));
        crate::linalg::symmetrize(&mut h);
        Ok(h)
    }

    /// Row `i` holds the gradient of observation `i`'s log-likelihood term.
    ///
    /// For Cox each failure's partial-likelihood term is attributed to the
    /// failing subject; censored subjects get zero rows.
    pub fn per_observation_scores(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let eta = self.linear_predictor(beta);
        Self::check_finite(eta.iter().sum(), &eta)?;
        match self.family {
            Family::Cox => {
                let pass = self.cox_pass(&eta, true, false);
                Self::check_finite(pass.loglik, &eta)?;
                Ok(pass.scores.expect("scores requested"))
            }
            _ => {
                let r = self.residuals(&eta);
                let mut g = self.data.design().clone();
                for (mut row, ri) in g.row_iter_mut().zip(r.iter()) {
                    row *= *ri;
                }
                Ok(g)
            }
        }
    }

    fn cox_pass(&self, eta: &DVector<f64>, want_scores: bool, want_hessian: bool) -> CoxPass {
        let risk = self.risk.as_ref().expect("Cox model has risk sets");
        let status = self.data.status().expect("Cox model has status");
        let x = self.data.design();
        let d = self.d();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(d);
        let mut s2 = DMatrix::<f64>::zeros(d, d);
        let mut loglik = 0.0;
        let mut scores = want_scores.then(|| DMatrix::<f64>::zeros(self.n(), d));
        let mut hessian = want_hessian.then(|| DMatrix::<f64>::zeros(d, d));

        for &(start, end) in &risk.groups {
            for &i in &risk.order[start..end] {
                let w = (eta[i] - shift).exp();
                s0 += w;
                let xi = x.row(i);
                for a in 0..d {
                    s1[a] += w * xi[a];
                }
                if want_hessian {
                    for a in 0..d {
                        for b in 0..=a {
                            s2[(a, b)] += w * xi[a] * xi[b];
                        }
                    }
                }
            }
            let failures = risk.order[start..end].iter().filter(|&&i| status[i]).count();
            if failures == 0 {
                continue;
            }
            let log_denom = s0.ln() + shift;
            let mean = &s1 / s0;
            for &i in risk.order[start..end].iter().filter(|&&i| status[i]) {
                loglik += eta[i] - log_denom;
                if let Some(g) = scores.as_mut() {
                    for a in 0..d {
                        g[(i, a)] = x[(i, a)] - mean[a];
                    }
                }
            }
            if let Some(h) = hessian.as_mut() {
                let k = failures as f64;
                for a in 0..d {
                    for b in 0..=a {
                        let v = k * (s2[(a, b)] / s0 - mean[a] * mean[b]);
                        h[(a, b)] -= v;
                        if a != b {
                            h[(b, a)] -= v;
                        }
                    }
                }
            }
        }
        CoxPass {
            loglik,
            scores,
            hessian,
        }
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
pub fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Centers and scales to unit sample standard deviation.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len() as f64;
    if v.len() < 2 {
        return Err(Error::InvalidData("cannot standardize fewer than two values".into()));
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::InvalidData("cannot standardize a constant variable".into()));
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Truncated power cubic spline basis on the standardized `t`:
/// columns `1, t, t^2, t^3, (t - k_1)_+^3, ...` with knots at the requested
/// empirical quantiles.
pub fn spline_basis(t: &[f64], knot_quantiles: &[f64]) -> Result<DMatrix<f64>> {
    if t.len() < 10 {
        return Err(Error::InvalidData(format!(
            "spline basis needs at least 10 points, got {}",
            t.len()
        )));
    }
    if knot_quantiles.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidData("knot quantiles must lie in [0, 1]".into()));
    }
    let z = standardize(t)?;
    let mut sorted = z.clone();
    sorted.sort_by(f64::total_cmp);
    let mut knots: Vec<f64> = knot_quantiles.iter().map(|&p| quantile(&sorted, p)).collect();
    knots.sort_by(f64::total_cmp);
    if knots.windows(2).any(|w| w[1] - w[0] <= 1e-12) {
        return Err(Error::InvalidData(
            "duplicate spline knots; the time variable is too concentrated".into(),
        ));
    }
    let cols = 4 + knots.len();
    Ok(DMatrix::from_fn(z.len(), cols, |i, j| {
        let ti = z[i];
        match j {
            0 => 1.0,
            1 => ti,
            2 => ti * ti,
            3 => ti * ti * ti,
            _ => (ti - knots[j - 4]).max(0.0).powi(3),
        }
    }))
}

/// Knot positions used by [`spline_basis`] for the same inputs.
pub fn spline_knots(t: &[f64], knot_quantiles: &[f64]) -> Result<Vec<f64>> {
    let z = standardize(t)?;
    let mut sorted = z;
    sorted.sort_by(f64::total_cmp);
    Ok(knot_quantiles.iter().map(|&p| quantile(&sorted, p)).collect())
}
