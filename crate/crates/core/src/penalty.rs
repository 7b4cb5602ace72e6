//! Penalty functions, their one-sided derivatives, the epsilon-perturbed
//! penalty and the quadratic majorizers that drive the MM iteration.
//!
//! Every penalty here is nondecreasing and concave on `(0, inf)` with a finite
//! right derivative at the origin. The L_q family with `q < 1` would violate
//! that last condition, so its derivative is held constant below
//! [`LQ_DERIVATIVE_FLOOR`] and the penalty value is the matching antiderivative.

use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature;

/// Argument below which the L_q derivative is frozen at its value there.
pub const LQ_DERIVATIVE_FLOOR: f64 = 1e-8;

/// Absolute tolerance on `epsilon * integral` when quadrature is needed.
const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    /// Smoothly clipped absolute deviation with shape constant `a > 2`.
    Scad { a: f64 },
    L1,
    /// Bridge penalty `lambda * |theta|^q`, `0 < q <= 1`.
    Lq { q: f64 },
    HardThreshold,
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::Scad { .. } => "scad",
            PenaltyKind::L1 => "l1",
            PenaltyKind::Lq { .. } => "lq",
            PenaltyKind::HardThreshold => "hard",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltyKind::Scad { a } if !(a.is_finite() && a > 2.0) => Err(Error::InvalidPenalty(
                format!("SCAD requires a > 2, got {a}"),
            )),
            PenaltyKind::Lq { q } if !(q > 0.0 && q <= 1.0) => Err(Error::InvalidPenalty(
                format!("L_q requires 0 < q <= 1, got {q}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltyKind::Scad { a } => write!(f, "scad(a={a})"),
            PenaltyKind::L1 => write!(f, "l1"),
            PenaltyKind::Lq { q } => write!(f, "lq(q={q})"),
            PenaltyKind::HardThreshold => write!(f, "hard"),
        }
    }
}

/// A validated penalty: kind, tuning parameter `lambda` and perturbation `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    lambda: f64,
    epsilon: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        kind.validate()?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidPenalty(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(PenaltySpec {
            kind,
            lambda,
            epsilon: 0.0,
        })
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad { a }, lambda)
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::L1, lambda)
    }

    pub fn lq(lambda: f64, q: f64) -> Result<Self> {
        Self::new(PenaltyKind::Lq { q }, lambda)
    }

    pub fn hard_threshold(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::HardThreshold, lambda)
    }

    /// Returns a copy carrying perturbation `epsilon`.
    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidPenalty(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(PenaltySpec { epsilon, ..self })
    }

    /// Same penalty shape with a different `lambda` (epsilon reset to 0).
    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.kind, lambda)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// True when the L_q derivative cap is in force (`q < 1`).
    pub fn derivative_capped(&self) -> bool {
        matches!(self.kind, PenaltyKind::Lq { q } if q < 1.0)
    }

    fn lq_cap(&self, q: f64) -> f64 {
        self.lambda * q * LQ_DERIVATIVE_FLOOR.powf(q - 1.0)
    }

    /// One-sided derivative `p'(theta+)` for `theta >= 0`.
    pub fn derivative_plus(&self, theta: f64) -> f64 {
        debug_assert!(theta >= 0.0);
        let lambda = self.lambda;
        match self.kind {
            PenaltyKind::Scad { a } => {
                if theta <= lambda {
                    lambda
                } else {
                    (a * lambda - theta).max(0.0) / (a - 1.0)
                }
            }
            PenaltyKind::L1 => lambda,
            PenaltyKind::Lq { q } => {
                if theta < LQ_DERIVATIVE_FLOOR {
                    self.lq_cap(q)
                } else {
                    lambda * q * theta.powf(q - 1.0)
                }
            }
            PenaltyKind::HardThreshold => {
                if theta < lambda {
                    2.0 * (lambda - theta)
                } else {
                    0.0
                }
            }
        }
    }

    /// One-sided second derivative `p''(theta+)` for `theta >= 0`.
    pub fn second_derivative_plus(&self, theta: f64) -> f64 {
        debug_assert!(theta >= 0.0);
        let lambda = self.lambda;
        match self.kind {
            PenaltyKind::Scad { a } => {
                if theta >= lambda && theta < a * lambda {
                    -1.0 / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyKind::L1 => 0.0,
            PenaltyKind::Lq { q } => {
                if theta < LQ_DERIVATIVE_FLOOR {
                    0.0
                } else {
                    lambda * q * (q - 1.0) * theta.powf(q - 2.0)
                }
            }
            PenaltyKind::HardThreshold => {
                if theta < lambda {
                    -2.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `p'(0+)`, the sparsity-inducing slope at the origin.
    pub fn derivative_at_zero(&self) -> f64 {
        self.derivative_plus(0.0)
    }

    /// Penalty value `p(|theta|)`, the antiderivative of [`Self::derivative_plus`].
    pub fn value(&self, theta: f64) -> f64 {
        let t = theta.abs();
        let lambda = self.lambda;
        match self.kind {
            PenaltyKind::Scad { a } => {
                if t <= lambda {
                    lambda * t
                } else if t <= a * lambda {
                    (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    0.5 * (a + 1.0) * lambda * lambda
                }
            }
            PenaltyKind::L1 => lambda * t,
            PenaltyKind::Lq { q } => {
                let cap = self.lq_cap(q);
                if t <= LQ_DERIVATIVE_FLOOR {
                    cap * t
                } else {
                    cap * LQ_DERIVATIVE_FLOOR
                        + lambda * (t.powf(q) - LQ_DERIVATIVE_FLOOR.powf(q))
                }
            }
            PenaltyKind::HardThreshold => {
                if t < lambda {
                    2.0 * lambda * t - t * t
                } else {
                    lambda * lambda
                }
            }
        }
    }

    /// `integral_0^t p'(s+) / (epsilon + s) ds` for `epsilon > 0`.
    fn perturbation_integral(&self, t: f64) -> f64 {
        let eps = self.epsilon;
        let lambda = self.lambda;
        match self.kind {
            PenaltyKind::L1 => lambda * (t / eps).ln_1p(),
            PenaltyKind::Scad { a } => {
                let u = t.min(lambda);
                let mut acc = lambda * (u / eps).ln_1p();
                if t > lambda {
                    let v = t.min(a * lambda);
                    acc += ((a * lambda + eps) * ((eps + v) / (eps + lambda)).ln() - (v - lambda))
                        / (a - 1.0);
                }
                acc
            }
            PenaltyKind::HardThreshold => {
                let u = t.min(lambda);
                2.0 * ((lambda + eps) * (u / eps).ln_1p() - u)
            }
            PenaltyKind::Lq { q } => {
                let cap = self.lq_cap(q);
                let u = t.min(LQ_DERIVATIVE_FLOOR);
                let mut acc = cap * (u / eps).ln_1p();
                if t > LQ_DERIVATIVE_FLOOR {
                    // s = w^(1/q) turns the integrand into lambda / (eps + w^(1/q)).
                    let inv_q = 1.0 / q;
                    let tol = QUAD_TOL / eps;
                    acc += quadrature::integrate(
                        |w| lambda / (eps + w.powf(inv_q)),
                        LQ_DERIVATIVE_FLOOR.powf(q),
                        t.powf(q),
                        tol,
                    );
                }
                acc
            }
        }
    }

    /// Perturbed penalty `p(|theta|) - epsilon * integral_0^|theta| p'(s+)/(epsilon+s) ds`.
    pub fn perturbed_value(&self, theta: f64) -> f64 {
        let t = theta.abs();
        if self.epsilon == 0.0 || t == 0.0 {
            return self.value(t);
        }
        self.value(t) - self.epsilon * self.perturbation_integral(t)
    }

    /// Derivative of the perturbed penalty at `|theta|`:
    /// `p'(|theta|+) * |theta| / (epsilon + |theta|)`.
    pub fn perturbed_derivative(&self, theta: f64) -> f64 {
        let t = theta.abs();
        if t == 0.0 {
            return if self.epsilon == 0.0 {
                self.derivative_at_zero()
            } else {
                0.0
            };
        }
        self.derivative_plus(t) * t / (self.epsilon + t)
    }

    /// Curvature weight `p'(|theta|+) / (epsilon + |theta|)` of the majorizer at `theta`.
    pub fn curvature_weight(&self, theta: f64) -> Result<f64> {
        let t = theta.abs();
        let slope = self.derivative_plus(t);
        if slope == 0.0 {
            return Ok(0.0);
        }
        let denom = self.epsilon + t;
        if denom == 0.0 {
            return Err(Error::ZeroCenter);
        }
        Ok(slope / denom)
    }

    /// Quadratic majorizer of the (perturbed) penalty centered at `theta0`.
    pub fn majorizer_at(&self, theta0: f64) -> Result<Majorizer> {
        let weight = self.curvature_weight(theta0)?;
        let quad_coeff = 0.5 * weight;
        let constant = self.perturbed_value(theta0) - quad_coeff * theta0 * theta0;
        Ok(Majorizer {
            center: theta0,
            constant,
            quad_coeff,
        })
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} lambda={} epsilon={}", self.kind, self.lambda, self.epsilon)
    }
}

/// `theta -> constant + quad_coeff * theta^2`, touching the perturbed penalty at `+-|center|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Majorizer {
    pub center: f64,
    pub constant: f64,
    pub quad_coeff: f64,
}

impl Majorizer {
    pub fn eval(&self, theta: f64) -> f64 {
        self.constant + self.quad_coeff * theta * theta
    }
}

/// Perturbation chosen from a starting coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonChoice {
    pub epsilon: f64,
    /// Set when the start is all-zero or `p'(0+) = 0`, in which case `epsilon = 0`.
    pub degenerate: bool,
}

/// `epsilon = tau * min{|b_j| : b_j != 0} / (2 n p'(0+))`.
pub fn epsilon_rule(spec: &PenaltySpec, beta0: &[f64], tau: f64, n: usize) -> EpsilonChoice {
    let slope = spec.derivative_at_zero();
    let smallest = beta0
        .iter()
        .map(|b| b.abs())
        .filter(|&b| b > 0.0)
        .fold(f64::INFINITY, f64::min);
    if slope <= 0.0 || !smallest.is_finite() || n == 0 {
        return EpsilonChoice {
            epsilon: 0.0,
            degenerate: true,
        };
    }
    EpsilonChoice {
        epsilon: tau * smallest / (2.0 * n as f64 * slope),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn scad_derivative_regions() {
        let p = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert_eq!(p.derivative_plus(0.5), 1.0);
        assert!(close(p.derivative_plus(2.0), 1.7 / 2.7, 1e-15));
        assert!(close(p.derivative_plus(2.0), 0.629_630, 1e-6));
        assert_eq!(p.derivative_plus(5.0), 0.0);
    }

    #[test]
    fn l1_derivative_is_constant() {
        let p = PenaltySpec::l1(0.3).unwrap();
        assert_eq!(p.derivative_plus(17.0), 0.3);
    }

    fn piecewise_integral<F: Fn(f64) -> f64>(f: F, breaks: &[f64], upper: f64) -> f64 {
        let mut knots: Vec<f64> = breaks.iter().copied().filter(|&k| k < upper).collect();
        knots.insert(0, 0.0);
        knots.push(upper);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots.windows(2).map(|w| integrate(&f, w[0], w[1], 1e-14)).sum()
    }

    #[test]
    fn scad_values_match_quadrature_of_derivative() {
        let p = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert_eq!(p.value(0.0), 0.0);
        for &(theta, expected) in &[(1.0, 1.0), (10.0, 2.35)] {
            let quad = piecewise_integral(|t| p.derivative_plus(t), &[1.0, 3.7], theta);
            assert!(close(quad, expected, 1e-12), "quadrature {quad} vs {expected}");
            assert!(close(p.value(theta), expected, 1e-12));
        }
    }

    #[test]
    fn l1_value_is_even() {
        let p = PenaltySpec::l1(2.0).unwrap();
        assert_eq!(p.value(-3.0), 6.0);
        assert_eq!(p.value(3.0), 6.0);
    }

    #[test]
    fn perturbed_l1_values() {
        let p = PenaltySpec::l1(1.0).unwrap();
        assert_eq!(p.perturbed_value(1.0), 1.0);
        let p = p.with_epsilon(0.1).unwrap();
        let expected = 1.0 - 0.1 * 11f64.ln();
        assert!(close(p.perturbed_value(1.0), expected, 1e-14));
        assert!(close(p.perturbed_value(1.0), 0.760_210, 1e-6));
        let quad = 1.0 - 0.1 * integrate(|t| 1.0 / (0.1 + t), 0.0, 1.0, 1e-14);
        assert!(close(quad, expected, 1e-13));
    }

    #[test]
    fn perturbed_value_at_zero_is_zero() {
        for spec in all_kinds(0.7) {
            for eps in [0.0, 1e-6, 0.3] {
                assert_eq!(spec.with_epsilon(eps).unwrap().perturbed_value(0.0), 0.0);
            }
        }
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        for spec in all_kinds(1.3) {
            for eps in [1e-4, 0.05, 2.0] {
                let s = spec.with_epsilon(eps).unwrap();
                for theta in [0.01, 0.9, 1.3, 2.5, 7.0] {
                    let integral = piecewise_integral(
                        |t| s.derivative_plus(t) / (eps + t),
                        &[LQ_DERIVATIVE_FLOOR, 1.3, 1.3 * 2.1, 1.3 * 3.7],
                        theta,
                    );
                    let oracle = s.value(theta) - eps * integral;
                    let got = s.perturbed_value(theta);
                    assert!(
                        close(got, oracle, 1e-9 * (1.0 + oracle.abs())),
                        "{s} theta={theta}: {got} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn majorizer_examples() {
        let p = PenaltySpec::scad(1.0, 3.7).unwrap();
        let m = p.majorizer_at(1.0).unwrap();
        assert!(close(m.eval(2.0), 2.5, 1e-14));
        assert!(m.eval(2.0) > p.value(2.0));
        assert!(close(p.value(2.0), 1.814_815, 1e-6));

        let l1 = PenaltySpec::l1(1.0).unwrap();
        assert!(close(l1.majorizer_at(0.5).unwrap().quad_coeff, 1.0, 1e-15));

        let pe = p.with_epsilon(0.01).unwrap();
        let m = pe.majorizer_at(0.4).unwrap();
        assert!(close(m.eval(0.4), pe.perturbed_value(0.4), 1e-14));
    }

    #[test]
    fn majorizer_rejects_zero_center_without_perturbation() {
        let p = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert!(matches!(p.majorizer_at(0.0), Err(Error::ZeroCenter)));
        assert!(p.with_epsilon(1e-3).unwrap().majorizer_at(0.0).is_ok());
    }

    #[test]
    fn epsilon_rule_examples() {
        let l1 = PenaltySpec::l1(1.0).unwrap();
        let e = epsilon_rule(&l1, &[0.5, 0.0, 2.0], 1e-8, 100);
        assert!(!e.degenerate);
        assert!(close(e.epsilon, 2.5e-11, 1e-24));

        let e = epsilon_rule(&l1, &[0.0, 0.0], 1e-8, 100);
        assert!(e.degenerate);
        assert_eq!(e.epsilon, 0.0);

        let scad = PenaltySpec::scad(2.0, 3.7).unwrap();
        let e = epsilon_rule(&scad, &[1.0], 1e-8, 50);
        assert!(close(e.epsilon, 5e-11, 1e-24));

        let unpenalized = PenaltySpec::l1(0.0).unwrap();
        assert!(epsilon_rule(&unpenalized, &[1.0], 1e-8, 10).degenerate);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(PenaltySpec::scad(1.0, 2.0).is_err());
        assert!(PenaltySpec::lq(1.0, 0.0).is_err());
        assert!(PenaltySpec::lq(1.0, 1.5).is_err());
        assert!(PenaltySpec::l1(-1.0).is_err());
        assert!(PenaltySpec::l1(1.0).unwrap().with_epsilon(-1e-3).is_err());
    }

    #[test]
    fn derivative_at_zero_is_finite() {
        for spec in all_kinds(0.8) {
            assert!(spec.derivative_at_zero().is_finite());
        }
        assert!(PenaltySpec::lq(1.0, 0.5).unwrap().derivative_capped());
        assert!(!PenaltySpec::lq(1.0, 1.0).unwrap().derivative_capped());
    }

    #[test]
    fn perturbed_converges_to_value_as_epsilon_shrinks() {
        for spec in all_kinds(1.0) {
            let mut last = f64::INFINITY;
            for eps in [1e-2, 1e-4, 1e-6] {
                let s = spec.with_epsilon(eps).unwrap();
                let gap = (0..=400)
                    .map(|i| -5.0 + 0.025 * i as f64)
                    .map(|t| (s.perturbed_value(t) - s.value(t)).abs())
                    .fold(0.0, f64::max);
                assert!(gap < last, "{spec}: gap {gap} did not shrink");
                last = gap;
            }
        }
    }

    #[test]
    fn value_is_even_monotone_and_concave() {
        for spec in all_kinds(1.1) {
            let h = 0.01;
            let grid: Vec<f64> = (1..1200).map(|i| i as f64 * h).collect();
            for w in grid.windows(3) {
                let (a, b, c) = (spec.value(w[0]), spec.value(w[1]), spec.value(w[2]));
                assert!(b >= a - 1e-14, "{spec} not nondecreasing at {}", w[1]);
                assert!(a - 2.0 * b + c <= 1e-12, "{spec} not concave at {}", w[1]);
                assert_eq!(spec.value(-w[0]), a);
            }
        }
    }

    pub(crate) fn all_kinds(lambda: f64) -> Vec<PenaltySpec> {
        vec![
            PenaltySpec::scad(lambda, 3.7).unwrap(),
            PenaltySpec::scad(lambda, 2.1).unwrap(),
            PenaltySpec::l1(lambda).unwrap(),
            PenaltySpec::lq(lambda, 0.5).unwrap(),
            PenaltySpec::lq(lambda, 1.0).unwrap(),
            PenaltySpec::hard_threshold(lambda).unwrap(),
        ]
    }

    fn arb_spec() -> impl Strategy<Value = PenaltySpec> {
        (0usize..4, 0.05f64..3.0, 2.05f64..6.0, 0.1f64..=1.0).prop_map(|(k, lambda, a, q)| {
            let kind = match k {
                0 => PenaltyKind::Scad { a },
                1 => PenaltyKind::L1,
                2 => PenaltyKind::Lq { q },
                _ => PenaltyKind::HardThreshold,
            };
            PenaltySpec::new(kind, lambda).unwrap()
        })
    }

    proptest! {
        #[test]
        fn majorizer_dominates_perturbed_penalty(
            spec in arb_spec(),
            log_eps in -8.0f64..0.0,
            theta0 in -10.0f64..10.0,
            theta in -10.0f64..10.0,
        ) {
            let s = spec.with_epsilon(10f64.powf(log_eps)).unwrap();
            let m = s.majorizer_at(theta0).unwrap();
            prop_assert!(m.eval(theta) >= s.perturbed_value(theta) - 1e-10);
            prop_assert!((m.eval(theta0) - s.perturbed_value(theta0)).abs() <= 1e-10);
            prop_assert!((m.eval(-theta0) - s.perturbed_value(theta0)).abs() <= 1e-10);
            prop_assert!(m.quad_coeff >= 0.0);
        }

        #[test]
        fn unperturbed_majorizer_dominates_penalty(
            spec in arb_spec(),
            theta0 in prop_oneof![-10.0f64..-1e-3, 1e-3f64..10.0],
            theta in -10.0f64..10.0,
        ) {
            let m = spec.majorizer_at(theta0).unwrap();
            prop_assert!(m.eval(theta) >= spec.value(theta) - 1e-10);
            prop_assert!((m.eval(theta0) - spec.value(theta0)).abs() <= 1e-10);
        }

        #[test]
        fn slope_ratio_is_nonincreasing(spec in arb_spec(), log_eps in -8.0f64..0.0) {
            let eps = 10f64.powf(log_eps);
            let mut prev = f64::INFINITY;
            for i in 1..500 {
                let t = i as f64 * 0.02;
                let r = spec.derivative_plus(t) / (eps + t);
                prop_assert!(r <= prev * (1.0 + 1e-12));
                prev = r;
            }
        }

        #[test]
        fn perturbation_gap_is_bounded(
            spec in arb_spec(),
            log_eps in -8.0f64..0.0,
            theta in -10.0f64..10.0,
        ) {
            let eps = 10f64.powf(log_eps);
            let s = spec.with_epsilon(eps).unwrap();
            let gap = (s.perturbed_value(theta) - s.value(theta)).abs();
            let bound = eps * (theta.abs() / eps).ln_1p() * s.derivative_at_zero();
            // Cancellation in value - perturbation leaves a few ulps of value.
            prop_assert!(gap <= bound * (1.0 + 1e-12) + 1e-14 * (1.0 + s.value(theta)));
        }
    }
}
