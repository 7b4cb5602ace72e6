//! Variable selection by maximizing an epsilon-perturbed penalized likelihood
//! with MM (minorize–maximize) Newton iterations.
//!
//! The crate covers SCAD, L1, L_q and hard-thresholding penalties for linear,
//! logistic, Poisson and Cox models, together with sandwich standard errors,
//! GCV tuning, exhaustive best-subset baselines and a seeded Monte Carlo
//! harness.

pub mod cli;
pub mod error;
pub mod inference;
pub mod likelihood;
pub mod linalg;
pub mod penalty;
pub mod quadrature;
pub mod selection;
pub mod simulation;
pub mod solver;
pub mod tsv;

pub use error::{Error, Result};
pub use inference::{sandwich_cov, CovarianceReport};
pub use likelihood::{CurvatureKind, Dataset, Family, LikelihoodModel};
pub use penalty::{epsilon_rule, Majorizer, PenaltyKind, PenaltySpec};
pub use selection::{best_subset, gcv_select, oracle_fit, Criterion, GcvCurve, SubsetSearchResult};
pub use solver::{fit, mle, Algorithm, FitConfig, FitResult, FitStatus};
