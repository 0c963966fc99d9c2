//! Moment-matched Gaussian estimation lab.
//!
//! This crate builds the univariate "hard" distributions that agree with
//! `N(0,1)` on their first moments (Gauss-Hermite mixtures, interval-perturbed
//! Gaussians, mean/covariance tradeoff mixtures), lifts them to hidden-direction
//! distributions on `R^n`, and implements the machinery used to study them
//! numerically: Hermite expansions and Ornstein-Uhlenbeck smoothing, pairwise
//! correlation series, STAT/VSTAT oracle simulation, Hermite moment tensors,
//! a higher-order robust mean learner, and mean testers.

pub mod correlation;
pub mod instances;
pub mod learner;
pub mod oned;
pub mod polybasis;
pub mod samples;
pub mod sqoracle;
pub mod tensorher;
pub mod testers;

pub(crate) mod integrate;
pub(crate) mod special;

use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("root finding did not converge: {0}")]
    RootFind(String),
    #[error("numerical integral diverged or failed a finite check: {0}")]
    Diverged(String),
    #[error("constructed density is invalid: {0}")]
    InvalidDensity(String),
    #[error("instance certificate failed: {0}")]
    Certificate(String),
    #[error("rejection sampler stalled (acceptance rate below 1e-3)")]
    RejectionStalled,
    #[error("rejection packing failed after {0} consecutive rejections")]
    PackingInfeasible(usize),
    #[error("query out of range: {0}")]
    QueryRange(String),
    #[error("query unsupported by this source: {0}")]
    UnsupportedQuery(String),
    #[error("conditioning mass too small (denominator {0} < 1/2)")]
    ConditioningMass(f64),
    #[error("tensor too large: {0}")]
    TensorBudget(String),
    #[error("iteration cap exceeded: {0}")]
    IterationCap(String),
    #[error("linear program infeasible at slack {0}")]
    LpInfeasible(f64),
    #[error("expansion tail too heavy: {0}")]
    ExpansionTail(String),
}

pub type Result<T> = std::result::Result<T, Error>;
