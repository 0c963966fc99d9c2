//! STAT(tau) and VSTAT(t) oracle simulation over a fixed sample set or an
//! exact distribution, with pluggable answer policies and query accounting.

use crate::oned::Univariate;
use crate::samples::SampleMatrix;
use crate::special::{double_factorial, gamma_lower_regularized, std_normal_cdf};
use crate::{integrate, Error, Result};
use serde::{Deserialize, Serialize};

/// One oracle invocation: the tolerance in force, the answer given, and the
/// truth it was derived from (known for every simulated source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub tolerance: f64,
    pub answer: f64,
    pub truth: Option<f64>,
}

/// Append-only log of oracle invocations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryLedger {
    records: Vec<QueryRecord>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn push(&mut self, record: QueryRecord) {
        self.records.push(record);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ledger serializes")
    }
}

/// How the simulated oracle uses its tolerance budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OraclePolicy {
    /// Answer the truth (empirical mean for sample sources).
    Honest,
    /// Answer truth + sign * tau; sign is +1 or -1.
    FixedOffset(f64),
    /// Move the answer toward a target value, spending at most tau.
    TowardValue(f64),
}

impl OraclePolicy {
    fn apply(&self, truth: f64, tau: f64) -> f64 {
        match *self {
            OraclePolicy::Honest => truth,
            OraclePolicy::FixedOffset(sign) => truth + sign.signum() * tau,
            OraclePolicy::TowardValue(target) => {
                if (target - truth).abs() <= tau {
                    target
                } else {
                    truth + tau * (target - truth).signum()
                }
            }
        }
    }
}

/// What the oracle answers about.
pub enum OracleSource<'a> {
    /// Fixed dataset; expectations are empirical means. One dataset answers
    /// all queries of a run.
    Samples(&'a SampleMatrix),
    /// Exact one-dimensional distribution; expectations by integration.
    ExactUnivariate(&'a Univariate),
    /// Exact N(mean, I); supports the structured query shapes below.
    ExactNormal { mean: Vec<f64> },
}

/// Structured queries. All values must land in [-1, 1] (STAT) or [0, 1]
/// (VSTAT); the `scale` fields are the caller's certificates for that.
pub enum Query<'q> {
    /// f(x) for a scalar source.
    Scalar(&'q dyn Fn(f64) -> f64),
    /// f(x) for a point source (sample-backed only).
    Point(&'q dyn Fn(&[f64]) -> f64),
    /// Indicator of {x_coord <= threshold} (or >= when `upper`).
    CoordinateTail { coord: usize, threshold: f64, upper: bool },
    /// (prod_i x_i^{exponents_i} / scale) * 1{ |x| <= radius }.
    BallMonomial { exponents: &'q [u32], radius: f64, scale: f64 },
    /// prod_i He_{counts_i}(x_i) / scale.
    HermiteProduct { counts: &'q [u32], scale: f64 },
}

fn expect_samples(m: &SampleMatrix, query: &Query, check_bound: f64) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::InvalidParam("empty sample source".into()));
    }
    let mut sum = 0.0;
    for row in m.rows() {
        let v = match query {
            Query::Scalar(f) => {
                if m.dim() != 1 {
                    return Err(Error::UnsupportedQuery(
                        "scalar query on multi-dimensional samples".into(),
                    ));
                }
                f(row[0])
            }
            Query::Point(f) => f(row),
            Query::CoordinateTail { coord, threshold, upper } => {
                let hit = if *upper { row[*coord] >= *threshold } else { row[*coord] <= *threshold };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            Query::BallMonomial { exponents, radius, scale } => {
                let norm2: f64 = row.iter().map(|x| x * x).sum();
                if norm2 <= radius * radius {
                    let mut p = 1.0;
                    for (x, &e) in row.iter().zip(*exponents) {
                        for _ in 0..e {
                            p *= x;
                        }
                    }
                    p / scale
                } else {
                    0.0
                }
            }
            Query::HermiteProduct { counts, scale } => {
                let mut p = 1.0;
                for (x, &c) in row.iter().zip(*counts) {
                    if c > 0 {
                        p *= crate::polybasis::hermite_eval(c as usize, *x);
                    }
                }
                p / scale
            }
        };
        if v.abs() > check_bound + 1e-9 {
            return Err(Error::QueryRange(format!(
                "query value {v} outside [-{check_bound}, {check_bound}]"
            )));
        }
        sum += v;
    }
    Ok(sum / m.len() as f64)
}

fn expect_exact_univariate(d: &Univariate, query: &Query) -> Result<f64> {
    match query {
        Query::Scalar(f) => {
            let r = d.tail_radius();
            Ok(integrate::adaptive(|x| f(x) * d.pdf(x), -r, r, 1e-10))
        }
        Query::CoordinateTail { coord: 0, threshold, upper } => {
            let p = d.cdf(*threshold);
            Ok(if *upper { 1.0 - p } else { p })
        }
        _ => Err(Error::UnsupportedQuery("exact 1-d source answers scalar queries".into())),
    }
}

fn expect_exact_normal(mean: &[f64], query: &Query) -> Result<f64> {
    match query {
        Query::CoordinateTail { coord, threshold, upper } => {
            if *coord >= mean.len() {
                return Err(Error::InvalidParam("coordinate out of range".into()));
            }
            let p = std_normal_cdf(threshold - mean[*coord]);
            Ok(if *upper { 1.0 - p } else { p })
        }
        Query::HermiteProduct { counts, scale } => {
            // E[He_c(X_i)] = mu_i^c for unit-variance coordinates.
            let mut p = 1.0;
            for (mu, &c) in mean.iter().zip(*counts) {
                p *= mu.powi(c as i32);
            }
            Ok(p / scale)
        }
        Query::BallMonomial { exponents, radius, scale } => {
            if mean.iter().any(|&m| m != 0.0) {
                return Err(Error::UnsupportedQuery(
                    "ball-conditioned moments are closed-form only at mean zero".into(),
                ));
            }
            let n = mean.len();
            let t: u32 = exponents.iter().sum();
            if exponents.iter().any(|&e| e % 2 == 1) {
                return Ok(0.0);
            }
            // E[prod x_i^{a_i} 1{|x| <= R}] =
            //   prod (a_i - 1)!! * P((n + t)/2, R^2/2)
            let prod: f64 = exponents
                .iter()
                .map(|&e| double_factorial(e as i64 - 1))
                .product();
            let cond = gamma_lower_regularized((n as f64 + t as f64) / 2.0, radius * radius / 2.0);
            Ok(prod * cond / scale)
        }
        _ => Err(Error::UnsupportedQuery(
            "exact normal source answers tails, Hermite products, and ball monomials".into(),
        )),
    }
}

fn expectation(source: &OracleSource, query: &Query, check_bound: f64) -> Result<f64> {
    match source {
        OracleSource::Samples(m) => expect_samples(m, query, check_bound),
        OracleSource::ExactUnivariate(d) => expect_exact_univariate(d, query),
        OracleSource::ExactNormal { mean } => expect_exact_normal(mean, query),
    }
}

/// STAT(tau): answers within tau of E[f] for f: X -> [-1, 1].
pub fn stat_query(
    source: &OracleSource,
    query: &Query,
    tau: f64,
    policy: OraclePolicy,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParam(format!("STAT tolerance must be positive, got {tau}")));
    }
    let truth = expectation(source, query, 1.0)?;
    let answer = policy.apply(truth, tau);
    ledger.push(QueryRecord { tolerance: tau, answer, truth: Some(truth) });
    Ok(answer)
}

/// VSTAT(t): answers within max(1/t, sqrt(p(1-p)/t)) of E[f] for f: X -> [0, 1].
pub fn vstat_query(
    source: &OracleSource,
    query: &Query,
    t: f64,
    policy: OraclePolicy,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParam(format!("VSTAT size must be positive, got {t}")));
    }
    let truth = expectation(source, query, 1.0)?;
    if !(-1e-9..=1.0 + 1e-9).contains(&truth) {
        return Err(Error::QueryRange(format!("VSTAT query mean {truth} outside [0, 1]")));
    }
    let p = truth.clamp(0.0, 1.0);
    let tau = (1.0 / t).max((p * (1.0 - p) / t).sqrt());
    let answer = policy.apply(truth, tau);
    ledger.push(QueryRecord { tolerance: tau, answer, truth: Some(truth) });
    Ok(answer)
}
