//! Mean testers: the sqrt(n)-sample aggregate tester and the robust tester
//! built on conditioned mixed moments.

use crate::samples::SampleMatrix;
use crate::special::{double_factorial, factorial};
use crate::sqoracle::{stat_query, OraclePolicy, OracleSource, Query, QueryLedger};
use crate::tensorher::SymmetricTensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

/// Aggregate tester: Z = sum(X_i)/sqrt(k); YES iff |Z|^2 < eps^2 k / 2 + n.
pub fn basic_mean_test(samples: &SampleMatrix, eps: f64) -> Verdict {
    let n = samples.dim();
    let k = samples.len();
    assert!(k >= 1, "need at least one sample");
    let mut z = vec![0.0; n];
    for r in samples.rows() {
        for (zi, xi) in z.iter_mut().zip(r) {
            *zi += xi;
        }
    }
    let kf = k as f64;
    let norm_sq: f64 = z.iter().map(|v| v * v / kf).sum();
    if norm_sq < eps * eps * kf / 2.0 + n as f64 {
        Verdict::Yes
    } else {
        Verdict::No
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustTesterConfig {
    /// The moment-matching lemma constant; default 1.
    pub c_l: f64,
    /// Pruning radius constant; default 2.
    pub c_prime: f64,
    pub policy: OraclePolicy,
}

impl Default for RobustTesterConfig {
    fn default() -> Self {
        Self { c_l: 1.0, c_prime: 2.0, policy: OraclePolicy::Honest }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustTestReport {
    pub verdict: Verdict,
    pub k: usize,
    pub prune_radius: f64,
    /// Worst per-coordinate tail estimate from step 1.
    pub step1_max: f64,
    /// Worst ratio of moment deviation to its decision threshold.
    pub worst_violation_ratio: f64,
    pub failed_moment: Option<Vec<u32>>,
    pub queries: usize,
}

fn source_dim(source: &OracleSource) -> Result<usize> {
    match source {
        OracleSource::Samples(m) => Ok(m.dim()),
        OracleSource::ExactNormal { mean } => Ok(mean.len()),
        OracleSource::ExactUnivariate(_) => Ok(1),
    }
}

/// Distinguishes N(0, I) from an eps-noisy Gaussian whose mean is delta-far,
/// via per-coordinate medians and ball-conditioned mixed moments of order <= k.
pub fn robust_mean_test(
    source: &OracleSource,
    eps: f64,
    delta: f64,
    config: &RobustTesterConfig,
    ledger: &mut QueryLedger,
) -> Result<RobustTestReport> {
    let n = source_dim(source)?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParam(format!("eps must lie in (0, 0.5), got {eps}")));
    }
    if delta < 4.0 * config.c_l * eps {
        return Err(Error::InvalidParam(format!(
            "need delta >= 4 C_L eps = {}, got {delta}",
            4.0 * config.c_l * eps
        )));
    }
    let k = 2 * ((2.0 * config.c_l * eps * (1.0 / eps).ln().sqrt() / delta).ceil() as usize).max(1);
    if (n as f64).powi(k as i32) > 1e7 {
        return Err(Error::TensorBudget(format!("n^k = {}^{} exceeds 10^7 entries", n, k)));
    }
    // Soundness margin: every decision threshold must exceed the oracle
    // precision, which holds exactly when delta >= 4 C_L eps.
    let margin = |t: usize| -> f64 {
        factorial(t - 1) * (delta / (2.0 * config.c_l * eps)).powi(t as i32) / t as f64 - 1.0
    };
    for t in 1..=k {
        if margin(t) < 1.0 {
            return Err(Error::InvalidParam(format!(
                "decision margin at order {t} is below the oracle precision"
            )));
        }
    }

    // Step 1: per-coordinate tail probabilities at +eps, to within eps/2.
    let mut step1_max: f64 = 0.0;
    for coord in 0..n {
        for upper in [false, true] {
            let p = stat_query(
                source,
                &Query::CoordinateTail { coord, threshold: eps, upper },
                eps / 2.0,
                config.policy,
                ledger,
            )?;
            step1_max = step1_max.max(p);
            if p > 0.5 + eps {
                return Ok(RobustTestReport {
                    verdict: Verdict::No,
                    k,
                    prune_radius: 0.0,
                    step1_max,
                    worst_violation_ratio: f64::NAN,
                    failed_moment: None,
                    queries: ledger.count(),
                });
            }
        }
    }

    // Steps 2-3: conditioned mixed moments of order <= k.
    let radius = config.c_prime * k as f64 * (n as f64 * ((n as f64) / eps).ln()).sqrt();
    let nf = n as f64;
    let base_precision = nf.powf(-(k as f64) / 2.0) * eps / 2.0;
    let zeros = vec![0u32; n];
    let ball_mass = stat_query(
        source,
        &Query::BallMonomial { exponents: &zeros, radius, scale: 1.0 },
        base_precision / 4.0,
        config.policy,
        ledger,
    )?;
    if ball_mass < 0.5 {
        return Err(Error::ConditioningMass(ball_mass));
    }

    let mut worst_ratio: f64 = 0.0;
    let mut worst_at: Option<Vec<u32>> = None;
    let mut dense = vec![0u32; n];
    for t in 1..=k {
        let threshold = margin(t) * nf.powf(-(k as f64) / 2.0) * eps;
        let scale = radius.powi(t as i32);
        let layout = SymmetricTensor::zeros(n, t);
        for slot in 0..layout.slots() {
            dense.iter_mut().for_each(|c| *c = 0);
            for &(i, c) in layout.counts_sparse(slot) {
                dense[i as usize] = c as u32;
            }
            let raw = stat_query(
                source,
                &Query::BallMonomial { exponents: &dense, radius, scale },
                (base_precision / 2.0 / scale).max(1e-300),
                config.policy,
                ledger,
            )?;
            let moment = raw * scale / ball_mass;
            let reference: f64 = if dense.iter().any(|&e| e % 2 == 1) {
                0.0
            } else {
                dense.iter().map(|&e| double_factorial(e as i64 - 1)).product()
            };
            let deviation = (moment - reference).abs();
            let ratio = deviation / threshold;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_at = Some(dense.clone());
            }
            if deviation > threshold {
                return Ok(RobustTestReport {
                    verdict: Verdict::No,
                    k,
                    prune_radius: radius,
                    step1_max,
                    worst_violation_ratio: ratio,
                    failed_moment: Some(dense.clone()),
                    queries: ledger.count(),
                });
            }
        }
    }

    Ok(RobustTestReport {
        verdict: Verdict::Yes,
        k,
        prune_radius: radius,
        step1_max,
        worst_violation_ratio: worst_ratio,
        failed_moment: worst_at,
        queries: ledger.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_samples<R: Rng>(n: usize, count: usize, mu: &[f64], rng: &mut R) -> SampleMatrix {
        let mut m = SampleMatrix::new(n);
        let mut row = vec![0.0; n];
        for _ in 0..count {
            for (r, &mi) in row.iter_mut().zip(mu) {
                *r = mi + rng.sample::<f64, _>(StandardNormal);
            }
            m.push_row(&row);
        }
        m
    }

    #[test]
    fn basic_threshold_arithmetic() {
        // One sample with |x|^2 = n exactly: YES.
        let n = 4;
        let x = vec![1.0; n];
        let m = SampleMatrix::from_rows(vec![x]).unwrap();
        assert_eq!(basic_mean_test(&m, 0.5), Verdict::Yes);
        // |Z|^2 = n + eps^2 k: NO.
        let eps = 0.5f64;
        let norm = (n as f64 + eps * eps).sqrt();
        let mut x = vec![0.0; n];
        x[0] = norm;
        let m = SampleMatrix::from_rows(vec![x]).unwrap();
        assert_eq!(basic_mean_test(&m, eps), Verdict::No);
    }

    #[test]
    fn basic_power_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let (n, eps) = (16usize, 0.5f64);
        let k = (16.0 * (n as f64).sqrt() / (eps * eps)) as usize;
        let mut yes = 0;
        let mut no = 0;
        let trials = 60;
        for _ in 0..trials {
            let h0 = gaussian_samples(n, k, &vec![0.0; n], &mut rng);
            if basic_mean_test(&h0, eps) == Verdict::Yes {
                yes += 1;
            }
            let mut mu = vec![0.0; n];
            mu[0] = eps;
            let h1 = gaussian_samples(n, k, &mu, &mut rng);
            if basic_mean_test(&h1, eps) == Verdict::No {
                no += 1;
            }
        }
        assert!(yes >= (trials * 8) / 10, "H0 yes rate {yes}/{trials}");
        assert!(no >= (trials * 8) / 10, "H1 no rate {no}/{trials}");
    }

    #[test]
    fn robust_completeness_exact_oracle() {
        let source = OracleSource::ExactNormal { mean: vec![0.0; 8] };
        let mut ledger = QueryLedger::new();
        let report = robust_mean_test(
            &source,
            0.05,
            0.4,
            &RobustTesterConfig::default(),
            &mut ledger,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Yes);
        assert!(report.worst_violation_ratio < 1.0);
        assert_eq!(report.queries, ledger.count());
    }

    #[test]
    fn robust_rejects_shifted_mean_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let n = 8;
        let delta = 0.4;
        let mut mu = vec![0.0; n];
        let per = delta / (n as f64).sqrt();
        mu.iter_mut().for_each(|m| *m = per);
        let samples = gaussian_samples(n, 100_000, &mu, &mut rng);
        let source = OracleSource::Samples(&samples);
        let mut ledger = QueryLedger::new();
        let report = robust_mean_test(
            &source,
            0.05,
            delta,
            &RobustTesterConfig::default(),
            &mut ledger,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::No);
    }

    #[test]
    fn robust_rejects_far_median() {
        // Mean shifted along e_1 far enough to trip the step-1 tail check.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let n = 8;
        let mut mu = vec![0.0; n];
        mu[0] = -0.5;
        let samples = gaussian_samples(n, 50_000, &mu, &mut rng);
        let source = OracleSource::Samples(&samples);
        let mut ledger = QueryLedger::new();
        let report = robust_mean_test(
            &source,
            0.05,
            0.4,
            &RobustTesterConfig::default(),
            &mut ledger,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::No);
        assert!(report.step1_max > 0.5 + 0.05);
    }

    #[test]
    fn soundness_margin_enforced() {
        let source = OracleSource::ExactNormal { mean: vec![0.0; 4] };
        let mut ledger = QueryLedger::new();
        // delta below 4 C_L eps is refused.
        let err = robust_mean_test(
            &source,
            0.05,
            0.1,
            &RobustTesterConfig::default(),
            &mut ledger,
        );
        assert!(err.is_err());
    }

    #[test]
    fn pruned_moment_drift_small() {
        // Conditioning N(0,I) on the step-3 ball moves moments of order <= k
        // by less than n^{-k/2} eps at desk parameters.
        let n = 8usize;
        let eps = 0.05;
        let k = 4usize;
        let radius = 2.0 * k as f64 * (n as f64 * ((n as f64) / eps).ln()).sqrt();
        let ball = crate::special::gamma_lower_regularized(n as f64 / 2.0, radius * radius / 2.0);
        let budget = (n as f64).powf(-(k as f64) / 2.0) * eps;
        for t in (2..=k).step_by(2) {
            let cond = crate::special::gamma_lower_regularized(
                (n + t) as f64 / 2.0,
                radius * radius / 2.0,
            );
            let uncond = double_factorial(t as i64 - 1);
            let drift = (uncond * cond / ball - uncond).abs();
            assert!(drift < budget, "order {t}: drift {drift} vs {budget}");
        }
    }
}
