//! Robust mean learning: spectral baseline filter, norm pruning, the
//! higher-order Hermite-tensor filter loop, suspicious-subspace extraction,
//! sphere cover, median bisection, and LP recovery; plus the moment-matching
//! acceptance checker.

use crate::samples::SampleMatrix;
use crate::special::{factorial, std_normal_moment};
use crate::sqoracle::{QueryLedger, QueryRecord};
use crate::tensorher::{hermite_table, SymmetricTensor};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Reference tail for the polynomial filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailReference {
    /// Estimate the tail of h_A under fresh N(0, I) draws. Tail estimates are
    /// floored at 1/draws: an MC tail is only resolved to that scale.
    MonteCarlo { draws: usize },
    /// exp(2 - (T/r)^{2/t'}) with a user-supplied scale r.
    Analytic { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub eps: f64,
    /// Even moment order; defaults to 2 ceil(sqrt(ln(1/eps))).
    pub k: Option<usize>,
    /// C in the additive filter slack 2 eps / (C n^{2t'}).
    pub filter_threshold_const: f64,
    /// Constant inside the loop trigger eps (c_f ln(1/eps))^{t/2}.
    pub c_f: f64,
    pub tail_reference: TailReference,
    pub iteration_cap: usize,
    /// LP slack in units of eps.
    pub lp_slack: f64,
    /// Practical cap on dim(V): the cube cover has size l^O(l).
    pub max_subspace_dim: usize,
}

impl LearnerConfig {
    pub fn new(eps: f64) -> Result<Self> {
        let cfg = Self {
            eps,
            k: None,
            filter_threshold_const: 1.0,
            c_f: 1.0,
            tail_reference: TailReference::MonteCarlo { draws: 100_000 },
            iteration_cap: 40,
            lp_slack: 4.0,
            max_subspace_dim: 6,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eps && self.eps < 0.2) {
            return Err(Error::InvalidParam(format!("eps must lie in (0, 0.2), got {}", self.eps)));
        }
        if let Some(k) = self.k {
            if k < 2 || k % 2 != 0 {
                return Err(Error::InvalidParam(format!("k must be even and >= 2, got {k}")));
            }
        }
        if self.iteration_cap == 0 || self.lp_slack <= 0.0 || self.c_f <= 0.0 || self.filter_threshold_const <= 0.0 {
            return Err(Error::InvalidParam("nonpositive learner constant".into()));
        }
        Ok(())
    }

    pub fn resolved_k(&self) -> usize {
        self.k.unwrap_or_else(|| {
            let root = (1.0 / self.eps).ln().sqrt();
            2 * root.ceil() as usize
        })
    }
}

/// Accept-predicates applied in order; every estimate downstream conditions
/// on the whole chain.
#[derive(Debug, Clone)]
pub enum FilterPredicate {
    NormBall { radius: f64 },
    PolyThreshold { tensor: SymmetricTensor, threshold: f64 },
}

impl FilterPredicate {
    pub fn accepts(&self, x: &[f64]) -> bool {
        match self {
            FilterPredicate::NormBall { radius } => {
                x.iter().map(|v| v * v).sum::<f64>() <= radius * radius
            }
            FilterPredicate::PolyThreshold { tensor, threshold } => {
                tensor.h_eval(x).abs() <= *threshold
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterChain {
    pub steps: Vec<(FilterPredicate, f64)>,
}

impl FilterChain {
    pub fn accepts(&self, x: &[f64]) -> bool {
        self.steps.iter().all(|(p, _)| p.accepts(x))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total empirical mass rejected while the chain was being built.
    pub fn rejected_mass(&self) -> f64 {
        self.steps.iter().map(|(_, m)| m).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRecord {
    pub order: usize,
    pub threshold: f64,
    pub rejected_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnReport {
    pub estimate: Vec<f64>,
    pub baseline_estimate: Vec<f64>,
    /// Fraction of all samples rejected by the chain (prune + filters).
    pub rejected_mass_total: f64,
    pub filters: Vec<FilterRecord>,
    pub final_tensor_norms: Vec<f64>,
    pub norm_history: Vec<Vec<f64>>,
    pub retained_history: Vec<usize>,
    pub subspace_dim: usize,
    pub filter_iterations: usize,
    pub hit_iteration_cap: bool,
    pub lp_slack_used: f64,
    pub query_count: usize,
}

/// Iterated spectral filter: estimate the mean, remove directional outliers
/// until the top covariance eigenvalue is within 1 + eps ln(1/eps) of 1.
/// Returns the mean of the retained points and the retention mask.
pub fn baseline_filter_mean(samples: &SampleMatrix, eps: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = samples.dim();
    let total = samples.len();
    if total < n.max(8) {
        return Err(Error::InvalidParam(format!("need at least {} samples", n.max(8))));
    }
    if !(0.0 < eps && eps < 0.2) {
        return Err(Error::InvalidParam("eps must lie in (0, 0.2)".into()));
    }
    let stop = 1.0 + eps * (1.0 / eps).ln();
    let mut retained = vec![true; total];
    for _iter in 0..total {
        let idx: Vec<usize> = (0..total).filter(|&i| retained[i]).collect();
        if 2 * idx.len() < total {
            return Err(Error::ConditioningMass(idx.len() as f64 / total as f64));
        }
        let m = idx.len() as f64;
        let mut mean = vec![0.0; n];
        for &i in &idx {
            for (mj, xj) in mean.iter_mut().zip(samples.row(i)) {
                *mj += xj;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);

        let mut cov = DMatrix::<f64>::zeros(n, n);
        let mut centered = vec![0.0; n];
        for &i in &idx {
            for (c, (xj, mj)) in centered.iter_mut().zip(samples.row(i).iter().zip(&mean)) {
                *c = xj - mj;
            }
            for p in 0..n {
                let cp = centered[p];
                if cp == 0.0 {
                    continue;
                }
                for q in p..n {
                    cov[(p, q)] += cp * centered[q];
                }
            }
        }
        for p in 0..n {
            for q in p..n {
                let v = cov[(p, q)] / m;
                cov[(p, q)] = v;
                cov[(q, p)] = v;
            }
        }
        let eig = cov.symmetric_eigen();
        let (mut top_val, mut top_idx) = (f64::NEG_INFINITY, 0);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > top_val {
                top_val = l;
                top_idx = i;
            }
        }
        if top_val <= stop {
            return Ok((mean, retained));
        }
        let v: Vec<f64> = eig.eigenvectors.column(top_idx).iter().copied().collect();

        let z: Vec<f64> = idx
            .iter()
            .map(|&i| {
                samples
                    .row(i)
                    .iter()
                    .zip(&v)
                    .zip(&mean)
                    .map(|((x, vi), mi)| (x - mi) * vi)
                    .sum()
            })
            .collect();
        let med = median_in_place(&mut z.clone());
        let mut scored: Vec<(f64, usize)> = z
            .iter()
            .zip(&idx)
            .map(|(&zi, &i)| ((zi - med).abs(), i))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        // Deepest cut whose empirical tail exceeds twice the Gaussian tail
        // (plus a 3/m additive guard against firing on pure noise).
        let mut cut = 0usize;
        for (r0, &(t, _)) in scored.iter().enumerate() {
            let r = r0 + 1;
            let emp = r as f64 / m;
            if emp > 2.0 * erfc(t / std::f64::consts::SQRT_2) + 3.0 / m {
                cut = r;
            }
        }
        if cut == 0 {
            // Eigenvalue large but no tail threshold qualifies; stop rather
            // than loop without progress.
            return Ok((mean, retained));
        }
        for &(_, i) in scored.iter().take(cut) {
            retained[i] = false;
        }
        let _ = z;
    }
    Err(Error::IterationCap("baseline filter exceeded the sample count".into()))
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    *m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction of (sorted ascending) values >= threshold.
fn tail_fraction(sorted: &[f64], threshold: f64) -> f64 {
    let idx = sorted.partition_point(|v| *v < threshold);
    (sorted.len() - idx) as f64 / sorted.len() as f64
}

struct Working<'a> {
    shifted: SampleMatrix,
    retained: Vec<usize>,
    config: &'a LearnerConfig,
    k: usize,
    ledger: QueryLedger,
}

impl Working<'_> {
    fn apply_predicate(&mut self, pred: &FilterPredicate) -> f64 {
        let before = self.retained.len();
        let shifted = &self.shifted;
        self.retained.retain(|&i| pred.accepts(shifted.row(i)));
        (before - self.retained.len()) as f64 / self.shifted.len() as f64
    }

    /// Re-estimates the Hermite moment tensors for all orders 1..=k over the
    /// retained (chain-conditioned) samples.
    fn estimate_tensors(&mut self) -> Result<Vec<SymmetricTensor>> {
        let n = self.shifted.dim();
        let total = self.shifted.len();
        if 2 * self.retained.len() < total {
            return Err(Error::ConditioningMass(self.retained.len() as f64 / total as f64));
        }
        let mut tensors: Vec<SymmetricTensor> =
            (1..=self.k).map(|t| SymmetricTensor::zeros(n, t)).collect();
        let mut sums: Vec<Vec<f64>> = tensors.iter().map(|t| vec![0.0; t.slots()]).collect();
        let width = self.k + 1;
        let mut table = vec![0.0; n * width];
        for &i in &self.retained {
            hermite_table(self.shifted.row(i), self.k, &mut table);
            for (tensor, sum) in tensors.iter().zip(sums.iter_mut()) {
                for slot in 0..tensor.slots() {
                    let mut p = 1.0;
                    for &(c, cnt) in tensor.counts_sparse(slot) {
                        p *= table[c as usize * width + cnt as usize];
                    }
                    sum[slot] += p;
                }
            }
        }
        let m = self.retained.len() as f64;
        for (ti, tensor) in tensors.iter_mut().enumerate() {
            let order = ti + 1;
            let inv_sqrt = 1.0 / factorial(order).sqrt();
            let tol = self.config.eps * (n as f64).powf(-(order as f64) / 2.0);
            for slot in 0..tensor.slots() {
                let value = sums[ti][slot] / m * inv_sqrt;
                tensor.values_mut()[slot] = value;
                self.ledger.push(QueryRecord { tolerance: tol, answer: value, truth: None });
            }
            // One shared conditioning-mass query per order.
            self.ledger.push(QueryRecord {
                tolerance: tol,
                answer: m / total as f64,
                truth: None,
            });
        }
        Ok(tensors)
    }

    /// |h_A| over the retained samples, sorted ascending.
    fn abs_h_sorted(&self, a: &SymmetricTensor) -> Vec<f64> {
        let n = self.shifted.dim();
        let width = a.order() + 1;
        let mut table = vec![0.0; n * width];
        let mut vals: Vec<f64> = self
            .retained
            .iter()
            .map(|&i| {
                hermite_table(self.shifted.row(i), a.order(), &mut table);
                a.h_eval_with_table(&table).abs()
            })
            .collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        vals
    }
}

fn mc_reference_tail<R: Rng + ?Sized>(
    a: &SymmetricTensor,
    draws: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = a.dim();
    let width = a.order() + 1;
    let mut table = vec![0.0; n * width];
    let mut x = vec![0.0; n];
    let mut vals: Vec<f64> = (0..draws)
        .map(|_| {
            for xi in x.iter_mut() {
                *xi = rng.sample(StandardNormal);
            }
            hermite_table(&x, a.order(), &mut table);
            a.h_eval_with_table(&table).abs()
        })
        .collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

/// Smallest integer T whose empirical tail Pr[|h_A| >= T+1] reaches
/// 3 * reference_tail + 2 eps / (C n^{2t'}); None when no threshold separates.
fn find_threshold(
    emp_sorted: &[f64],
    reference: &dyn Fn(f64) -> f64,
    slack: f64,
) -> Option<usize> {
    let max_h = emp_sorted.last().copied().unwrap_or(0.0);
    let t_max = max_h.ceil() as usize + 1;
    for t in 0..=t_max {
        let thr = (t + 1) as f64;
        let emp = tail_fraction(emp_sorted, thr);
        if emp == 0.0 {
            return None;
        }
        if emp >= 3.0 * reference(thr) + slack {
            return Some(t);
        }
    }
    None
}

/// The higher-order robust mean learner. `samples` is an eps-corrupted
/// N(mu, I); the returned report carries the estimate, the baseline estimate
/// it refines, and the full filter/subspace diagnostics.
pub fn robust_mean_learn<R: Rng + ?Sized>(
    samples: &SampleMatrix,
    eps: f64,
    config: &LearnerConfig,
    rng: &mut R,
) -> Result<LearnReport> {
    let mut config = *config;
    config.eps = eps;
    config.validate()?;
    let n = samples.dim();
    let total = samples.len();
    let k = config.resolved_k();

    // Step 1-2: baseline estimate, then recenter.
    let (baseline, _mask) = baseline_filter_mean(samples, eps)?;
    let mut shifted = SampleMatrix::new(n);
    let mut row = vec![0.0; n];
    for r in samples.rows() {
        for ((o, x), b) in row.iter_mut().zip(r).zip(&baseline) {
            *o = x - b;
        }
        shifted.push_row(&row);
    }

    let mut work = Working {
        shifted,
        retained: (0..total).collect(),
        config: &config,
        k,
        ledger: QueryLedger::new(),
    };

    // Step 3: norm prune.
    let radius = (2.0 * n as f64 * (1.0 / eps).ln()).sqrt();
    let prune = FilterPredicate::NormBall { radius };
    let prune_rejected = work.apply_predicate(&prune);
    let mut chain = FilterChain::default();
    chain.steps.push((prune, prune_rejected));

    let ln_term = config.c_f * (1.0 / eps).ln();
    let loop_threshold = |t: usize| eps * ln_term.powf(t as f64 / 2.0);

    // Steps 4-6: estimate tensors, filter while any norm is too large.
    let mut tensors = work.estimate_tensors()?;
    let mut filters: Vec<FilterRecord> = Vec::new();
    let mut norm_history: Vec<Vec<f64>> = Vec::new();
    let mut retained_history: Vec<usize> = vec![work.retained.len()];
    let mut iterations = 0usize;
    let mut hit_cap = false;
    loop {
        let norms: Vec<f64> = tensors.iter().map(|t| t.frobenius_norm()).collect();
        norm_history.push(norms.clone());
        let triggering: Vec<usize> = (1..=k)
            .filter(|&t| norms[t - 1] >= loop_threshold(t))
            .collect();
        if triggering.is_empty() {
            break;
        }
        let mut applied = false;
        for &t_prime in &triggering {
            let a = match tensors[t_prime - 1].normalized() {
                Some(a) => a,
                None => continue,
            };
            let emp = work.abs_h_sorted(&a);
            let slack =
                2.0 * eps / (config.filter_threshold_const * (n as f64).powi(2 * t_prime as i32));
            let found = match config.tail_reference {
                TailReference::MonteCarlo { draws } => {
                    let mc = mc_reference_tail(&a, draws, rng);
                    let floor = 1.0 / draws as f64;
                    work.ledger.push(QueryRecord {
                        tolerance: floor,
                        answer: mc.len() as f64,
                        truth: None,
                    });
                    find_threshold(&emp, &|thr| tail_fraction(&mc, thr).max(floor), slack)
                }
                TailReference::Analytic { r } => find_threshold(
                    &emp,
                    &|thr| {
                        let t_int = thr - 1.0;
                        (2.0 - (t_int.max(0.0) / r).powf(2.0 / t_prime as f64)).exp().min(1.0)
                    },
                    slack,
                ),
            };
            work.ledger.push(QueryRecord {
                tolerance: slack,
                answer: found.map(|t| t as f64).unwrap_or(-1.0),
                truth: None,
            });
            if let Some(t_thr) = found {
                let threshold = (t_thr + 1) as f64;
                let pred = FilterPredicate::PolyThreshold { tensor: a, threshold };
                let rejected = work.apply_predicate(&pred);
                chain.steps.push((pred, rejected));
                filters.push(FilterRecord { order: t_prime, threshold, rejected_mass: rejected });
                retained_history.push(work.retained.len());
                iterations += 1;
                applied = true;
                break;
            }
        }
        if !applied {
            // Norms exceed the trigger but no tail separates from the
            // Gaussian reference: nothing filterable remains.
            break;
        }
        tensors = work.estimate_tensors()?;
        if iterations >= config.iteration_cap {
            hit_cap = true;
            norm_history.push(tensors.iter().map(|t| t.frobenius_norm()).collect());
            break;
        }
    }

    let final_norms: Vec<f64> = tensors.iter().map(|t| t.frobenius_norm()).collect();

    // Step 7-8: suspicious subspace from Gram-side singular vectors.
    let hard_cap = (1..=k).map(|t| ln_term.powf(t as f64 / 2.0)).sum::<f64>().ceil() as usize;
    let dim_cap = hard_cap.min(config.max_subspace_dim);
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for tensor in &tensors {
        for (sigma, vec) in tensor.singular_pairs() {
            if sigma > eps {
                candidates.push((sigma, vec));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (_, mut v) in candidates {
        if basis.len() >= dim_cap {
            break;
        }
        for b in &basis {
            let d = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= d * bi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let subspace_dim = basis.len();

    // Steps 9-11: cover, medians by bisection (unconditioned samples), LP.
    let mut estimate = baseline.clone();
    let mut lp_slack_used = config.lp_slack * eps;
    if subspace_dim > 0 {
        let cover = sphere_cover(subspace_dim);
        let bracket = 3.0 * (eps * (1.0 / eps).ln().sqrt() + eps);
        let mut medians = Vec::with_capacity(cover.len());
        for s in &cover {
            // Lift the cover vector to R^n.
            let mut w = vec![0.0; n];
            for (coef, b) in s.iter().zip(&basis) {
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi += coef * bi;
                }
            }
            let mut z: Vec<f64> = work.shifted.rows().map(|r| dot(r, &w)).collect();
            z.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (mut lo, mut hi) = (-bracket, bracket);
            let mut m_v = 0.0;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                let p = tail_fraction(&z, mid);
                work.ledger.push(QueryRecord { tolerance: eps / 2.0, answer: p, truth: None });
                m_v = mid;
                if p > 0.5 + 2.5 * eps {
                    lo = mid;
                } else if p < 0.5 - 2.5 * eps {
                    hi = mid;
                } else {
                    break;
                }
            }
            medians.push(m_v);
        }
        let (mu_v, slack_used) = lp_feasible(&cover, &medians, config.lp_slack * eps)?;
        lp_slack_used = slack_used;
        for (coef, b) in mu_v.iter().zip(&basis) {
            for (ei, bi) in estimate.iter_mut().zip(b) {
                *ei += coef * bi;
            }
        }
    }

    let rejected_mass_total = chain.rejected_mass();
    Ok(LearnReport {
        estimate,
        baseline_estimate: baseline,
        rejected_mass_total,
        filters,
        final_tensor_norms: final_norms,
        norm_history,
        retained_history,
        subspace_dim,
        filter_iterations: iterations,
        hit_iteration_cap: hit_cap,
        lp_slack_used,
        query_count: work.ledger.count(),
    })
}

/// Cube-grid cover of the unit sphere in R^l: cells of side 1/(2 sqrt(l))
/// in [-1, 1]^l that straddle the sphere contribute their normalized center.
/// Every unit vector is within 1/2 of some cover element.
pub fn sphere_cover(l: usize) -> Vec<Vec<f64>> {
    assert!(l >= 1, "cover needs a positive dimension");
    let cells_per_axis = (4.0 * (l as f64).sqrt()).ceil() as usize;
    let side = 2.0 / cells_per_axis as f64;
    let mut out = Vec::new();
    let mut idx = vec![0usize; l];
    loop {
        // Box distance bounds to the origin.
        let mut min_sq = 0.0;
        let mut max_sq = 0.0;
        for (d, &i) in idx.iter().enumerate() {
            let center = -1.0 + (i as f64 + 0.5) * side;
            let lo = (center.abs() - side / 2.0).max(0.0);
            let hi = center.abs() + side / 2.0;
            min_sq += lo * lo;
            max_sq += hi * hi;
            let _ = d;
        }
        if min_sq <= 1.0 && max_sq >= 1.0 {
            let mut center: Vec<f64> = idx
                .iter()
                .map(|&i| -1.0 + (i as f64 + 0.5) * side)
                .collect();
            let norm = dot(&center, &center).sqrt();
            if norm > 1e-12 {
                center.iter_mut().for_each(|x| *x /= norm);
                out.push(center);
            }
        }
        // Odometer.
        let mut pos = l;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < cells_per_axis {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Kaczmarz feasibility pass for |<v_i, mu> - m_i| <= slack; widens the slack
/// once by 2x before giving up.
fn lp_feasible(cover: &[Vec<f64>], medians: &[f64], slack: f64) -> Result<(Vec<f64>, f64)> {
    let l = cover.first().map(|v| v.len()).unwrap_or(0);
    let mut mu = vec![0.0; l];
    for widen in 0..2 {
        let s = slack * 2f64.powi(widen);
        for _ in 0..10_000 {
            let mut worst = 0.0;
            let mut worst_i = usize::MAX;
            for (i, v) in cover.iter().enumerate() {
                let viol = (dot(v, &mu) - medians[i]).abs();
                if viol > worst {
                    worst = viol;
                    worst_i = i;
                }
            }
            if worst <= s {
                return Ok((mu, s));
            }
            let v = &cover[worst_i];
            let residual = medians[worst_i] - dot(v, &mu);
            for (m, vi) in mu.iter_mut().zip(v) {
                *m += residual * vi;
            }
        }
    }
    Err(Error::LpInfeasible(slack * 2.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCheck {
    pub accept: bool,
    pub k: usize,
    pub first_violation: Option<usize>,
}

/// Accepts iff |moment_t - E_{N(0,1)} X^t| <= (t-1)! (delta/eps)^t eps / t for
/// all t <= k, with k = 2 ceil(eps sqrt(ln(1/eps)) / delta).
pub fn moment_matching_check(moments: &[f64], eps: f64, delta: f64) -> Result<MomentCheck> {
    if !(delta > eps && eps > 0.0) {
        return Err(Error::InvalidParam(format!("need delta > eps > 0, got ({eps}, {delta})")));
    }
    let k = 2 * ((eps * (1.0 / eps).ln().sqrt() / delta).ceil() as usize).max(1);
    if moments.len() < k {
        return Err(Error::InvalidParam(format!(
            "need moments 1..={k}, got {}",
            moments.len()
        )));
    }
    for t in 1..=k {
        let tol = factorial(t - 1) * (delta / eps).powi(t as i32) * eps / t as f64;
        let gap = (moments[t - 1] - std_normal_moment(t)).abs();
        if gap > tol {
            return Ok(MomentCheck { accept: false, k, first_violation: Some(t) });
        }
    }
    Ok(MomentCheck { accept: true, k, first_violation: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::oned::Univariate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn contaminate(m: &mut SampleMatrix, eps: f64, point: &[f64]) {
        let bad = (m.len() as f64 * eps).floor() as usize;
        let mut out = SampleMatrix::new(m.dim());
        for (i, r) in m.rows().enumerate() {
            if i < bad {
                out.push_row(point);
            } else {
                out.push_row(r);
            }
        }
        *m = out;
    }

    fn norm(v: &[f64]) -> f64 {
        dot(v, v).sqrt()
    }

    #[test]
    fn baseline_pure_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let (n, count) = (16usize, 40_000usize);
        let samples = gaussian_samples(n, count, &vec![0.0; n], &mut rng);
        let (est, mask) = baseline_filter_mean(&samples, 0.1).unwrap();
        assert!(mask.iter().all(|&b| b));
        let bound = 4.0 * (n as f64 / count as f64).sqrt() + 0.01;
        assert!(norm(&est) <= bound, "{} vs {}", norm(&est), bound);
    }

    #[test]
    fn baseline_beats_raw_mean_under_contamination() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let (n, count, eps) = (16usize, 40_000usize, 0.1f64);
        let mut samples = gaussian_samples(n, count, &vec![0.0; n], &mut rng);
        let mut spike = vec![0.0; n];
        spike[0] = 10.0;
        contaminate(&mut samples, eps, &spike);
        let raw_err = norm(&samples.mean());
        let (est, _) = baseline_filter_mean(&samples, eps).unwrap();
        let err = norm(&est);
        let bound = eps * (1.0 / eps).ln().sqrt() * 5.0;
        assert!(err <= bound, "error {err} vs bound {bound}");
        assert!(err < raw_err, "error {err} not below raw {raw_err}");
    }

    #[test]
    fn learner_pure_data_close_to_empirical_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let (n, count, eps) = (16usize, 50_000usize, 0.05f64);
        let samples = gaussian_samples(n, count, &vec![0.0; n], &mut rng);
        let config = LearnerConfig::new(eps).unwrap();
        let report = robust_mean_learn(&samples, eps, &config, &mut rng).unwrap();
        let emp_err = norm(&samples.mean());
        assert!(norm(&report.estimate) <= emp_err + 0.02);
        assert!(report.rejected_mass_total <= 3.0 * eps);
    }

    #[test]
    fn learner_filters_inlier_contamination() {
        // Contamination at 5 e_1 survives the norm prune, so the tensor loop
        // has to find it.
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let (n, count, eps) = (8usize, 60_000usize, 0.05f64);
        let mut samples = gaussian_samples(n, count, &vec![0.0; n], &mut rng);
        let mut spike = vec![0.0; n];
        spike[0] = 5.0;
        contaminate(&mut samples, eps, &spike);
        let config = LearnerConfig::new(eps).unwrap();
        let report = robust_mean_learn(&samples, eps, &config, &mut rng).unwrap();
        assert!(!report.filters.is_empty(), "no polynomial filter fired");
        // Monotone progress: retained counts strictly decrease per filter.
        for w in report.retained_history.windows(2) {
            assert!(w[1] < w[0]);
        }
        let err = norm(&report.estimate);
        assert!(err <= 5.0 * eps, "error {err}");
        let base_err = norm(&report.baseline_estimate);
        assert!(err <= base_err + 0.02, "err {err} vs baseline {base_err}");
    }

    #[test]
    fn learner_on_matched_instance_exits_quietly() {
        // A hidden-direction lift of the moment-matched perturbation is
        // invisible to the tensor loop: all norms stay under the trigger.
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let (n, count, eps) = (8usize, 60_000usize, 0.05f64);
        let inst = instances::robust_mean_instance(0.04, 4).unwrap();
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        let h = instances::HiddenDirectionDistribution::new(
            Univariate::Perturbed(inst),
            v,
        )
        .unwrap();
        let samples = instances::hidden_direction_sample(&h, &mut rng, count).unwrap();
        let config = LearnerConfig::new(eps).unwrap();
        let report = robust_mean_learn(&samples, eps, &config, &mut rng).unwrap();
        let k = config.resolved_k();
        let ln_term = (1.0f64 / eps).ln();
        for t in 1..=k {
            let bound = eps * ln_term.powf(t as f64 / 2.0);
            assert!(
                report.final_tensor_norms[t - 1] < bound,
                "order {t}: norm {} vs {bound}",
                report.final_tensor_norms[t - 1]
            );
        }
    }

    #[test]
    fn cover_radius_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for l in [1usize, 2, 3] {
            let cover = sphere_cover(l);
            assert!(!cover.is_empty());
            for _ in 0..10_000 {
                let mut v: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                let best = cover
                    .iter()
                    .map(|c| {
                        let d: f64 = c.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
                        d.sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 0.5 + 1e-12, "l={l}: nearest cover point at {best}");
            }
        }
    }

    #[test]
    fn lp_recovers_projections() {
        let cover = sphere_cover(2);
        let target = [0.03, -0.01];
        let medians: Vec<f64> = cover.iter().map(|v| dot(v, &target)).collect();
        let (mu, slack) = lp_feasible(&cover, &medians, 0.05).unwrap();
        for (v, m) in cover.iter().zip(&medians) {
            assert!((dot(v, &mu) - m).abs() <= slack + 1e-12);
        }
        assert!((mu[0] - target[0]).abs() < 0.1 && (mu[1] - target[1]).abs() < 0.1);
    }

    #[test]
    fn moment_check_cases() {
        // Exact standard moments accept.
        let (eps, delta) = (0.02, 0.05);
        let k = 2 * ((eps * (1.0f64 / eps).ln().sqrt() / delta).ceil() as usize).max(1);
        let std_moments: Vec<f64> = (1..=k + 2).map(std_normal_moment).collect();
        let check = moment_matching_check(&std_moments, eps, delta).unwrap();
        assert!(check.accept);

        // Shifted Gaussians at mean 10 delta are rejected at some t <= k.
        for delta in [0.05, 0.1] {
            let eps = delta / 2.0;
            let shift = 10.0 * delta;
            let g = crate::oned::Gaussian1D { mean: shift, variance: 1.0 };
            let k = 2 * ((eps * (1.0f64 / eps).ln().sqrt() / delta).ceil() as usize).max(1);
            let moments: Vec<f64> = (1..=k).map(|t| g.raw_moment(t)).collect();
            let check = moment_matching_check(&moments, eps, delta).unwrap();
            assert!(!check.accept, "delta {delta}: shifted Gaussian accepted");
        }

        // The matched instance (m >= k) accepts.
        let inst = Univariate::Perturbed(instances::robust_mean_instance(1e-3, 6).unwrap());
        let (eps, delta) = (0.02, 0.05);
        let moments: Vec<f64> = (1..=6).map(|t| inst.moment(t)).collect();
        let check = moment_matching_check(&moments, eps, delta).unwrap();
        assert!(check.accept);
    }

    #[test]
    fn config_validation() {
        assert!(LearnerConfig::new(0.3).is_err());
        let mut c = LearnerConfig::new(0.05).unwrap();
        assert_eq!(c.resolved_k(), 4);
        c.k = Some(3);
        assert!(c.validate().is_err());
    }
}
