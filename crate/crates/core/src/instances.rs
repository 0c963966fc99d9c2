//! Constructors for the moment-matched hard instances, the hidden-direction
//! lift to R^n, and near-orthogonal direction packings.

use crate::oned::{
    gaussian_legendre_mean, Gaussian1D, Mixture1D, PerturbedGaussian1D, Univariate,
};
use crate::samples::SampleMatrix;
use crate::special::{std_normal_cdf, std_normal_moment, std_normal_pdf};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Product distribution equal to `a` along the unit direction `v` and standard
/// Gaussian on the orthogonal complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenDirectionDistribution {
    pub a: Univariate,
    pub v: Vec<f64>,
}

impl HiddenDirectionDistribution {
    pub fn new(a: Univariate, v: Vec<f64>) -> Result<Self> {
        let norm = dot(&v, &v).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("direction norm {norm}, expected 1")));
        }
        Ok(Self { a, v })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Density A(v.x) exp(-|x - (v.x)v|^2/2) / (2 pi)^{(n-1)/2}, evaluated as
    /// the standard Gaussian density reweighted along v.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        let s = dot(&self.v, x);
        let g_full: f64 = x.iter().map(|&xi| std_normal_pdf(xi)).product();
        g_full * self.a.pdf(s) / std_normal_pdf(s)
    }
}

/// Unit vectors with a certified bound on pairwise inner products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionPack {
    pub vectors: Vec<Vec<f64>>,
    /// Actual maximum of |v . v'| over distinct pairs.
    pub max_inner: f64,
    pub sparsity: Option<usize>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// TV distance between equal-variance Gaussians: 2 Phi(|m1 - m2| / (2 sd)) - 1.
fn equal_variance_tv(m1: f64, m2: f64, variance: f64) -> f64 {
    2.0 * std_normal_cdf((m1 - m2).abs() / (2.0 * variance.sqrt())) - 1.0
}

/// Mixture of k Gaussians with common variance delta = 1/(k^2 ln^2(k + 1/eps))
/// at the rescaled Gauss-Hermite nodes; matches N(0,1) on moments 1..2k-1 and
/// has pairwise component TV at least 1 - eps.
pub fn gmm_hard_instance(k: usize, eps: f64) -> Result<Mixture1D> {
    if !(2..=10).contains(&k) {
        return Err(Error::InvalidParam(format!("gmm instance needs 2 <= k <= 10, got {k}")));
    }
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::InvalidParam(format!("eps must lie in (0,1), got {eps}")));
    }
    let kf = k as f64;
    let delta = 1.0 / (kf * kf * (kf + 1.0 / eps).ln().powi(2));
    let rule = crate::polybasis::hermite_quadrature(k)?;
    let scale = (1.0 - delta).sqrt();
    let mix = Mixture1D::new(
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| Ok((w, Gaussian1D::new(scale * x, delta)?)))
            .collect::<Result<Vec<_>>>()?,
    )?;
    for (i, ci) in mix.components.iter().enumerate() {
        for cj in mix.components.iter().skip(i + 1) {
            let tv = equal_variance_tv(ci.mean, cj.mean, delta);
            if tv < 1.0 - eps {
                return Err(Error::Certificate(format!(
                    "component TV {tv:.6} < 1 - eps between means {} and {}",
                    ci.mean, cj.mean
                )));
            }
        }
    }
    Ok(mix)
}

/// Legendre coefficients of the degree-m polynomial matching the moment gap
/// between N(0,1) and `base` on [-C, C]:
/// a_j = ((2j+1)/(2C)) * (E_{N(0,1)}[P_j(X/C)] - E_base[P_j(X/C)]).
fn moment_gap_coefficients(base: &Gaussian1D, m: usize, half_width: f64) -> Vec<f64> {
    let std = Gaussian1D { mean: 0.0, variance: 1.0 };
    (0..=m)
        .map(|j| {
            let gap = gaussian_legendre_mean(&std, j, half_width)
                - gaussian_legendre_mean(base, j, half_width);
            (2.0 * j as f64 + 1.0) / (2.0 * half_width) * gap
        })
        .collect()
}

fn check_matched_moments(d: &Univariate, m: usize, tol: f64) -> Result<()> {
    for t in 1..=m {
        let residual = (d.moment(t) - std_normal_moment(t)).abs();
        if residual > tol {
            return Err(Error::Certificate(format!(
                "moment {t} residual {residual:.3e} exceeds {tol:.1e}"
            )));
        }
    }
    Ok(())
}

/// Perturbation of N(delta, 1) on [-C, C], C = sqrt(ln(1/delta)) - delta, that
/// matches the first m moments of N(0,1) while staying TV-close to N(delta, 1).
pub fn robust_mean_instance(delta: f64, m: usize) -> Result<PerturbedGaussian1D> {
    if !(0.0 < delta && delta < 0.05) {
        return Err(Error::InvalidParam(format!("delta must lie in (0, 0.05), got {delta}")));
    }
    if m == 0 || m > 16 {
        return Err(Error::InvalidParam(format!("m must lie in 1..=16, got {m}")));
    }
    let half_width = (1.0 / delta).ln().sqrt() - delta;
    if half_width <= 0.0 {
        return Err(Error::InvalidParam("degenerate half width".into()));
    }
    let base = Gaussian1D::new(delta, 1.0)?;
    let coeffs = moment_gap_coefficients(&base, m, half_width);
    let instance = PerturbedGaussian1D {
        base,
        correction_coeffs: coeffs,
        half_width,
        correction_sign: 1.0,
    };
    instance.validate(10_000)?;
    check_matched_moments(&Univariate::Perturbed(instance.clone()), m, 1e-8)?;
    Ok(instance)
}

/// Perturbation of N(0, (1-delta)^2) on [-C, C], C = 0.5 sqrt(ln(1/delta)),
/// matching the first m moments of N(0,1). Odd coefficients vanish exactly by
/// symmetry.
pub fn robust_cov_instance(delta: f64, m: usize) -> Result<PerturbedGaussian1D> {
    if !(0.0 < delta && delta < 1.0 / 3.0) {
        return Err(Error::InvalidParam(format!("delta must lie in (0, 1/3), got {delta}")));
    }
    if !(2..=16).contains(&m) {
        return Err(Error::InvalidParam(format!("m must lie in 2..=16, got {m}")));
    }
    let half_width = 0.5 * (1.0 / delta).ln().sqrt();
    let sd = 1.0 - delta;
    let base = Gaussian1D::new(0.0, sd * sd)?;
    // The correction enters with sign -1, so its coefficients are built from
    // the gap (base - G); even symmetry zeroes the odd ones exactly.
    let mut coeffs: Vec<f64> = moment_gap_coefficients(&base, m, half_width)
        .into_iter()
        .map(|a| -a)
        .collect();
    for (j, c) in coeffs.iter_mut().enumerate() {
        if j % 2 == 1 {
            *c = 0.0;
        }
    }
    let instance = PerturbedGaussian1D {
        base,
        correction_coeffs: coeffs,
        half_width,
        correction_sign: -1.0,
    };
    instance.validate(10_000)?;
    check_matched_moments(&Univariate::Perturbed(instance.clone()), m, 1e-8)?;
    Ok(instance)
}

/// Three-component mixture matching N(0,1) on the first three moments:
/// (1-eps) N(0, (1/5-eps)/(1-eps)) + (eps/2) N(+/- sqrt(4/(5 eps)), 1).
pub fn cov_tradeoff_instance(eps: f64) -> Result<Mixture1D> {
    if !(0.0 < eps && eps < 0.19) {
        return Err(Error::InvalidParam(format!("eps must lie in (0, 0.19), got {eps}")));
    }
    let center_var = (0.2 - eps) / (1.0 - eps);
    let spike = (4.0 / (5.0 * eps)).sqrt();
    Mixture1D::new(vec![
        (1.0 - eps, Gaussian1D::new(0.0, center_var)?),
        (eps / 2.0, Gaussian1D::new(spike, 1.0)?),
        (eps / 2.0, Gaussian1D::new(-spike, 1.0)?),
    ])
}

/// Two-component mixture with mean exactly zero:
/// (1-delta) N(eps, 1) + delta N(-(1-delta) eps / delta, 1).
pub fn sparse_mean_instance(eps: f64, delta: f64) -> Result<Mixture1D> {
    if !(0.0 < eps && eps < 1.0) || !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParam("eps and delta must lie in (0,1)".into()));
    }
    if delta > eps {
        return Err(Error::InvalidParam(format!("need delta <= eps, got {delta} > {eps}")));
    }
    Mixture1D::new(vec![
        (1.0 - delta, Gaussian1D::new(eps, 1.0)?),
        (delta, Gaussian1D::new(-(1.0 - delta) * eps / delta, 1.0)?),
    ])
}

/// Draws `count` rows of s v + g_perp with s ~ A and g_perp standard Gaussian
/// on the complement of v.
pub fn hidden_direction_sample<R: Rng + ?Sized>(
    h: &HiddenDirectionDistribution,
    rng: &mut R,
    count: usize,
) -> Result<SampleMatrix> {
    let n = h.dim();
    let s = h.a.sample(rng, count)?;
    let mut out = SampleMatrix::new(n);
    let mut row = vec![0.0; n];
    for &si in &s {
        for r in row.iter_mut() {
            *r = rng.sample(StandardNormal);
        }
        let along = dot(&row, &h.v);
        for (r, &vi) in row.iter_mut().zip(&h.v) {
            *r += (si - along) * vi;
        }
        out.push_row(&row);
    }
    Ok(out)
}

/// Rejection-sampled packing of (optionally k-sparse) unit vectors with all
/// pairwise |v . v'| below `max_inner`. Fails after 100 * count consecutive
/// rejections.
pub fn direction_pack<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    max_inner: f64,
    sparsity: Option<usize>,
    rng: &mut R,
) -> Result<DirectionPack> {
    if count == 0 || n == 0 {
        return Err(Error::InvalidParam("need n >= 1 and count >= 1".into()));
    }
    if let Some(k) = sparsity {
        if k == 0 || k > n {
            return Err(Error::InvalidParam(format!("sparsity {k} out of range for n = {n}")));
        }
    }
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut consecutive_rejections = 0usize;
    let cap = 100 * count;
    while vectors.len() < count {
        let candidate = match sparsity {
            None => {
                let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dot(&v, &v).sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                v
            }
            Some(k) => {
                // Exactly k coordinates equal to 1/sqrt(k).
                let mut v = vec![0.0; n];
                let idx = rand::seq::index::sample(rng, n, k);
                let val = 1.0 / (k as f64).sqrt();
                for i in idx {
                    v[i] = val;
                }
                v
            }
        };
        let ok = vectors
            .iter()
            .all(|w| dot(w, &candidate).abs() <= max_inner + 1e-12);
        if ok {
            vectors.push(candidate);
            consecutive_rejections = 0;
        } else {
            consecutive_rejections += 1;
            if consecutive_rejections >= cap {
                return Err(Error::PackingInfeasible(consecutive_rejections));
            }
        }
    }
    let mut certified: f64 = 0.0;
    for (i, v) in vectors.iter().enumerate() {
        for w in vectors.iter().skip(i + 1) {
            certified = certified.max(dot(v, w).abs());
        }
    }
    Ok(DirectionPack { vectors, max_inner: certified, sparsity })
}
