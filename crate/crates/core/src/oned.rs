//! Univariate distribution model: Gaussian mixtures and interval-perturbed
//! Gaussians, with sampling, exact moments, chi-square divergence, total
//! variation distance, Hermite expansions, and Ornstein-Uhlenbeck smoothing.

use crate::polybasis::{hermite_coefficients, legendre_coefficients, legendre_eval};
use crate::special::{factorial, std_normal_pdf};
use crate::{integrate, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Highest raw moment order supported by the exact moment machinery.
pub const MAX_MOMENT_ORDER: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParam(format!(
                "Gaussian needs finite mean and variance > 0, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let sd = self.variance.sqrt();
        std_normal_pdf((x - self.mean) / sd) / sd
    }

    /// Raw moment E[X^t] via m_t = mu m_{t-1} + (t-1) sigma^2 m_{t-2}.
    pub fn raw_moment(&self, t: usize) -> f64 {
        let (mut prev, mut cur) = (1.0, self.mean);
        if t == 0 {
            return 1.0;
        }
        for j in 2..=t {
            let next = self.mean * cur + (j as f64 - 1.0) * self.variance * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.variance.sqrt() * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl MixtureComponent {
    pub fn gaussian(&self) -> Gaussian1D {
        Gaussian1D { mean: self.mean, variance: self.variance }
    }
}

/// A finite Gaussian mixture; weights nonnegative and summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture1D {
    pub components: Vec<MixtureComponent>,
}

impl Mixture1D {
    pub fn new(components: Vec<(f64, Gaussian1D)>) -> Result<Self> {
        let mix = Self {
            components: components
                .into_iter()
                .map(|(w, g)| MixtureComponent { weight: w, mean: g.mean, variance: g.variance })
                .collect(),
        };
        mix.validate()?;
        Ok(mix)
    }

    pub fn single(g: Gaussian1D) -> Self {
        Self {
            components: vec![MixtureComponent { weight: 1.0, mean: g.mean, variance: g.variance }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParam("mixture needs at least one component".into()));
        }
        if self.components.iter().any(|c| c.weight < 0.0) {
            return Err(Error::InvalidParam("negative mixture weight".into()));
        }
        if self.components.iter().any(|c| c.variance <= 0.0) {
            return Err(Error::InvalidParam("non-positive component variance".into()));
        }
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("mixture weights sum to {sum}")));
        }
        Ok(())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.gaussian().pdf(x))
            .sum()
    }

    pub fn raw_moment(&self, t: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.gaussian().raw_moment(t))
            .sum()
    }
}

/// A Gaussian perturbed on [-C, C] by a scaled-Legendre polynomial:
/// pdf(x) = base(x) + sign * sum_j a_j P_j(x / C) for |x| <= C, base(x) outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedGaussian1D {
    pub base: Gaussian1D,
    pub correction_coeffs: Vec<f64>,
    pub half_width: f64,
    pub correction_sign: f64,
}

impl PerturbedGaussian1D {
    pub fn correction(&self, x: f64) -> f64 {
        if x.abs() > self.half_width {
            return 0.0;
        }
        let u = x / self.half_width;
        self.correction_sign
            * self
                .correction_coeffs
                .iter()
                .enumerate()
                .map(|(j, &a)| a * legendre_eval(j, u))
                .sum::<f64>()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.base.pdf(x) + self.correction(x)
    }

    /// Checks that the density is nonnegative on a grid over [-C, C] and that
    /// it integrates to 1 within 1e-9.
    pub fn validate(&self, grid_points: usize) -> Result<()> {
        if !(self.half_width > 0.0) {
            return Err(Error::InvalidParam("half_width must be positive".into()));
        }
        if self.correction_sign != 1.0 && self.correction_sign != -1.0 {
            return Err(Error::InvalidParam("correction_sign must be +1 or -1".into()));
        }
        let c = self.half_width;
        for i in 0..grid_points {
            let x = -c + 2.0 * c * i as f64 / (grid_points - 1) as f64;
            let v = self.pdf(x);
            if v < 0.0 {
                return Err(Error::InvalidDensity(format!(
                    "negative density {v:.3e} at x = {x:.6}"
                )));
            }
        }
        // The correction integrates to C * a_0 * P_0 terms only; check total mass.
        let corr_mass: f64 = self.correction_sign * self.correction_coeffs.first().copied().unwrap_or(0.0) * 2.0 * c;
        if (corr_mass).abs() > 1e-9 {
            return Err(Error::InvalidDensity(format!(
                "correction carries mass {corr_mass:.3e}"
            )));
        }
        Ok(())
    }
}

/// A one-dimensional density: Gaussian mixture or interval-perturbed Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Univariate {
    Mixture(Mixture1D),
    Perturbed(PerturbedGaussian1D),
}

impl Univariate {
    pub fn std_normal() -> Self {
        Univariate::Mixture(Mixture1D::single(Gaussian1D { mean: 0.0, variance: 1.0 }))
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Ok(Univariate::Mixture(Mixture1D::single(Gaussian1D::new(mean, variance)?)))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Univariate::Mixture(m) => m.pdf(x),
            Univariate::Perturbed(p) => p.pdf(x),
        }
    }

    /// Radius beyond which the density carries < 1e-10 mass on each side.
    pub fn tail_radius(&self) -> f64 {
        match self {
            Univariate::Mixture(m) => m
                .components
                .iter()
                .map(|c| c.mean.abs() + 10.0 * c.variance.sqrt())
                .fold(10.0, f64::max),
            Univariate::Perturbed(p) => {
                let b = p.base.mean.abs() + 10.0 * p.base.variance.sqrt();
                b.max(p.half_width + 1.0).max(10.0)
            }
        }
    }

    /// i.i.d. draws. Mixtures sample categorically then normally; perturbed
    /// densities use rejection against the envelope 2 * base_pdf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        match self {
            Univariate::Mixture(m) => {
                for _ in 0..count {
                    let mut u: f64 = rng.random();
                    let mut chosen = m.components.len() - 1;
                    for (i, c) in m.components.iter().enumerate() {
                        if u < c.weight {
                            chosen = i;
                            break;
                        }
                        u -= c.weight;
                    }
                    out.push(m.components[chosen].gaussian().sample(rng));
                }
            }
            Univariate::Perturbed(p) => {
                let mut attempts: usize = 0;
                while out.len() < count {
                    attempts += 1;
                    let x = p.base.sample(rng);
                    let envelope = 2.0 * p.base.pdf(x);
                    let u: f64 = rng.random();
                    if u * envelope <= p.pdf(x) {
                        out.push(x);
                    }
                    if attempts >= 1000 && (out.len() as f64) < 1e-3 * attempts as f64 {
                        return Err(Error::RejectionStalled);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact raw moment E[X^t]; closed form throughout (Gaussian recurrences
    /// plus Legendre-to-monomial moments on [-C, C] for the perturbation).
    pub fn moment(&self, t: usize) -> f64 {
        assert!(t <= MAX_MOMENT_ORDER, "moment order capped at {MAX_MOMENT_ORDER}");
        match self {
            Univariate::Mixture(m) => m.raw_moment(t),
            Univariate::Perturbed(p) => {
                let c = p.half_width;
                let table = legendre_x_moments(p.correction_coeffs.len().saturating_sub(1), t);
                let corr: f64 = p
                    .correction_coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| a * c.powi(t as i32 + 1) * table[j][t])
                    .sum();
                p.base.raw_moment(t) + p.correction_sign * corr
            }
        }
    }

    /// Numerically integrated CDF (used for goodness-of-fit checks).
    pub fn cdf(&self, x: f64) -> f64 {
        let r = self.tail_radius();
        if x <= -r {
            return 0.0;
        }
        let hi = x.min(r);
        let v = integrate::adaptive(|u| self.pdf(u), -r, hi, 1e-11);
        v.clamp(0.0, 1.0)
    }
}

/// Exact table of I[j][t] = integral of P_j(u) u^t du over [-1, 1], built by
/// the recurrence u P_j = ((j+1) P_{j+1} + j P_{j-1}) / (2j+1).
fn legendre_x_moments(max_j: usize, max_t: usize) -> Vec<Vec<f64>> {
    let jmax = max_j + max_t + 1;
    let mut table = vec![vec![0.0; max_t + 1]; jmax + 1];
    for (j, row) in table.iter_mut().enumerate() {
        row[0] = if j == 0 { 2.0 } else { 0.0 };
    }
    for t in 1..=max_t {
        for j in 0..=jmax.saturating_sub(t) {
            let jf = j as f64;
            let up = table[j + 1][t - 1];
            let down = if j == 0 { 0.0 } else { table[j - 1][t - 1] };
            table[j][t] = ((jf + 1.0) * up + jf * down) / (2.0 * jf + 1.0);
        }
    }
    table.truncate(max_j + 1);
    table
}

/// Correlation of two Gaussians relative to N(0,1):
/// chi_G(d1, d2) = integral of d1 d2 / G - 1, in closed form.
pub fn gaussian_cross_correlation(g1: &Gaussian1D, g2: &Gaussian1D) -> Result<f64> {
    let (m1, s1) = (g1.mean, g1.variance);
    let (m2, s2) = (g2.mean, g2.variance);
    let a = 0.5 / s1 + 0.5 / s2 - 0.5;
    if a <= 0.0 {
        return Err(Error::Diverged(format!(
            "Gaussian pair with variances ({s1}, {s2}) has divergent correlation integral"
        )));
    }
    let b = m1 / s1 + m2 / s2;
    let c = 0.5 * m1 * m1 / s1 + 0.5 * m2 * m2 / s2;
    Ok((b * b / (4.0 * a) - c).exp() / (2.0 * a * s1 * s2).sqrt() - 1.0)
}

/// chi^2(d, N(0,1)) = integral of d^2 / G - 1. Closed form for mixtures,
/// numerical integration for perturbed densities.
pub fn chi2_vs_standard(d: &Univariate) -> Result<f64> {
    match d {
        Univariate::Mixture(m) => {
            let mut total = 0.0;
            for ci in &m.components {
                for cj in &m.components {
                    total += ci.weight
                        * cj.weight
                        * gaussian_cross_correlation(&ci.gaussian(), &cj.gaussian())?;
                }
            }
            Ok(total)
        }
        Univariate::Perturbed(p) => {
            if p.base.variance >= 2.0 {
                return Err(Error::Diverged("base variance >= 2".into()));
            }
            let r = d.tail_radius().max(p.base.mean.abs() + 12.0);
            let v = integrate::adaptive(
                |x| {
                    let a = d.pdf(x);
                    a * a / std_normal_pdf(x)
                },
                -r,
                r,
                1e-11,
            ) - 1.0;
            if !v.is_finite() {
                return Err(Error::Diverged("chi2 integral not finite".into()));
            }
            Ok(v)
        }
    }
}

/// Pairwise correlation chi_{N(0,1)}(d1, d2) = integral of d1 d2 / G - 1.
pub fn cross_correlation(d1: &Univariate, d2: &Univariate) -> Result<f64> {
    match (d1, d2) {
        (Univariate::Mixture(a), Univariate::Mixture(b)) => {
            let mut total = 0.0;
            for ci in &a.components {
                for cj in &b.components {
                    total += ci.weight
                        * cj.weight
                        * gaussian_cross_correlation(&ci.gaussian(), &cj.gaussian())?;
                }
            }
            Ok(total)
        }
        _ => {
            let r = d1.tail_radius().max(d2.tail_radius()) + 2.0;
            let v = integrate::adaptive(
                |x| d1.pdf(x) * d2.pdf(x) / std_normal_pdf(x),
                -r,
                r,
                1e-11,
            ) - 1.0;
            if !v.is_finite() {
                return Err(Error::Diverged("cross-correlation integral not finite".into()));
            }
            Ok(v)
        }
    }
}

/// Total variation distance, (1/2) L1 distance by numerical integration on a
/// window carrying all but < 1e-10 of both masses.
pub fn tv_distance(d1: &Univariate, d2: &Univariate) -> f64 {
    let r = d1.tail_radius().max(d2.tail_radius());
    let v = 0.5 * integrate::adaptive(|x| (d1.pdf(x) - d2.pdf(x)).abs(), -r, r, 1e-11);
    v.clamp(0.0, 1.0)
}

/// Coefficients a_i of d in the orthonormal basis He_i G / sqrt(i!):
/// d = sum_i a_i He_i(x) G(x) / sqrt(i!).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    pub coeffs: Vec<f64>,
}

impl HermiteExpansion {
    pub fn max_index(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// sum_{i >= 1} a_i^2, the chi^2 divergence from N(0,1) implied by the
    /// (truncated) expansion.
    pub fn chi2_from_series(&self) -> f64 {
        self.coeffs.iter().skip(1).map(|a| a * a).sum()
    }

    /// Reconstructed density G(x) sum_i a_i He_i(x) / sqrt(i!).
    pub fn density_at(&self, x: f64) -> f64 {
        let g = std_normal_pdf(x);
        let mut sum = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            sum += a * crate::polybasis::hermite_eval(i, x) / factorial(i).sqrt();
        }
        g * sum
    }
}

/// a_i = E_d[He_i(X)] / sqrt(i!), computed from exact moments through the
/// Hermite coefficient expansion.
pub fn hermite_expansion(d: &Univariate, max_i: usize) -> HermiteExpansion {
    assert!(max_i <= MAX_MOMENT_ORDER, "expansion order capped at {MAX_MOMENT_ORDER}");
    let he = hermite_coefficients(max_i);
    let moments: Vec<f64> = (0..=max_i).map(|t| d.moment(t)).collect();
    let coeffs = (0..=max_i)
        .map(|i| {
            let e: f64 = he[i]
                .iter()
                .enumerate()
                .map(|(j, &c)| c * moments[j])
                .sum();
            e / factorial(i).sqrt()
        })
        .collect();
    HermiteExpansion { coeffs }
}

/// Ornstein-Uhlenbeck smoothing: coefficient i of the output is a_i t^i.
pub fn ou_smooth(e: &HermiteExpansion, t: f64) -> HermiteExpansion {
    assert!((-1.0..=1.0).contains(&t), "smoothing parameter must lie in [-1, 1]");
    let coeffs = e
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &a)| a * t.powi(i as i32))
        .collect();
    HermiteExpansion { coeffs }
}

/// Expectation of a scaled Legendre polynomial P_j(X / C) under a Gaussian,
/// exact via monomial coefficients and Gaussian moment recurrences.
pub(crate) fn gaussian_legendre_mean(g: &Gaussian1D, j: usize, half_width: f64) -> f64 {
    let coefs = legendre_coefficients(j);
    coefs[j]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * g.raw_moment(i) / half_width.powi(i as i32))
        .sum()
}
