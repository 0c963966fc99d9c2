//! Small numeric helpers shared across modules.

use statrs::function::erf;
use statrs::function::gamma;

/// n! as f64. Valid through n = 170.
pub fn factorial(n: usize) -> f64 {
    let mut f = 1.0;
    for i in 2..=n {
        f *= i as f64;
    }
    f
}

/// (n)!! for odd n (and 0!! = (-1)!! = 1), used for Gaussian moments:
/// E[X^t] over N(0,1) is (t-1)!! for even t.
pub fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 1.0;
    }
    let mut f = 1.0;
    let mut i = n;
    while i > 1 {
        f *= i as f64;
        i -= 2;
    }
    f
}

/// Raw moment E[X^t] of N(0,1): (t-1)!! for even t, 0 for odd t.
pub fn std_normal_moment(t: usize) -> f64 {
    if t % 2 == 1 {
        0.0
    } else {
        double_factorial(t as i64 - 1)
    }
}

/// Standard normal pdf.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cdf via erf.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf::erf(x / std::f64::consts::SQRT_2))
}

/// ln Gamma(x).
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// ln B(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_lower_regularized(a: f64, x: f64) -> f64 {
    gamma::gamma_lr(a, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorials() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(double_factorial(7), 105.0);
        assert_eq!(double_factorial(-1), 1.0);
        assert_eq!(std_normal_moment(4), 3.0);
        assert_eq!(std_normal_moment(7), 0.0);
    }

    #[test]
    fn beta_matches_small_cases() {
        // B(1/2, 1/2) = pi, B(1, 1/2) = 2.
        assert_relative_eq!(ln_beta(0.5, 0.5).exp(), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(ln_beta(1.0, 0.5).exp(), 2.0, epsilon = 1e-12);
    }
}
