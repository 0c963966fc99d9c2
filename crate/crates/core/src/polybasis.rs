//! Orthogonal polynomial kernel: probabilists' Hermite polynomials, Gauss-Hermite
//! quadrature against the N(0,1) weight, and Legendre polynomials.
//!
//! All evaluation goes through three-term recurrences; expanded monomial
//! coefficients are only used where degrees stay small enough for f64.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// A quadrature rule against the standard Gaussian weight: the k-node rule
/// integrates every polynomial of degree <= 2k-1 exactly.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureRule {
    /// Strictly increasing abscissae (roots of He_k).
    pub nodes: Vec<f64>,
    /// Nonnegative weights, summing to 1.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Integrate f against N(0,1), exact for polynomials of degree <= 2k-1.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Check the structural invariants: increasing nodes, nonnegative weights
    /// summing to 1 within 1e-12.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.weights.len() || self.nodes.is_empty() {
            return Err(Error::InvalidParam("empty or mismatched rule".into()));
        }
        if self.nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("nodes not strictly increasing".into()));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParam("negative weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// He_i(x), the probabilists' Hermite polynomial, via the recurrence
/// He_{i+1}(x) = x He_i(x) - i He_{i-1}(x), He_0 = 1, He_1 = x.
pub fn hermite_eval(i: usize, x: f64) -> f64 {
    if i == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for j in 1..i {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Derivative He_i'(x) = i He_{i-1}(x).
pub fn hermite_deriv(i: usize, x: f64) -> f64 {
    if i == 0 {
        0.0
    } else {
        i as f64 * hermite_eval(i - 1, x)
    }
}

/// P_k(x), the Legendre polynomial, via
/// (k+1) P_{k+1}(x) = (2k+1) x P_k(x) - k P_{k-1}(x).
pub fn legendre_eval(k: usize, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * x * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients of He_i for i <= max_i, c[i][j] = coefficient of x^j.
/// Kept to moderate degrees (<= 40); beyond that the coefficients are not
/// representable with full precision in f64.
pub fn hermite_coefficients(max_i: usize) -> Vec<Vec<f64>> {
    assert!(max_i <= 40, "Hermite coefficient table capped at degree 40");
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(max_i + 1);
    table.push(vec![1.0]);
    if max_i == 0 {
        return table;
    }
    table.push(vec![0.0, 1.0]);
    for i in 1..max_i {
        let mut next = vec![0.0; i + 2];
        // x * He_i
        for (j, &c) in table[i].iter().enumerate() {
            next[j + 1] += c;
        }
        // - i * He_{i-1}
        for (j, &c) in table[i - 1].iter().enumerate() {
            next[j] -= i as f64 * c;
        }
        table.push(next);
    }
    table
}

/// Monomial coefficients of P_k for k <= max_k (exact small rationals in f64).
pub fn legendre_coefficients(max_k: usize) -> Vec<Vec<f64>> {
    assert!(max_k <= 30, "Legendre coefficient table capped at degree 30");
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(max_k + 1);
    table.push(vec![1.0]);
    if max_k == 0 {
        return table;
    }
    table.push(vec![0.0, 1.0]);
    for k in 1..max_k {
        let kf = k as f64;
        let mut next = vec![0.0; k + 2];
        for (j, &c) in table[k].iter().enumerate() {
            next[j + 1] += (2.0 * kf + 1.0) / (kf + 1.0) * c;
        }
        for (j, &c) in table[k - 1].iter().enumerate() {
            next[j] -= kf / (kf + 1.0) * c;
        }
        table.push(next);
    }
    table
}

/// Gauss-Hermite rule with k nodes against the N(0,1) weight.
///
/// Nodes are the roots of He_k, located as eigenvalues of the symmetric
/// tridiagonal Jacobi matrix (off-diagonal sqrt(i)) and then polished with
/// Newton steps on He_k; weights are k! / (k^2 He_{k-1}(x)^2).
pub fn hermite_quadrature(k: usize) -> Result<QuadratureRule> {
    if k == 0 || k > 64 {
        return Err(Error::InvalidParam(format!(
            "hermite_quadrature needs 1 <= k <= 64, got {k}"
        )));
    }
    let mut nodes = jacobi_eigenvalues(k);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Newton polish; the eigensolve is already close, so a couple of steps
    // reach the limit of f64.
    for x in nodes.iter_mut() {
        let mut converged = false;
        for _ in 0..8 {
            let step = hermite_eval(k, *x) / hermite_deriv(k, *x);
            *x -= step;
            if step.abs() <= 1e-12 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::RootFind(format!(
                "Newton polish stalled for He_{k} near {x}"
            )));
        }
    }

    let kf = k as f64;
    let k_factorial = crate::special::factorial(k);
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let h = hermite_eval(k - 1, x);
            k_factorial / (kf * kf * h * h)
        })
        .collect();

    // Enforce the exact symmetry of the rule: He_k is even/odd, so roots come
    // in +/- pairs (with 0 for odd k); average out the last-digit asymmetry.
    let mut nodes = nodes;
    let mut weights = weights;
    let half = k / 2;
    for i in 0..half {
        let j = k - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if k % 2 == 1 {
        nodes[half] = 0.0;
    }

    let rule = QuadratureRule { nodes, weights };
    rule.validate()?;
    Ok(rule)
}

/// Eigenvalues of the k x k Jacobi matrix of the He recurrence
/// (zero diagonal, off-diagonal sqrt(i), i = 1..k-1).
fn jacobi_eigenvalues(k: usize) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(k, k);
    for i in 1..k {
        let b = (i as f64).sqrt();
        m[(i - 1, i)] = b;
        m[(i, i - 1)] = b;
    }
    m.symmetric_eigen().eigenvalues.iter().copied().collect()
}
