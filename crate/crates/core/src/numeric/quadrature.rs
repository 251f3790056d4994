//! Gaussian quadrature rules. Nodes are computed in f64 and converted.

use crate::error::{Error, Result};
use crate::numeric::eigen::tridiagonal_eigen;
use crate::scalar::Real;

/// Nodes and weights of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<T: Real>(&self, mut f: impl FnMut(T) -> T) -> T {
        crate::numeric::sum::compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| T::of(w) * f(T::of(x))))
    }
}

/// Gauss–Legendre rule on [a, b]; Newton iteration on P_n from the Chebyshev guess.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::domain("gauss_legendre: need at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    Ok(Rule { nodes, weights })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard Gaussian measure
/// dγ = e^{-y²/2}/√(2π) dy (probabilists' weight); weights sum to 1.
pub fn gauss_hermite_probabilists(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::domain("gauss_hermite: need at least one node"));
    }
    // Jacobi matrix of He_k: zero diagonal, off-diagonal √k.
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let eig = tridiagonal_eigen(&diag, &off)?;
    let nodes = eig.values.clone();
    let weights = (0..n).map(|k| eig.vector(k)[0].powi(2)).collect();
    Ok(Rule { nodes, weights })
}

/// Gauss–Chebyshev rule for ∫_0^α g(σ) dσ / √(σ(α−σ)); the weight is
/// absorbed, so the rule integrates g ≡ 1 to π exactly.
pub fn arcsine_rule(n: usize, alpha: f64) -> Result<Rule> {
    if n == 0 || !(alpha > 0.0) {
        return Err(Error::domain("arcsine_rule: need n ≥ 1 and α > 0"));
    }
    let w = std::f64::consts::PI / n as f64;
    let nodes = (1..=n)
        .map(|k| {
            let x = ((2 * k - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
            0.5 * alpha * (1.0 + x)
        })
        .collect();
    Ok(Rule { nodes, weights: vec![w; n] })
}
