//! Gauss-Hermite quadrature for integrals against normal densities,
//! computed once via Golub-Welsch (eigenvalues of the Jacobi matrix).

use nalgebra::DMatrix;
use std::sync::OnceLock;

/// Number of nodes used for normal-covariate marginalization.
pub const GH_NODES: usize = 64;

/// Nodes and weights for the physicists' Hermite weight `exp(-x^2)`;
/// weights sum to sqrt(pi).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let first = eig.eigenvectors[(0, i)];
            (node, std::f64::consts::PI.sqrt() * first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

fn gh64() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| gauss_hermite(GH_NODES))
}

/// Approximates `E[g(X)]` for `X ~ N(mean, sd^2)` with 64 Gauss-Hermite
/// nodes.
pub fn normal_expectation(mean: f64, sd: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gh64();
    let scale = std::f64::consts::SQRT_2 * sd;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let mut total = 0.0;
    for (t, w) in nodes.iter().zip(weights) {
        total += w * g(mean + scale * t);
    }
    total * inv_sqrt_pi
}
