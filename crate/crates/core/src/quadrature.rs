//! Gauss-Hermite quadrature for expectations under a standard normal.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Result, SlsError};
use crate::linalg;

/// Nodes and weights of the `n`-point rule for `int e^{-x^2} g(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots of the degree-`n` Hermite polynomial. Eigenvalues of the
    /// Jacobi matrix give starting points; Newton's method on the orthonormal
    /// three-term recurrence polishes them and yields the weights.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(SlsError::InvalidInput("quadrature needs at least one node".into()));
        }
        const MAX_ITER: usize = 20;
        let pi_m4 = PI.powf(-0.25);
        let nf = n as f64;
        let mut jacobi = Array2::<f64>::zeros((n, n));
        for k in 1..n {
            let off = (k as f64 / 2.0).sqrt();
            jacobi[[k, k - 1]] = off;
            jacobi[[k - 1, k]] = off;
        }
        let (guesses, _) = linalg::symmetric_eigen(jacobi.view());
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // largest root first; only the non-negative half is computed
        for i in 0..n.div_ceil(2) {
            let mut z = if n % 2 == 1 && i == n / 2 { 0.0 } else { guesses[n - 1 - i] };
            let mut deriv = 0.0;
            for _ in 0..MAX_ITER {
                let (mut p1, mut p2) = (pi_m4, 0.0);
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                deriv = (2.0 * nf).sqrt() * p2;
                let step = p1 / deriv;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (deriv * deriv);
            weights[n - 1 - i] = weights[i];
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int e^{-x^2} g(x) dx`
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }

    /// `E[g(W)]` for `W ~ N(0, 1)`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let s = std::f64::consts::SQRT_2;
        self.integrate(|x| g(s * x)) / PI.sqrt()
    }
}
