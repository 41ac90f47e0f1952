//! Monte Carlo gaps |E[W g(W)] - E[g'(W)]| for a few smooth functions, and
//! the population proportionality of the least-squares direction.

use ndarray::{Array1, Array2};
use sls::verify::{proportionality_gap, stein_identity_gap};
use sls::LinkFunction;

fn main() -> sls::Result<()> {
    let s = LinkFunction::sigmoid();
    for n in [10_000, 100_000, 1_000_000] {
        let gap = stein_identity_gap(|z| s.eval(z), |z| s.d1(z), n, 9)?;
        println!("sigmoid, n_mc = {n:>8}: gap = {gap:.2e}");
    }

    let p = 8;
    let beta = Array1::from_shape_fn(p, |i| 1.0 + 0.1 * i as f64);
    let factor = Array2::<f64>::eye(p) / (p as f64).sqrt();
    for link in [LinkFunction::identity(), LinkFunction::sigmoid(), LinkFunction::monomial(3)] {
        let g = proportionality_gap(&link, beta.view(), factor.view(), 400_000, 11)?;
        println!("{:?}: mean f' = {:.4}, gap = {:.4}", link.kind(), g.mean_deriv, g.gap);
    }
    Ok(())
}
