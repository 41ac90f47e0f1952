//! Cubic link against its closed form: with 3 |beta*|^2 = 1 under an
//! identity covariance the population scale is exactly 1.

use ndarray::Array2;
use sls::bench::relative_error_l2;
use sls::synth::generate;
use sls::verify::cubic_oracle;
use sls::{sls_estimate, DesignDistribution, GramOption, LinkFunction, LinkKind, RootOptions, SynthConfig};

fn main() -> sls::Result<()> {
    let p = 10;
    let mut beta = Array2::from_elem((1, p), 1.0);
    beta /= (3.0 * p as f64).sqrt();

    let mut cfg = SynthConfig::new(200_000, p, vec![LinkKind::Monomial(3)], 7);
    cfg.dist = DesignDistribution::GaussianGeneral { factor: Array2::eye(p) };
    cfg.beta_star = Some(beta.clone());
    let (data, _) = generate(&cfg)?;

    let oracle = cubic_oracle(beta.row(0), Array2::<f64>::eye(p).view())?;
    let est = sls_estimate(&data, &[LinkFunction::monomial(3)], &GramOption::Full, &RootOptions::default())?;
    println!("oracle c = {:.6}   c_hat = {:.6}", oracle.c, est.c_hat[0]);
    println!("relative l2 error = {:.4}", relative_error_l2(est.beta_nlr.view(), beta.view())?);
    Ok(())
}
