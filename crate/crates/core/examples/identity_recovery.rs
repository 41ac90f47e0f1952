//! Identity link, noiseless responses: the scale root is exactly 1 and the
//! estimate is the least-squares fit of `z * y` on `x`.

use sls::bench::relative_error_l2;
use sls::synth::generate;
use sls::{sls_estimate, GramOption, LinkFunction, LinkKind, RootOptions, SynthConfig};

fn main() -> sls::Result<()> {
    let mut cfg = SynthConfig::new(100_000, 20, vec![LinkKind::Identity], 42);
    cfg.noise_std = 0.0;
    let (data, spec) = generate(&cfg)?;
    let est = sls_estimate(&data, &[LinkFunction::identity()], &GramOption::Full, &RootOptions::default())?;
    let err = relative_error_l2(est.beta_nlr.view(), spec.beta_star.as_ref().unwrap().view())?;
    println!("n = {}, p = {}", data.n(), data.p());
    println!("c_hat = {:.6}", est.c_hat[0]);
    println!("relative l2 error = {err:.4}");
    Ok(())
}
