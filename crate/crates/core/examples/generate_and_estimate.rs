//! Dataset file round trip: write a mixed-link dataset, read it back and
//! estimate with a sub-sampled Gram inverse.

use sls::bench::relative_error_l2;
use sls::io::{read_dataset, write_dataset};
use sls::synth::generate;
use sls::{sls_estimate, GramOption, LinkFunction, LinkKind, RootOptions, SubsampleSize, SynthConfig};

fn main() -> sls::Result<()> {
    let links = vec![LinkKind::Identity, LinkKind::Sigmoid, LinkKind::Logistic];
    let mut cfg = SynthConfig::new(60_000, 6, links.clone(), 2);
    cfg.beta_std = 1.0;
    let (data, spec) = generate(&cfg)?;

    let dir = std::env::temp_dir().join("sls-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("mixed.bin");
    write_dataset(&path, &data, spec.beta_star.as_ref())?;
    let (data, beta_star) = read_dataset(&path)?;

    let funcs: Vec<LinkFunction> = links.iter().map(|&k| LinkFunction::new(k)).collect::<sls::Result<_>>()?;
    let option = GramOption::Subsampled { size: SubsampleSize::Fraction(0.2), seed: 1 };
    let est = sls_estimate(&data, &funcs, &option, &RootOptions::default())?;
    println!("c_hat = {:?}", est.c_hat.to_vec());
    println!("failed directions = {:?}", est.failed_directions());
    println!("relative l2 error = {:.4}", relative_error_l2(est.beta_nlr.view(), beta_star.unwrap().view())?);
    Ok(())
}
