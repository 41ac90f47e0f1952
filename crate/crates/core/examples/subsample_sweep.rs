//! Gram inverse from a fraction of the rows: error against |S|/n at a fixed
//! sample size. Every fraction reuses the same dataset within a repeat.

use sls::bench::{run_experiment, summarize, DESK_FRACTIONS};
use sls::{ErrorMetric, ExperimentPlan, LinkKind, Sweep};

fn main() -> sls::Result<()> {
    let mut plan = ExperimentPlan::new(
        Sweep::SubsampleFraction { n: 100_000, fractions: DESK_FRACTIONS.to_vec() },
        vec![LinkKind::Sigmoid; 3],
        3,
    );
    plan.repeats = 8;
    let records = run_experiment(&plan)?;
    for s in summarize(&records, ErrorMetric::L2) {
        println!("|S|/n = {:<5}  median = {:.4}  mean = {:.4}", s.sweep_value, s.median, s.mean);
    }
    Ok(())
}
