//! Non-Gaussian design: uniform on a box. The proportionality only holds
//! approximately, but the error still shrinks with n.

use sls::bench::{run_experiment, summarize};
use sls::{DesignDistribution, ErrorMetric, ExperimentPlan, LinkKind, Sweep};

fn main() -> sls::Result<()> {
    let mut plan = ExperimentPlan::new(
        Sweep::SampleSize(vec![12_500, 25_000, 50_000, 100_000]),
        vec![LinkKind::Sigmoid; 3],
        5,
    );
    plan.dist = DesignDistribution::uniform_box(plan.p);
    plan.repeats = 8;
    let records = run_experiment(&plan)?;
    for s in summarize(&records, ErrorMetric::Linf) {
        println!("n = {:>7}  median linf error = {:.4}", s.sweep_value, s.median);
    }
    Ok(())
}
