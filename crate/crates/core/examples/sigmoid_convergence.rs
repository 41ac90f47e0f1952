//! Error against sample size for three sigmoid components, with the fitted
//! log-log slope. Writes `sigmoid_convergence.csv` and `.svg` to the
//! working directory.

use std::path::Path;

use sls::bench::{emit_csv, emit_plot, fit_convergence_slope, run_experiment, summarize};
use sls::{ErrorMetric, ExperimentPlan, LinkKind, Sweep};

fn main() -> sls::Result<()> {
    let mut plan = ExperimentPlan::new(
        Sweep::SampleSize(vec![12_500, 25_000, 50_000, 100_000]),
        vec![LinkKind::Sigmoid; 3],
        1,
    );
    plan.repeats = 8;
    let records = run_experiment(&plan)?;
    for s in summarize(&records, ErrorMetric::L2) {
        println!(
            "n = {:>7}  mean = {:.4}  median = {:.4}  failures = {}",
            s.sweep_value, s.mean, s.median, s.failures
        );
    }
    println!("slope of mean error = {:.3}", fit_convergence_slope(&records, ErrorMetric::L2)?);
    emit_csv(&records, Path::new("sigmoid_convergence.csv"))?;
    emit_plot(&records, ErrorMetric::L2, plan.sweep.label(), Path::new("sigmoid_convergence.svg"))?;
    Ok(())
}
