//! Command-line front end: `generate`, `estimate`, `experiment`, `verify`.
//!
//! Exit codes: 0 success, 1 a failed estimation direction or verification
//! check (outputs are still written), 2 configuration error, 3 I/O error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ndarray::Array1;

use crate::bench::{self, fit_convergence_slope, summarize, ErrorMetric, Sweep};
use crate::config::{parse_config, Check, Command, EstimateConfig, ExperimentConfig, GenerateConfig, RunConfig, VerifyConfig};
use crate::error::{Result, SlsError};
use crate::estimator::{sls_estimate, GramSource};
use crate::io;
use crate::model::{LinkFunction, LinkKind};
use crate::report::Report;
use crate::synth;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sls", version, about = "Scaled least squares for mixtures of non-linear regressions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Write a synthetic dataset
    Generate(Flags),
    /// Estimate coefficients from a dataset file
    Estimate(Flags),
    /// Run an error-vs-size sweep
    Experiment(Flags),
    /// Run the numerical checks of the theory
    Verify(Flags),
}

#[derive(Debug, clap::Args)]
struct Flags {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on worker threads
    #[arg(long)]
    threads: Option<usize>,
    /// Override the primary output path
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (name, flags) = match cli.command {
        Sub::Generate(f) => ("generate", f),
        Sub::Estimate(f) => ("estimate", f),
        Sub::Experiment(f) => ("experiment", f),
        Sub::Verify(f) => ("verify", f),
    };
    match load(name, &flags) {
        Ok(cfg) => run(&cfg),
        Err(e) => report_error(&e),
    }
}

fn load(name: &str, flags: &Flags) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&flags.config)?;
    let mut cfg = parse_config(&text)?;
    if cfg.command.name() != name {
        return Err(SlsError::config(
            "",
            format!("`{name}` needs a [{name}] section, found [{}]", cfg.command.name()),
        ));
    }
    let base = flags.config.parent().map(PathBuf::from).unwrap_or_default();
    cfg.resolve_paths(&base);
    cfg.apply_overrides(flags.seed, flags.threads, flags.out.clone())?;
    Ok(cfg)
}

pub fn exit_code(err: &SlsError) -> i32 {
    match err {
        SlsError::Config { .. } | SlsError::InvalidInput(_) | SlsError::DimensionMismatch(_) => EXIT_CONFIG,
        SlsError::Io(_) | SlsError::Format(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn report_error(err: &SlsError) -> i32 {
    eprintln!("error: {err}");
    exit_code(err)
}

/// Runs a validated configuration on a pool of `cfg.threads` workers.
pub fn run(cfg: &RunConfig) -> i32 {
    let pool = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => return report_error(&SlsError::InvalidInput(format!("thread pool: {e}"))),
    };
    match pool.install(|| execute(cfg)) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

/// Runs the command and returns its exit code; errors that stop the run
/// early come back as `Err`.
pub fn execute(cfg: &RunConfig) -> Result<i32> {
    let mut report = Report::new();
    report.push("command", cfg.command.name());
    report.push_manifest(cfg.command.name(), &cfg.config_sha256, cfg.master_seed());
    match &cfg.command {
        Command::Generate(g) => generate(g, &mut report),
        Command::Estimate(e) => estimate(e, &mut report),
        Command::Experiment(x) => experiment(x, &mut report),
        Command::Verify(v) => run_verify(v, &mut report),
    }
}

fn generate(g: &GenerateConfig, report: &mut Report) -> Result<i32> {
    let (data, spec) = synth::generate(&g.synth)?;
    io::write_dataset(&g.output, &data, spec.beta_star.as_ref())?;
    report
        .push("output", g.output.display())
        .push("n", data.n())
        .push("p", data.p())
        .push("k", data.k())
        .push("links", link_names(&g.synth.links))
        .push("noise_std", g.synth.noise_std);
    if let Some(b) = &spec.beta_star {
        report.push_matrix("beta_star", b.view());
    }
    report.write(&g.report)?;
    Ok(EXIT_OK)
}

fn link_names(links: &[LinkKind]) -> String {
    let names: Vec<String> = links.iter().map(|l| l.to_string()).collect();
    format!("[{}]", names.join(", "))
}

fn estimate(e: &EstimateConfig, report: &mut Report) -> Result<i32> {
    let (data, beta_star) = io::read_dataset(&e.data)?;
    if e.links.len() != data.k() {
        return Err(SlsError::config(
            "estimate.links",
            format!("{} links for a dataset with k = {}", e.links.len(), data.k()),
        ));
    }
    let links: Vec<LinkFunction> = e.links.iter().map(|&k| LinkFunction::new(k)).collect::<Result<_>>()?;
    let est = sls_estimate(&data, &links, &e.option, &e.root)?;

    report
        .push("data", e.data.display())
        .push("n", data.n())
        .push("p", data.p())
        .push("k", data.k())
        .push("links", link_names(&e.links));
    match est.gram_source {
        GramSource::Full => report.push("gram", "full"),
        GramSource::Subsampled { size } => report.push("gram", format!("subsampled(size={size})")),
    };
    for (j, kind) in e.links.iter().enumerate() {
        if kind.has_unbounded_derivative() {
            report.push(format!("warning[{j}]"), "link derivative is unbounded; error bounds do not apply");
        }
    }
    let failed = est.failed_directions();
    report.push("failed_directions", format!("{failed:?}"));
    report.push_vector("c_hat", est.c_hat.view());
    for (j, d) in est.diagnostics.iter().enumerate() {
        let status = match &d.failure {
            Some(f) => format!("failed({f})"),
            None => "ok".into(),
        };
        report
            .push(format!("direction[{j}].status"), status)
            .push(format!("direction[{j}].newton_iters"), d.root.newton_iters)
            .push(format!("direction[{j}].bisection_iters"), d.root.bisection_iters)
            .push(format!("direction[{j}].used_bisection"), d.root.used_bisection)
            .push(format!("direction[{j}].converged"), d.root.converged)
            .push(format!("direction[{j}].final_residual"), format!("{:?}", d.root.final_residual));
    }
    report.push_matrix("beta_ols", est.beta_ols.view());
    report.push_matrix("beta_nlr", est.beta_nlr.view());
    if let Some(b) = &beta_star {
        let l2 = bench::relative_error_l2(est.beta_nlr.view(), b.view());
        let linf = bench::relative_error_linf(est.beta_nlr.view(), b.view());
        match (l2, linf) {
            (Ok(l2), Ok(linf)) => {
                report.push("err_l2_rel", format!("{l2:?}")).push("err_linf_rel", format!("{linf:?}"));
            }
            (Err(err), _) | (_, Err(err)) => {
                report.push("err_l2_rel", format!("unavailable ({err})"));
            }
        }
    }
    report.write(&e.report)?;
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("estimation failed for directions {failed:?}; report written to {}", e.report.display());
        Ok(EXIT_FAILURE)
    }
}

fn experiment(x: &ExperimentConfig, report: &mut Report) -> Result<i32> {
    let records = bench::run_experiment(&x.plan)?;
    bench::emit_csv(&records, &x.csv)?;
    if let Some(plot) = &x.plot {
        bench::emit_plot(&records, x.metric, x.plan.sweep.label(), plot)?;
    }
    report
        .push("csv", x.csv.display())
        .push("sweep", x.plan.sweep.label())
        .push("p", x.plan.p)
        .push("links", link_names(&x.plan.links))
        .push("repeats", x.plan.repeats);
    if let Some(plot) = &x.plot {
        report.push("plot", plot.display());
    }
    for metric in [ErrorMetric::L2, ErrorMetric::Linf] {
        for s in summarize(&records, metric) {
            let key = format!("{}[{}]", metric.name(), s.sweep_value);
            report.push(
                key,
                format!(
                    "mean={:?} median={:?} min={:?} max={:?} runs={} failures={}",
                    s.mean, s.median, s.min, s.max, s.count, s.failures
                ),
            );
        }
    }
    if matches!(x.plan.sweep, Sweep::SampleSize(_)) {
        match fit_convergence_slope(&records, x.metric) {
            Ok(slope) => report.push("slope", format!("{slope:?}")),
            Err(e) => report.push("slope", format!("unavailable ({e})")),
        };
    }
    let failures = records.iter().filter(|r| r.failed).count();
    report.push("failed_records", failures);
    report.write(&x.report)?;
    if failures == 0 {
        Ok(EXIT_OK)
    } else {
        eprintln!("{failures} of {} runs had a failed direction", records.len());
        Ok(EXIT_FAILURE)
    }
}

fn run_verify(v: &VerifyConfig, report: &mut Report) -> Result<i32> {
    let mut passed = true;
    report.push("n_mc", v.n_mc).push("p", v.p);
    for check in &v.checks {
        match check {
            Check::Stein => {
                let s = LinkFunction::sigmoid();
                let gaps = [
                    ("identity", verify::stein_identity_gap(|z| z, |_| 1.0, v.n_mc, v.seed)?),
                    ("sigmoid", verify::stein_identity_gap(|z| s.eval(z), |z| s.d1(z), v.n_mc, v.seed)?),
                    ("sigmoid_d1", verify::stein_identity_gap(|z| s.d1(z), |z| s.d2(z), v.n_mc, v.seed)?),
                ];
                for (name, gap) in gaps {
                    report.push(format!("stein.{name}.gap"), format!("{gap:?}"));
                    passed &= gap <= v.stein_tol;
                }
                report.push("stein.tolerance", v.stein_tol);
            }
            Check::Proportionality => {
                let beta = Array1::<f64>::ones(v.p);
                for kind in [LinkKind::Identity, LinkKind::Sigmoid, LinkKind::Monomial(3)] {
                    let link = LinkFunction::new(kind)?;
                    let r = verify::proportionality_gap(&link, beta.view(), v.sigma_factor.view(), v.n_mc, v.seed)?;
                    report
                        .push(format!("proportionality.{kind}.gap"), format!("{:?}", r.gap))
                        .push(format!("proportionality.{kind}.mean_deriv"), format!("{:?}", r.mean_deriv));
                    passed &= r.gap <= v.proportionality_tol;
                }
                report.push("proportionality.tolerance", v.proportionality_tol);
            }
            Check::Theorem7 => {
                let t = verify::theorem7_check(v.grid_points, v.n_quad)?;
                report
                    .push("theorem7.a", format!("{:?}", t.a))
                    .push("theorem7.b", format!("{:?}", t.b))
                    .push("theorem7.ell_at_6", format!("{:?}", t.ell_at_6))
                    .push("theorem7.min_ell_deriv", format!("{:?}", t.min_ell_deriv))
                    .push("theorem7.passed", t.passed);
                passed &= t.passed;
            }
            Check::Covariance => {
                let c = verify::covariance_summary(v.sigma_factor.view())?;
                report
                    .push("covariance.lambda_min", format!("{:?}", c.lambda_min))
                    .push("covariance.rho_2", format!("{:?}", c.rho_2))
                    .push("covariance.rho_inf", format!("{:?}", c.rho_inf))
                    .push("covariance.diag_dominant_sqrt", c.diag_dominant_sqrt);
            }
        }
    }
    report.push("passed", passed);
    report.write(&v.report)?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
}
