//! TOML run configuration.
//!
//! A file holds exactly one of the sections `[generate]`, `[estimate]`,
//! `[experiment]` or `[verify]`. Unknown keys, wrong types and violated
//! invariants are reported with the dotted path of the offending field.
//!
//! ```toml
//! [experiment]
//! sweep = "sample_size"
//! p = 20
//! links = ["sigmoid", "sigmoid", "sigmoid"]
//! seed = 7
//! csv = "errors.csv"
//! ```

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Deserialize;

use crate::bench::{ErrorMetric, ExperimentPlan, Sweep, DESK_FRACTIONS, DESK_SAMPLE_SIZES, PAPER_FRACTIONS, PAPER_SAMPLE_SIZES};
use crate::error::{Result, SlsError};
use crate::estimator::{GramOption, RootOptions, SubsampleSize};
use crate::linalg;
use crate::model::LinkKind;
use crate::report::sha256_hex;
use crate::synth::{DesignDistribution, SynthConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// SHA-256 of the configuration text, for the report manifest.
    pub config_sha256: String,
    /// Worker thread cap; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Generate(GenerateConfig),
    Estimate(EstimateConfig),
    Experiment(ExperimentConfig),
    Verify(VerifyConfig),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Estimate(_) => "estimate",
            Command::Experiment(_) => "experiment",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub synth: SynthConfig,
    pub output: PathBuf,
    pub report: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub data: PathBuf,
    pub links: Vec<LinkKind>,
    pub option: GramOption,
    pub root: RootOptions,
    pub report: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub plan: ExperimentPlan,
    pub csv: PathBuf,
    pub plot: Option<PathBuf>,
    pub report: PathBuf,
    pub metric: ErrorMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Stein,
    Proportionality,
    Theorem7,
    Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub checks: Vec<Check>,
    pub n_mc: usize,
    pub seed: u64,
    pub p: usize,
    /// Lower-triangular factor of the design covariance.
    pub sigma_factor: Array2<f64>,
    pub grid_points: usize,
    pub n_quad: usize,
    pub stein_tol: f64,
    pub proportionality_tol: f64,
    pub report: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    generate: Option<RawGenerate>,
    estimate: Option<RawEstimate>,
    experiment: Option<RawExperiment>,
    verify: Option<RawVerify>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
enum RawDesign {
    /// `N(0, I/p)` unless a covariance matrix is given.
    Gaussian { covariance: Option<Vec<Vec<f64>>> },
    /// Half width defaults to `1 / p`.
    Uniform { half_width: Option<f64> },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRoot {
    c_init: Option<f64>,
    c_max: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    deriv_floor: Option<f64>,
    root_subsample: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerate {
    n: usize,
    p: usize,
    links: Vec<LinkKind>,
    #[serde(default)]
    seed: u64,
    output: PathBuf,
    report: Option<PathBuf>,
    noise_std: Option<f64>,
    beta_mean: Option<f64>,
    beta_std: Option<f64>,
    beta_star: Option<Vec<Vec<f64>>>,
    design: Option<RawDesign>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimate {
    data: PathBuf,
    links: Vec<LinkKind>,
    report: PathBuf,
    subsample_fraction: Option<f64>,
    subsample_size: Option<usize>,
    #[serde(default)]
    subsample_seed: u64,
    #[serde(default)]
    root: RawRoot,
}

#[derive(Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "snake_case")]
enum RawSweep {
    SampleSize,
    Subsample,
}

#[derive(Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
enum RawGrid {
    #[default]
    Desk,
    Paper,
}

#[derive(Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
enum RawMetric {
    #[default]
    L2,
    Linf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    sweep: RawSweep,
    #[serde(default)]
    grid: RawGrid,
    values: Option<Vec<f64>>,
    n: Option<usize>,
    p: Option<usize>,
    links: Vec<LinkKind>,
    #[serde(default)]
    seed: u64,
    repeats: Option<usize>,
    noise_std: Option<f64>,
    beta_mean: Option<f64>,
    beta_std: Option<f64>,
    #[serde(default)]
    pin_beta: bool,
    threads: Option<usize>,
    max_resident: Option<usize>,
    design: Option<RawDesign>,
    #[serde(default)]
    root: RawRoot,
    csv: PathBuf,
    plot: Option<PathBuf>,
    report: Option<PathBuf>,
    #[serde(default)]
    metric: RawMetric,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    checks: Option<Vec<Check>>,
    n_mc: Option<usize>,
    #[serde(default)]
    seed: u64,
    p: Option<usize>,
    covariance: Option<Vec<Vec<f64>>>,
    grid_points: Option<usize>,
    n_quad: Option<usize>,
    stein_tol: Option<f64>,
    proportionality_tol: Option<f64>,
    report: PathBuf,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| SlsError::config("", e.to_string().trim()))?;
    let raw: RawFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        SlsError::config(path, e.into_inner().to_string().trim())
    })?;
    let present = [raw.generate.is_some(), raw.estimate.is_some(), raw.experiment.is_some(), raw.verify.is_some()];
    if present.iter().filter(|&&b| b).count() != 1 {
        return Err(SlsError::config(
            "",
            "expected exactly one of [generate], [estimate], [experiment], [verify]",
        ));
    }
    let mut threads = None;
    let command = if let Some(g) = raw.generate {
        Command::Generate(generate(g)?)
    } else if let Some(e) = raw.estimate {
        Command::Estimate(estimate(e)?)
    } else if let Some(x) = raw.experiment {
        threads = x.threads;
        Command::Experiment(experiment(x)?)
    } else {
        Command::Verify(verify(raw.verify.expect("one section is present"))?)
    };
    Ok(RunConfig {
        command,
        config_sha256: sha256_hex(text),
        threads,
    })
}

impl RunConfig {
    /// Applies command-line overrides. `out` replaces the primary output:
    /// the dataset, the estimate report, the CSV or the verify report.
    pub fn apply_overrides(&mut self, seed: Option<u64>, threads: Option<usize>, out: Option<PathBuf>) -> Result<()> {
        if threads == Some(0) {
            return Err(SlsError::config("--threads", "must be positive"));
        }
        if let Some(t) = threads {
            self.threads = Some(t);
        }
        match &mut self.command {
            Command::Generate(g) => {
                if let Some(s) = seed {
                    g.synth.master_seed = s;
                }
                if let Some(o) = out {
                    g.report = default_report(&o);
                    g.output = o;
                }
            }
            Command::Estimate(e) => {
                if let (Some(s), GramOption::Subsampled { seed: sub, .. }) = (seed, &mut e.option) {
                    *sub = s;
                }
                if let Some(o) = out {
                    e.report = o;
                }
            }
            Command::Experiment(x) => {
                if let Some(s) = seed {
                    x.plan.master_seed = s;
                }
                x.plan.threads = self.threads;
                if let Some(o) = out {
                    x.report = default_report(&o);
                    x.csv = o;
                }
            }
            Command::Verify(v) => {
                if let Some(s) = seed {
                    v.seed = s;
                }
                if let Some(o) = out {
                    v.report = o;
                }
            }
        }
        Ok(())
    }

    /// Resolves relative paths of the config against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.command {
            Command::Generate(g) => {
                fix(&mut g.output);
                fix(&mut g.report);
            }
            Command::Estimate(e) => {
                fix(&mut e.data);
                fix(&mut e.report);
            }
            Command::Experiment(x) => {
                fix(&mut x.csv);
                fix(&mut x.report);
                if let Some(p) = &mut x.plot {
                    fix(p);
                }
            }
            Command::Verify(v) => fix(&mut v.report),
        }
    }

    pub fn master_seed(&self) -> u64 {
        match &self.command {
            Command::Generate(g) => g.synth.master_seed,
            Command::Estimate(e) => match e.option {
                GramOption::Subsampled { seed, .. } => seed,
                GramOption::Full => 0,
            },
            Command::Experiment(x) => x.plan.master_seed,
            Command::Verify(v) => v.seed,
        }
    }
}

/// `<path>.txt` next to a data output.
fn default_report(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

fn check_path(path: &Path, at: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(SlsError::config(at, "path must not be empty"));
    }
    Ok(())
}

/// Re-labels a validation error with the config path it came from.
fn at(path: &str) -> impl Fn(SlsError) -> SlsError + '_ {
    move |e| match e {
        SlsError::Config { .. } => e,
        other => SlsError::config(path, other.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>], p: usize, path: &str) -> Result<Array2<f64>> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(SlsError::config(path, format!("expected a {p} x {p} matrix")));
    }
    Ok(Array2::from_shape_fn((p, p), |(i, j)| rows[i][j]))
}

fn design(raw: Option<RawDesign>, p: usize, path: &str) -> Result<DesignDistribution> {
    let d = match raw {
        None | Some(RawDesign::Gaussian { covariance: None }) => DesignDistribution::GaussianIsotropic,
        Some(RawDesign::Gaussian { covariance: Some(c) }) => {
            let at_cov = format!("{path}.covariance");
            let sigma = matrix(&c, p, &at_cov)?;
            if (0..p).any(|i| (0..i).any(|j| sigma[[i, j]] != sigma[[j, i]])) {
                return Err(SlsError::config(at_cov, "covariance must be symmetric"));
            }
            let factor = linalg::cholesky(sigma.view())
                .map_err(|_| SlsError::config(&at_cov, "covariance must be positive definite"))?;
            DesignDistribution::GaussianGeneral { factor }
        }
        Some(RawDesign::Uniform { half_width: None }) => DesignDistribution::uniform_box(p),
        Some(RawDesign::Uniform { half_width: Some(h) }) => DesignDistribution::UniformBox { half_width: h },
    };
    d.validate(p).map_err(at(path))?;
    Ok(d)
}

fn root_options(raw: RawRoot, path: &str) -> Result<RootOptions> {
    let d = RootOptions::default();
    let opts = RootOptions {
        c_init: raw.c_init.unwrap_or(d.c_init),
        c_max: raw.c_max.unwrap_or(d.c_max),
        tol: raw.tol.unwrap_or(d.tol),
        max_iter: raw.max_iter.unwrap_or(d.max_iter),
        deriv_floor: raw.deriv_floor.unwrap_or(d.deriv_floor),
        root_subsample: raw.root_subsample.or(d.root_subsample),
    };
    opts.validate().map_err(at(path))?;
    Ok(opts)
}

fn links(kinds: &[LinkKind], path: &str) -> Result<()> {
    if kinds.is_empty() {
        return Err(SlsError::config(path, "at least one link is required"));
    }
    for (i, k) in kinds.iter().enumerate() {
        k.validate().map_err(at(&format!("{path}[{i}]")))?;
    }
    Ok(())
}

fn generate(g: RawGenerate) -> Result<GenerateConfig> {
    links(&g.links, "generate.links")?;
    check_path(&g.output, "generate.output")?;
    let mut synth = SynthConfig::new(g.n, g.p, g.links, g.seed);
    synth.dist = design(g.design, g.p, "generate.design")?;
    if let Some(v) = g.noise_std {
        synth.noise_std = v;
    }
    if let Some(v) = g.beta_mean {
        synth.beta_mean = v;
    }
    if let Some(v) = g.beta_std {
        synth.beta_std = v;
    }
    if let Some(rows) = g.beta_star {
        let k = synth.k();
        if rows.len() != k || rows.iter().any(|r| r.len() != g.p) {
            return Err(SlsError::config("generate.beta_star", format!("expected {k} rows of length {}", g.p)));
        }
        synth.beta_star = Some(Array2::from_shape_fn((k, g.p), |(i, j)| rows[i][j]));
    }
    synth.validate().map_err(at("generate"))?;
    let report = match g.report {
        Some(r) => {
            check_path(&r, "generate.report")?;
            r
        }
        None => default_report(&g.output),
    };
    Ok(GenerateConfig {
        synth,
        output: g.output,
        report,
    })
}

fn estimate(e: RawEstimate) -> Result<EstimateConfig> {
    links(&e.links, "estimate.links")?;
    check_path(&e.data, "estimate.data")?;
    check_path(&e.report, "estimate.report")?;
    let option = match (e.subsample_fraction, e.subsample_size) {
        (Some(_), Some(_)) => {
            return Err(SlsError::config(
                "estimate.subsample_size",
                "give either subsample_fraction or subsample_size",
            ))
        }
        (Some(f), None) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(SlsError::config("estimate.subsample_fraction", "must lie in (0, 1]"));
            }
            GramOption::Subsampled { size: SubsampleSize::Fraction(f), seed: e.subsample_seed }
        }
        (None, Some(m)) => {
            if m == 0 {
                return Err(SlsError::config("estimate.subsample_size", "must be positive"));
            }
            GramOption::Subsampled { size: SubsampleSize::Count(m), seed: e.subsample_seed }
        }
        (None, None) => GramOption::Full,
    };
    Ok(EstimateConfig {
        data: e.data,
        links: e.links,
        option,
        root: root_options(e.root, "estimate.root")?,
        report: e.report,
    })
}

fn experiment(x: RawExperiment) -> Result<ExperimentConfig> {
    links(&x.links, "experiment.links")?;
    check_path(&x.csv, "experiment.csv")?;
    let p = x.p.unwrap_or(20);
    let paper = matches!(x.grid, RawGrid::Paper);
    let sweep = match x.sweep {
        RawSweep::SampleSize => {
            if x.n.is_some() {
                return Err(SlsError::config("experiment.n", "only used with sweep = \"subsample\""));
            }
            let ns = match x.values {
                Some(v) => v
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| {
                        if n.fract() == 0.0 && (1.0..1e15).contains(&n) {
                            Ok(n as usize)
                        } else {
                            Err(SlsError::config(format!("experiment.values[{i}]"), "sample sizes must be positive integers"))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
                None if paper => PAPER_SAMPLE_SIZES.to_vec(),
                None => DESK_SAMPLE_SIZES.to_vec(),
            };
            Sweep::SampleSize(ns)
        }
        RawSweep::Subsample => Sweep::SubsampleFraction {
            n: x.n.unwrap_or(if paper { 500_000 } else { 200_000 }),
            fractions: x.values.unwrap_or_else(|| {
                if paper {
                    PAPER_FRACTIONS.to_vec()
                } else {
                    DESK_FRACTIONS.to_vec()
                }
            }),
        },
    };
    let mut plan = ExperimentPlan::new(sweep, x.links, x.seed);
    plan.p = p;
    plan.dist = design(x.design, p, "experiment.design")?;
    plan.root = root_options(x.root, "experiment.root")?;
    plan.pin_beta = x.pin_beta;
    plan.threads = x.threads;
    plan.max_resident = x.max_resident;
    if let Some(r) = x.repeats {
        plan.repeats = r;
    }
    if let Some(v) = x.noise_std {
        plan.noise_std = v;
    }
    if let Some(v) = x.beta_mean {
        plan.beta_mean = v;
    }
    if let Some(v) = x.beta_std {
        plan.beta_std = v;
    }
    if plan.repeats == 0 {
        return Err(SlsError::config("experiment.repeats", "must be at least 1"));
    }
    if x.threads == Some(0) {
        return Err(SlsError::config("experiment.threads", "must be positive"));
    }
    if x.max_resident == Some(0) {
        return Err(SlsError::config("experiment.max_resident", "must be positive"));
    }
    plan.validate().map_err(at("experiment"))?;
    if let Some(p) = &x.plot {
        check_path(p, "experiment.plot")?;
    }
    let report = match x.report {
        Some(r) => {
            check_path(&r, "experiment.report")?;
            r
        }
        None => default_report(&x.csv),
    };
    Ok(ExperimentConfig {
        plan,
        csv: x.csv,
        plot: x.plot,
        report,
        metric: match x.metric {
            RawMetric::L2 => ErrorMetric::L2,
            RawMetric::Linf => ErrorMetric::Linf,
        },
    })
}

fn verify(v: RawVerify) -> Result<VerifyConfig> {
    check_path(&v.report, "verify.report")?;
    let p = v.p.unwrap_or(20);
    if p == 0 {
        return Err(SlsError::config("verify.p", "must be positive"));
    }
    let n_mc = v.n_mc.unwrap_or(1_000_000);
    if n_mc < p {
        return Err(SlsError::config("verify.n_mc", format!("must be at least p = {p}")));
    }
    let grid_points = v.grid_points.unwrap_or(601);
    if grid_points < 2 {
        return Err(SlsError::config("verify.grid_points", "must be at least 2"));
    }
    let n_quad = v.n_quad.unwrap_or(200);
    if n_quad < 100 {
        return Err(SlsError::config("verify.n_quad", "must be at least 100"));
    }
    let sigma_factor = match v.covariance {
        None => Array2::eye(p) / (p as f64).sqrt(),
        Some(rows) => match design(Some(RawDesign::Gaussian { covariance: Some(rows) }), p, "verify")? {
            DesignDistribution::GaussianGeneral { factor } => factor,
            _ => unreachable!("a covariance always gives a general Gaussian"),
        },
    };
    let tol = |v: Option<f64>, d: f64, path: &str| match v {
        Some(t) if !(t > 0.0) => Err(SlsError::config(path, "must be positive")),
        Some(t) => Ok(t),
        None => Ok(d),
    };
    let mut checks = v
        .checks
        .unwrap_or_else(|| vec![Check::Stein, Check::Proportionality, Check::Theorem7, Check::Covariance]);
    if checks.is_empty() {
        return Err(SlsError::config("verify.checks", "at least one check is required"));
    }
    checks.dedup();
    Ok(VerifyConfig {
        checks,
        n_mc,
        seed: v.seed,
        p,
        sigma_factor,
        grid_points,
        n_quad,
        stein_tol: tol(v.stein_tol, 0.01, "verify.stein_tol")?,
        proportionality_tol: tol(v.proportionality_tol, 0.05, "verify.proportionality_tol")?,
        report: v.report,
    })
}
