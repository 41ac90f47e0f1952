//! Experiment grids: error against sample size and against sub-sample size.
//!
//! Every `(sweep point, repeat)` pair owns a seed derived from the master
//! seed, so the records of a run do not depend on thread count or
//! scheduling. Records are returned sorted by `(sweep, repeat)`.

mod csv;
mod plot;

pub use self::csv::{emit_csv, parse_csv, read_csv, write_csv, CsvRow, CSV_HEADER};
pub use self::plot::{emit_plot, render_svg};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, SlsError};
use crate::estimator::{sls_estimate, GramOption, RootOptions, SubsampleSize};
use crate::model::{LinkFunction, LinkKind};
use crate::rng::{self, Stream};
use crate::synth::{self, DesignDistribution, SynthConfig};

/// `max_j |beta_hat_j - beta*_j|_2 / |beta*_j|_2`
pub fn relative_error_l2(beta_hat: ArrayView2<f64>, beta_star: ArrayView2<f64>) -> Result<f64> {
    relative_error(beta_hat, beta_star, |r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `max_j |beta_hat_j - beta*_j|_inf / |beta*_j|_inf`
pub fn relative_error_linf(beta_hat: ArrayView2<f64>, beta_star: ArrayView2<f64>) -> Result<f64> {
    relative_error(beta_hat, beta_star, |r| r.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
}

fn relative_error<N>(beta_hat: ArrayView2<f64>, beta_star: ArrayView2<f64>, norm: N) -> Result<f64>
where
    N: Fn(&[f64]) -> f64,
{
    if beta_hat.dim() != beta_star.dim() {
        return Err(SlsError::DimensionMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            beta_hat.dim(),
            beta_star.dim()
        )));
    }
    let mut worst = 0.0f64;
    for (j, (h, s)) in beta_hat.rows().into_iter().zip(beta_star.rows()).enumerate() {
        let s = s.to_vec();
        let scale = norm(&s);
        if scale == 0.0 {
            return Err(SlsError::DegenerateDirection {
                index: j,
                reason: "true coefficient row is zero".into(),
            });
        }
        let diff: Vec<f64> = h.iter().zip(&s).map(|(a, b)| a - b).collect();
        let e = norm(&diff) / scale;
        // NaN from a failed direction must not be swallowed by max
        if e.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    L2,
    Linf,
}

impl ErrorMetric {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMetric::L2 => "err_l2_rel",
            ErrorMetric::Linf => "err_linf_rel",
        }
    }
}

/// What varies across the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Full Gram inverse at each sample size.
    SampleSize(Vec<usize>),
    /// Sub-sampled Gram inverse with `|S| = fraction * n` at a fixed `n`.
    SubsampleFraction { n: usize, fractions: Vec<f64> },
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::SampleSize(ns) => ns.iter().map(|&n| n as f64).collect(),
            Sweep::SubsampleFraction { fractions, .. } => fractions.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Sweep::SampleSize(_) => "n",
            Sweep::SubsampleFraction { .. } => "|S|/n",
        }
    }

    fn len(&self) -> usize {
        match self {
            Sweep::SampleSize(ns) => ns.len(),
            Sweep::SubsampleFraction { fractions, .. } => fractions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub sweep: Sweep,
    pub p: usize,
    pub dist: DesignDistribution,
    pub links: Vec<LinkKind>,
    pub repeats: usize,
    pub master_seed: u64,
    pub noise_std: f64,
    pub beta_mean: f64,
    pub beta_std: f64,
    /// Draw `beta*` once from the master seed instead of once per record.
    pub pin_beta: bool,
    pub root: RootOptions,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Upper bound on datasets held in memory at once; `None` means one per
    /// worker thread.
    pub max_resident: Option<usize>,
}

/// Sample sizes of the scaled-down grid.
pub const DESK_SAMPLE_SIZES: [usize; 5] = [12_500, 25_000, 50_000, 100_000, 200_000];
/// Sample sizes of the original grid.
pub const PAPER_SAMPLE_SIZES: [usize; 5] = [100_000, 200_000, 300_000, 400_000, 500_000];
pub const DESK_FRACTIONS: [f64; 4] = [0.01, 0.05, 0.2, 1.0];
pub const PAPER_FRACTIONS: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

impl ExperimentPlan {
    /// Gaussian design, `p = 20`, 20 repeats, unit noise, `beta*` prior
    /// `N(1, 16)`.
    pub fn new(sweep: Sweep, links: Vec<LinkKind>, master_seed: u64) -> Self {
        ExperimentPlan {
            sweep,
            p: 20,
            dist: DesignDistribution::GaussianIsotropic,
            links,
            repeats: 20,
            master_seed,
            noise_std: 1.0,
            beta_mean: 1.0,
            beta_std: 4.0,
            pin_beta: false,
            root: RootOptions::default(),
            threads: None,
            max_resident: None,
        }
    }

    /// Error against `n`; `paper_grid` selects `n` up to 500k instead of 200k.
    pub fn sample_size_grid(links: Vec<LinkKind>, master_seed: u64, paper_grid: bool) -> Self {
        let ns = if paper_grid { PAPER_SAMPLE_SIZES.to_vec() } else { DESK_SAMPLE_SIZES.to_vec() };
        Self::new(Sweep::SampleSize(ns), links, master_seed)
    }

    /// Error against `|S| / n`.
    pub fn subsample_grid(links: Vec<LinkKind>, master_seed: u64, paper_grid: bool) -> Self {
        let sweep = if paper_grid {
            Sweep::SubsampleFraction { n: 500_000, fractions: PAPER_FRACTIONS.to_vec() }
        } else {
            Sweep::SubsampleFraction { n: 200_000, fractions: DESK_FRACTIONS.to_vec() }
        };
        Self::new(sweep, links, master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SlsError::InvalidInput(m));
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.sweep.len() == 0 {
            return bad("sweep must not be empty".into());
        }
        let values = self.sweep.values();
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad("sweep values must be positive".into());
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep values must be strictly increasing".into());
        }
        if let Sweep::SubsampleFraction { n, fractions } = &self.sweep {
            for &f in fractions {
                SubsampleSize::Fraction(f).resolve(*n, self.p)?;
            }
        }
        if self.threads == Some(0) || self.max_resident == Some(0) {
            return bad("threads and max_resident must be positive".into());
        }
        self.root.validate()?;
        // A config at the smallest n covers every other design check.
        self.synth_config(0, 0).validate()
    }

    fn synth_config(&self, sweep_index: usize, seed: u64) -> SynthConfig {
        let n = match &self.sweep {
            Sweep::SampleSize(ns) => ns[sweep_index],
            Sweep::SubsampleFraction { n, .. } => *n,
        };
        SynthConfig {
            n,
            p: self.p,
            dist: self.dist.clone(),
            links: self.links.clone(),
            beta_mean: self.beta_mean,
            beta_std: self.beta_std,
            noise_std: self.noise_std,
            master_seed: seed,
            beta_star: None,
        }
    }

    /// Seed of the dataset behind record `(sweep_index, repeat)`. Fractions
    /// of one repeat share a dataset, so the sub-sampling sweep compares
    /// Gram estimates on identical data.
    pub fn data_seed(&self, sweep_index: usize, repeat: usize) -> u64 {
        let point = match self.sweep {
            Sweep::SampleSize(_) => sweep_index as u64,
            Sweep::SubsampleFraction { .. } => 0,
        };
        rng::derive_seed(self.master_seed, &[point, repeat as u64])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub sweep_value: f64,
    pub sweep_index: usize,
    pub repeat: usize,
    /// Dataset seed.
    pub seed: u64,
    /// NaN when a direction failed.
    pub err_l2_rel: f64,
    pub err_linf_rel: f64,
    pub c_hat: Vec<f64>,
    pub newton_iters_max: usize,
    /// Wall time of the estimator alone.
    pub runtime_ms: f64,
    pub failed: bool,
}

impl ExperimentRecord {
    pub fn error(&self, metric: ErrorMetric) -> f64 {
        match metric {
            ErrorMetric::L2 => self.err_l2_rel,
            ErrorMetric::Linf => self.err_linf_rel,
        }
    }
}

/// Runs every `(sweep point, repeat)` of the plan. A record whose estimate
/// has a failed direction is flagged and the run continues.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    plan.validate()?;
    let threads = plan
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outer = threads.min(plan.max_resident.unwrap_or(threads)).max(1);
    let inner = rayon::ThreadPoolBuilder::new()
        .num_threads((threads / outer).max(1))
        .build()
        .map_err(|e| SlsError::InvalidInput(format!("thread pool: {e}")))?;

    let links: Vec<LinkFunction> = plan.links.iter().map(|&k| LinkFunction::new(k)).collect::<Result<_>>()?;
    let pinned = if plan.pin_beta {
        let cfg = plan.synth_config(0, plan.master_seed);
        Some(synth::sample_beta_star(&cfg, &mut rng::stream(plan.master_seed, Stream::BetaStar)))
    } else {
        None
    };

    let jobs: Vec<(usize, usize)> = (0..plan.sweep.len())
        .flat_map(|s| (0..plan.repeats).map(move |r| (s, r)))
        .collect();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(jobs.len()));
    let values = plan.sweep.values();

    // Plain threads pull jobs; nested rayon work inside the estimator cannot
    // steal another job, which keeps at most `outer` datasets alive.
    std::thread::scope(|scope| {
        for _ in 0..outer {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, r)) = jobs.get(i) else { break };
                let rec = inner.install(|| run_one(plan, &links, pinned.as_ref(), &values, s, r));
                let failed = rec.is_err();
                results.lock().unwrap().push(rec);
                if failed {
                    break;
                }
            });
        }
    });

    let mut records = results.into_inner().unwrap().into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.sweep_index, r.repeat));
    Ok(records)
}

fn run_one(
    plan: &ExperimentPlan,
    links: &[LinkFunction],
    pinned: Option<&Array2<f64>>,
    values: &[f64],
    sweep_index: usize,
    repeat: usize,
) -> Result<ExperimentRecord> {
    let seed = plan.data_seed(sweep_index, repeat);
    let mut cfg = plan.synth_config(sweep_index, seed);
    cfg.beta_star = pinned.cloned();
    let (data, spec) = synth::generate(&cfg)?;
    let beta_star = spec.beta_star.expect("generated data carries beta*");
    let option = match &plan.sweep {
        Sweep::SampleSize(_) => GramOption::Full,
        Sweep::SubsampleFraction { fractions, .. } => GramOption::Subsampled {
            size: SubsampleSize::Fraction(fractions[sweep_index]),
            seed: rng::derive_seed(seed, &[sweep_index as u64]),
        },
    };
    let start = Instant::now();
    let est = sls_estimate(&data, links, &option, &plan.root)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let failed = !est.is_complete();
    let (err_l2_rel, err_linf_rel) = if failed {
        (f64::NAN, f64::NAN)
    } else {
        (
            relative_error_l2(est.beta_nlr.view(), beta_star.view())?,
            relative_error_linf(est.beta_nlr.view(), beta_star.view())?,
        )
    };
    Ok(ExperimentRecord {
        sweep_value: values[sweep_index],
        sweep_index,
        repeat,
        seed,
        err_l2_rel,
        err_linf_rel,
        c_hat: est.c_hat.to_vec(),
        newton_iters_max: est.diagnostics.iter().map(|d| d.root.newton_iters).max().unwrap_or(0),
        runtime_ms,
        failed,
    })
}

/// Aggregate of one sweep point. Failed records are counted, not averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub sweep_value: f64,
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-sweep-point statistics of `metric`, ordered by sweep value.
pub fn summarize(records: &[ExperimentRecord], metric: ErrorMetric) -> Vec<SweepSummary> {
    let mut values: Vec<f64> = records.iter().map(|r| r.sweep_value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let group: Vec<&ExperimentRecord> = records.iter().filter(|r| r.sweep_value == v).collect();
            let mut errs: Vec<f64> = group
                .iter()
                .filter(|r| !r.failed && r.error(metric).is_finite())
                .map(|r| r.error(metric))
                .collect();
            errs.sort_by(f64::total_cmp);
            let m = errs.len();
            let (mean, median, min, max) = if m == 0 {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            } else {
                let median = if m % 2 == 1 { errs[m / 2] } else { 0.5 * (errs[m / 2 - 1] + errs[m / 2]) };
                (errs.iter().sum::<f64>() / m as f64, median, errs[0], errs[m - 1])
            };
            SweepSummary {
                sweep_value: v,
                count: group.len(),
                failures: group.len() - m,
                mean,
                median,
                min,
                max,
            }
        })
        .collect()
}

/// Least-squares slope of `log(mean error)` against `log(sweep value)`.
pub fn fit_convergence_slope(records: &[ExperimentRecord], metric: ErrorMetric) -> Result<f64> {
    let summary = summarize(records, metric);
    let points: Vec<(f64, f64)> = summary.iter().map(|s| (s.sweep_value, s.mean)).collect();
    log_log_slope(&points)
}

/// Least-squares slope of `log y` against `log x`; needs three distinct `x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(SlsError::InsufficientPoints { needed: 3, got: xs.len() });
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(SlsError::InvalidInput("log-log fit needs positive finite points".into()));
    }
    let m = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
