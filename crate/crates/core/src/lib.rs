//! Scaled least squares (SLS) for mixtures of non-linear regressions
//!
//! ```text
//! y = sum_j z_j f_j(<beta*_j, x>) + eps
//! ```
//!
//! with known links `f_j`, observed random coefficients `z_j` and unknown
//! directions `beta*_j`. Under a Gaussian design each `beta*_j` is a scalar
//! multiple of the least-squares fit of `z_j y` on `x`, so the estimator is
//! one Gram inverse, `k` matrix-vector products and `k` scalar root finds.
//!
//! * [`model`]: links, model specification and datasets.
//! * [`estimator`]: the estimator with full or sub-sampled Gram inverse.
//! * [`synth`]: seeded synthetic data.
//! * [`verify`]: numerical checks of the underlying identities.
//! * [`bench`]: error-vs-size sweeps, slope fits, CSV and SVG output.
//! * [`config`], [`cli`], [`io`], [`report`]: the `sls` binary's plumbing.
//!
//! ```
//! use sls::{sls_estimate, GramOption, LinkFunction, LinkKind, RootOptions, SynthConfig};
//!
//! let mut cfg = SynthConfig::new(20_000, 10, vec![LinkKind::Identity], 1);
//! cfg.noise_std = 0.0;
//! let (data, spec) = sls::synth::generate(&cfg).unwrap();
//! let est = sls_estimate(&data, &[LinkFunction::identity()], &GramOption::Full, &RootOptions::default()).unwrap();
//! let err = sls::bench::relative_error_l2(est.beta_nlr.view(), spec.beta_star.unwrap().view()).unwrap();
//! assert!(err < 0.1);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod synth;
pub mod verify;

pub use bench::{ErrorMetric, ExperimentPlan, ExperimentRecord, Sweep};
pub use error::{Result, SlsError};
pub use estimator::{sls_estimate, EstimationResult, GramOption, RootOptions, SubsampleSize};
pub use model::{Dataset, LinkFunction, LinkKind, ModelSpec};
pub use synth::{DesignDistribution, SynthConfig};
