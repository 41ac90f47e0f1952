//! Seeded synthetic data.
//!
//! Defaults follow the usual benchmark setting: `beta*` coordinates drawn
//! from `N(1, 4^2)`, coefficients and noise standard normal, and either a
//! Gaussian design `N(0, I/p)` or a uniform box design.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::error::{Result, SlsError};
use crate::model::{self, Dataset, LinkFunction, LinkKind, ModelSpec};
use crate::rng::{self, Stream};

/// Law of a design row `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignDistribution {
    /// `x ~ N(0, I / p)`.
    GaussianIsotropic,
    /// `x = L w` with `w ~ N(0, I)`, so `Cov(x) = L L^T`. `L` is lower
    /// triangular with a positive diagonal.
    GaussianGeneral { factor: Array2<f64> },
    /// Entries i.i.d. uniform on `[-half_width, half_width]`.
    UniformBox { half_width: f64 },
}

impl DesignDistribution {
    /// Uniform box with the default half width `1 / p`.
    pub fn uniform_box(p: usize) -> Self {
        DesignDistribution::UniformBox {
            half_width: 1.0 / p as f64,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            DesignDistribution::GaussianIsotropic => Ok(()),
            DesignDistribution::GaussianGeneral { factor } => {
                if factor.dim() != (p, p) {
                    return Err(SlsError::DimensionMismatch(format!(
                        "covariance factor is {:?}, expected ({p}, {p})",
                        factor.dim()
                    )));
                }
                for i in 0..p {
                    if !(factor[[i, i]] > 0.0) {
                        return Err(SlsError::InvalidInput(format!(
                            "covariance factor diagonal entry {i} is not positive"
                        )));
                    }
                    if (i + 1..p).any(|j| factor[[i, j]] != 0.0) {
                        return Err(SlsError::InvalidInput("covariance factor must be lower triangular".into()));
                    }
                }
                if factor.iter().any(|v| !v.is_finite()) {
                    return Err(SlsError::InvalidInput("covariance factor is not finite".into()));
                }
                Ok(())
            }
            DesignDistribution::UniformBox { half_width } => {
                if *half_width > 0.0 && half_width.is_finite() {
                    Ok(())
                } else {
                    Err(SlsError::InvalidInput(format!("half_width must be positive, got {half_width}")))
                }
            }
        }
    }

    /// Covariance of one design row.
    pub fn covariance(&self, p: usize) -> Array2<f64> {
        match self {
            DesignDistribution::GaussianIsotropic => Array2::eye(p) / p as f64,
            DesignDistribution::GaussianGeneral { factor } => factor.dot(&factor.t()),
            DesignDistribution::UniformBox { half_width } => Array2::eye(p) * (half_width * half_width / 3.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub dist: DesignDistribution,
    /// One link per direction; `k = links.len()`.
    pub links: Vec<LinkKind>,
    pub beta_mean: f64,
    pub beta_std: f64,
    pub noise_std: f64,
    pub master_seed: u64,
    /// Fixed ground truth (k x p). Drawn from the prior when absent.
    pub beta_star: Option<Array2<f64>>,
}

impl SynthConfig {
    /// Defaults: isotropic Gaussian design, `beta*` prior `N(1, 16)`, unit
    /// noise.
    pub fn new(n: usize, p: usize, links: Vec<LinkKind>, master_seed: u64) -> Self {
        SynthConfig {
            n,
            p,
            dist: DesignDistribution::GaussianIsotropic,
            links,
            beta_mean: 1.0,
            beta_std: 4.0,
            noise_std: 1.0,
            master_seed,
            beta_star: None,
        }
    }

    pub fn k(&self) -> usize {
        self.links.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.links.is_empty() {
            return Err(SlsError::InvalidInput("p and k must be positive".into()));
        }
        if self.n < self.p {
            return Err(SlsError::InvalidInput(format!("need n >= p, got n = {}, p = {}", self.n, self.p)));
        }
        if !(self.beta_std >= 0.0 && self.beta_std.is_finite() && self.beta_mean.is_finite()) {
            return Err(SlsError::InvalidInput("beta prior must be finite with beta_std >= 0".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(SlsError::InvalidInput("noise_std must be finite and >= 0".into()));
        }
        for kind in &self.links {
            kind.validate()?;
        }
        if let Some(b) = &self.beta_star {
            if b.dim() != (self.k(), self.p) {
                return Err(SlsError::DimensionMismatch(format!(
                    "beta_star is {:?}, expected ({}, {})",
                    b.dim(),
                    self.k(),
                    self.p
                )));
            }
        }
        self.dist.validate(self.p)
    }
}

/// `k x p` matrix with i.i.d. `N(beta_mean, beta_std^2)` entries.
pub fn sample_beta_star<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Array2<f64> {
    let (k, p) = (cfg.k(), cfg.p);
    Array2::from_shape_simple_fn((k, p), || {
        let w: f64 = StandardNormal.sample(rng);
        cfg.beta_mean + cfg.beta_std * w
    })
}

/// `n x p` design drawn row by row.
pub fn sample_design<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Array2<f64> {
    let (n, p) = (cfg.n, cfg.p);
    match &cfg.dist {
        DesignDistribution::GaussianIsotropic => {
            let normal = Normal::new(0.0, (1.0 / p as f64).sqrt()).expect("positive scale");
            Array2::from_shape_simple_fn((n, p), || normal.sample(rng))
        }
        DesignDistribution::GaussianGeneral { factor } => {
            let mut x = Array2::<f64>::zeros((n, p));
            let mut w = Array1::<f64>::zeros(p);
            for mut row in x.rows_mut() {
                w.mapv_inplace(|_| StandardNormal.sample(rng));
                for i in 0..p {
                    let mut s = 0.0;
                    for j in 0..=i {
                        s += factor[[i, j]] * w[j];
                    }
                    row[i] = s;
                }
            }
            x
        }
        DesignDistribution::UniformBox { half_width } => {
            let h = *half_width;
            let unif = Uniform::new_inclusive(-h, h).expect("valid bounds");
            Array2::from_shape_simple_fn((n, p), || unif.sample(rng))
        }
    }
}

/// Draws a full dataset and the model that produced it.
///
/// `beta*`, `X`, `Z` and the noise come from separate streams of
/// `master_seed`, so changing `n` keeps the same `beta*` and extends `X`,
/// `Z` and the noise without reshuffling earlier rows.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, ModelSpec)> {
    cfg.validate()?;
    let (n, k) = (cfg.n, cfg.k());
    let seed = cfg.master_seed;
    let beta_star = match &cfg.beta_star {
        Some(b) => b.clone(),
        None => sample_beta_star(cfg, &mut rng::stream(seed, Stream::BetaStar)),
    };
    let x = sample_design(cfg, &mut rng::stream(seed, Stream::Design));

    let mut coef_rng = rng::stream(seed, Stream::Coefficients);
    let z = Array2::from_shape_simple_fn((n, k), || StandardNormal.sample(&mut coef_rng));

    let mut noise_rng = rng::stream(seed, Stream::Noise);
    let eps = Array1::from_shape_simple_fn(n, || {
        let w: f64 = StandardNormal.sample(&mut noise_rng);
        cfg.noise_std * w
    });

    let links: Vec<LinkFunction> = cfg.links.iter().map(|&kind| LinkFunction::new(kind)).collect::<Result<_>>()?;
    let spec = ModelSpec::new(cfg.p, links, Some(beta_star), cfg.noise_std)?;

    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        y[i] = model::response(&spec, x.row(i), z.row(i), eps[i])?;
    }
    Ok((Dataset::new(x, z, y)?, spec))
}
