//! Independent checks of the theory behind the estimator.
//!
//! * Stein's identity `E[W g(W)] = E[g'(W)]` for `W ~ N(0, 1)` (the Gaussian
//!   is its own zero-bias distribution).
//! * The proportionality `beta* = c * beta_ols` under Gaussian designs, both
//!   by Monte Carlo and in closed form for the cubic link.
//! * The sigmoid constants: `l(6) > 1.22` and `l' >= 0.19` on `[0, 6]`.
//! * Condition numbers and the diagonal dominance of `Sigma^{1/2}`.
//!
//! Monte-Carlo loops are split into fixed-size chunks, each with its own
//! stream; chunk sums are added in chunk order, so results do not depend on
//! the thread count.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Result, SlsError};
use crate::linalg;
use crate::model::{sigmoid_d1, sigmoid_d2, sigmoid_d3, LinkFunction};
use crate::quadrature::GaussHermite;
use crate::rng;

const CHUNK: usize = 1 << 16;

/// Splits `n` draws into chunks and sums `f(chunk_rng, count)` over them in
/// chunk order.
fn chunked_sum<T, F>(n: usize, seed: u64, zero: T, f: F, add: impl Fn(T, T) -> T) -> T
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n - c * CHUNK);
            f(&mut rng::chunk_stream(seed, c as u64), count)
        })
        .collect();
    parts.into_iter().fold(zero, add)
}

/// `|mean(z g(z)) - mean(g'(z))|` over `n_mc` standard normal draws.
pub fn stein_identity_gap<G, D>(g: G, dg: D, n_mc: usize, seed: u64) -> Result<f64>
where
    G: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    if n_mc == 0 {
        return Err(SlsError::InvalidInput("n_mc must be positive".into()));
    }
    let (lhs, rhs) = chunked_sum(
        n_mc,
        seed,
        (0.0, 0.0),
        |rng, count| {
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..count {
                let z: f64 = StandardNormal.sample(rng);
                a += z * g(z);
                b += dg(z);
            }
            (a, b)
        },
        |x, y| (x.0 + y.0, x.1 + y.1),
    );
    let n = n_mc as f64;
    Ok((lhs / n - rhs / n).abs())
}

/// Closed-form population quantities for `f(z) = z^3` and `x ~ N(0, Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicOracle {
    pub c: f64,
    pub beta_ols: Array1<f64>,
}

/// With `q = beta*^T Sigma beta*`, `E[f'(<x, beta*>)] = 3q`, so
/// `beta_ols = 3q beta*` and `c = 1 / (3q)`.
pub fn cubic_oracle(beta_star: ArrayView1<f64>, sigma_factor: ArrayView2<f64>) -> Result<CubicOracle> {
    check_factor(sigma_factor, beta_star.len())?;
    // q = |L^T beta|^2
    let q = sigma_factor.t().dot(&beta_star).mapv(|v| v * v).sum();
    if q <= 0.0 {
        return Err(SlsError::DegenerateDirection {
            index: 0,
            reason: "beta*^T Sigma beta* = 0".into(),
        });
    }
    let m = 3.0 * q;
    Ok(CubicOracle {
        c: 1.0 / m,
        beta_ols: beta_star.mapv(|v| m * v),
    })
}

/// Monte-Carlo estimate of the population OLS direction and its distance
/// from `beta*` after rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalityGap {
    /// `|beta_ols / m - beta*| / |beta*|`
    pub gap: f64,
    /// `Sigma^-1 mean(f(<x, beta*>) x)` with the exact `Sigma`.
    pub beta_ols: Array1<f64>,
    /// `m = mean(f'(<x, beta*>))`
    pub mean_deriv: f64,
}

/// Checks `beta* = c beta_ols` with `c = 1 / E[f']` by sampling `x = L w`.
/// The random coefficient is integrated out analytically:
/// `E[z_j y x] = E[f_j(<x, beta*_j>) x]`.
pub fn proportionality_gap(
    link: &LinkFunction,
    beta_star: ArrayView1<f64>,
    sigma_factor: ArrayView2<f64>,
    n_mc: usize,
    seed: u64,
) -> Result<ProportionalityGap> {
    let p = beta_star.len();
    check_factor(sigma_factor, p)?;
    if n_mc < p {
        return Err(SlsError::InvalidInput(format!("n_mc = {n_mc} must be at least p = {p}")));
    }
    let norm = beta_star.dot(&beta_star).sqrt();
    if norm == 0.0 {
        return Err(SlsError::DegenerateDirection {
            index: 0,
            reason: "beta* is zero".into(),
        });
    }
    // Draw in the whitened coordinates: <x, beta> = <w, L^T beta>.
    let whitened_beta = sigma_factor.t().dot(&beta_star);
    let (moment_w, deriv_sum) = chunked_sum(
        n_mc,
        seed,
        (Array1::<f64>::zeros(p), 0.0),
        |rng, count| {
            let mut acc = Array1::<f64>::zeros(p);
            let mut d = 0.0;
            let mut w = Array1::<f64>::zeros(p);
            for _ in 0..count {
                w.mapv_inplace(|_| StandardNormal.sample(rng));
                let t = w.dot(&whitened_beta);
                acc.scaled_add(link.eval(t), &w);
                d += link.d1(t);
            }
            (acc, d)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    let n = n_mc as f64;
    let mean_deriv = deriv_sum / n;
    if mean_deriv.abs() < 1e-12 {
        return Err(SlsError::DegenerateDirection {
            index: 0,
            reason: format!("mean link derivative {mean_deriv:e} vanishes"),
        });
    }
    // mean(f x) = L mean(f w); Sigma^-1 L u = L^-T u.
    let u = moment_w / n;
    let beta_ols = linalg::solve_lower_transpose(sigma_factor, u.view());
    let diff = &beta_ols / mean_deriv - beta_star;
    Ok(ProportionalityGap {
        gap: diff.dot(&diff).sqrt() / norm,
        beta_ols,
        mean_deriv,
    })
}

fn check_factor(factor: ArrayView2<f64>, p: usize) -> Result<()> {
    if factor.dim() != (p, p) {
        return Err(SlsError::DimensionMismatch(format!(
            "covariance factor is {:?}, expected ({p}, {p})",
            factor.dim()
        )));
    }
    for i in 0..p {
        if !(factor[[i, i]] > 0.0) || (i + 1..p).any(|j| factor[[i, j]] != 0.0) {
            return Err(SlsError::InvalidInput(
                "covariance factor must be lower triangular with a positive diagonal".into(),
            ));
        }
    }
    Ok(())
}

/// Upper end of the search interval for the sigmoid scale.
pub const SIGMOID_C_BAR: f64 = 6.0;
/// Required margin: `l(c_bar) > 1 + ETA`.
pub const SIGMOID_ETA: f64 = 0.22;
/// Required lower bound of `l'` on `[0, c_bar]`.
pub const SIGMOID_M: f64 = 0.19;
/// Standard deviation of `<x, beta_ols>` when `x ~ N(0, I/p)` and
/// `|beta_ols| = sqrt(p) / 20`.
const PROJECTION_STD: f64 = 1.0 / 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem7Report {
    /// `f'(2.5) - 2.5 f''(2.5)`: intercept of the tangent of `f'` at 2.5.
    pub a: f64,
    /// `-f''(2.5)`: minus its slope.
    pub b: f64,
    pub ell_at_6: f64,
    pub min_ell_deriv: f64,
    pub passed: bool,
}

/// Evaluates the sigmoid scale function `l(z) = z E[f'(W z / 20)]` and its
/// derivative `l'(z) = E[f'(W z / 20)] + (z / 20)^2 E[f'''(W z / 20)]` by
/// Gauss-Hermite quadrature, and checks `l(6) > 1.22` and
/// `min l' >= 0.19` over a uniform grid on `[0, 6]`.
pub fn theorem7_check(grid_points: usize, n_quad: usize) -> Result<Theorem7Report> {
    if grid_points < 2 {
        return Err(SlsError::InvalidInput("grid_points must be at least 2".into()));
    }
    if n_quad < 100 {
        return Err(SlsError::InvalidInput("n_quad must be at least 100".into()));
    }
    let rule = GaussHermite::new(n_quad)?;
    let ell = |z: f64| z * rule.expectation(|w| sigmoid_d1(w * z * PROJECTION_STD));
    let ell_deriv = |z: f64| {
        let s = z * PROJECTION_STD;
        rule.expectation(|w| sigmoid_d1(w * s)) + s * s * rule.expectation(|w| sigmoid_d3(w * s))
    };
    let ell_at_6 = ell(SIGMOID_C_BAR);
    let min_ell_deriv = (0..grid_points)
        .map(|i| ell_deriv(SIGMOID_C_BAR * i as f64 / (grid_points - 1) as f64))
        .fold(f64::INFINITY, f64::min);
    Ok(Theorem7Report {
        a: sigmoid_d1(2.5) - 2.5 * sigmoid_d2(2.5),
        b: -sigmoid_d2(2.5),
        ell_at_6,
        min_ell_deriv,
        passed: ell_at_6 > 1.0 + SIGMOID_ETA && min_ell_deriv >= SIGMOID_M,
    })
}

/// Conditioning summary of `Sigma = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSummary {
    pub lambda_min: f64,
    /// `lambda_max / lambda_min`
    pub rho_2: f64,
    /// `|Sigma|_inf |Sigma^-1|_inf` (max absolute row sums)
    pub rho_inf: f64,
    /// Whether the symmetric square root `U diag(sqrt(lambda)) U^T` is
    /// (weakly) diagonally dominant.
    pub diag_dominant_sqrt: bool,
}

pub fn covariance_summary(sigma_factor: ArrayView2<f64>) -> Result<CovarianceSummary> {
    let p = sigma_factor.nrows();
    if sigma_factor.ncols() != p || p == 0 {
        return Err(SlsError::DimensionMismatch(format!(
            "covariance factor must be square, got {:?}",
            sigma_factor.dim()
        )));
    }
    let sigma = sigma_factor.dot(&sigma_factor.t());
    let (values, vectors) = linalg::symmetric_eigen(sigma.view());
    let lambda_min = values[0];
    let lambda_max = values[p - 1];
    if !(lambda_min > 0.0) {
        return Err(SlsError::InvalidInput("covariance is not positive definite".into()));
    }
    let spectral = |g: &dyn Fn(f64) -> f64| -> Array2<f64> {
        let scaled = &vectors * &values.mapv(g);
        scaled.dot(&vectors.t())
    };
    let inverse = spectral(&|l| 1.0 / l);
    let root = spectral(&|l| l.sqrt());
    let inf_norm = |m: &Array2<f64>| {
        m.rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let tol = 1e-12 * inf_norm(&root);
    let diag_dominant_sqrt = (0..p).all(|i| {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| root[[i, j]].abs()).sum();
        root[[i, i]].abs() + tol >= off
    });
    Ok(CovarianceSummary {
        lambda_min,
        rho_2: (lambda_max / lambda_min).max(1.0),
        rho_inf: (inf_norm(&sigma) * inf_norm(&inverse)).max(1.0),
        diag_dominant_sqrt,
    })
}

/// Standard normal draws for callers that want the same chunked stream
/// layout as the checks above.
pub fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
    chunked_sum(
        n,
        seed,
        Vec::with_capacity(n),
        |rng, count| (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>(),
        |mut a, b| {
            a.extend(b);
            a
        },
    )
}
