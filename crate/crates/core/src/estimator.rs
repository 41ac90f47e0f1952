//! The scaled least squares estimator.
//!
//! For each direction `j` the estimator
//!
//! 1. forms the surrogate response `Y_j = z_j * y` (elementwise),
//! 2. regresses it on `X` to get `beta_ols_j = (X^T X)^-1 X^T Y_j`,
//! 3. solves the scalar scale equation `(c / n) sum_i f_j'(c * ytilde_i) = 1`
//!    with `ytilde = X beta_ols_j`, and
//! 4. returns `beta_nlr_j = c_j * beta_ols_j`.
//!
//! The Gram inverse is computed once and shared by all directions. It can be
//! replaced by the cheaper sub-sampled surrogate `(|S| / n) (X_S^T X_S)^-1`.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Result, SlsError};
use crate::linalg;
use crate::model::{Dataset, LinkFunction};
use crate::rng::{self, Stream};

/// Where a [`GramInverse`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramSource {
    Full,
    Subsampled { size: usize },
}

/// An approximation of `(X^T X)^-1`. Symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct GramInverse {
    pub matrix: Array2<f64>,
    pub source: GramSource,
}

/// `(X^T X)^-1` through a Cholesky factorization.
pub fn gram_inverse_full(x: ArrayView2<f64>) -> Result<GramInverse> {
    check_rows(x, x.nrows())?;
    let gram = x.t().dot(&x);
    Ok(GramInverse {
        matrix: linalg::spd_inverse(gram.view())?,
        source: GramSource::Full,
    })
}

/// `(|S| / n) (X_S^T X_S)^-1` for the rows listed in `indices`.
pub fn gram_inverse_subsampled(x: ArrayView2<f64>, indices: &[usize]) -> Result<GramInverse> {
    let n = x.nrows();
    check_rows(x, indices.len())?;
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(SlsError::InvalidInput(format!("subsample index {i} out of range for n = {n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(SlsError::InvalidInput(format!("subsample index {i} repeated")));
        }
    }
    let xs = x.select(Axis(0), indices);
    let gram = xs.t().dot(&xs);
    let mut matrix = linalg::spd_inverse(gram.view())?;
    let ratio = indices.len() as f64 / n as f64;
    matrix.mapv_inplace(|v| v * ratio);
    Ok(GramInverse {
        matrix,
        source: GramSource::Subsampled { size: indices.len() },
    })
}

fn check_rows(x: ArrayView2<f64>, rows: usize) -> Result<()> {
    if rows < x.ncols() {
        return Err(SlsError::InvalidInput(format!(
            "need at least p = {} rows for the Gram matrix, got {rows}",
            x.ncols()
        )));
    }
    Ok(())
}

/// `ginv * X^T (z_col .* y)`.
pub fn ols_direction(
    ginv: &GramInverse,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    z_col: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let (n, p) = x.dim();
    if y.len() != n || z_col.len() != n || ginv.matrix.dim() != (p, p) {
        return Err(SlsError::DimensionMismatch(format!(
            "x is ({n}, {p}), y has {}, z has {}, Gram inverse is {:?}",
            y.len(),
            z_col.len(),
            ginv.matrix.dim()
        )));
    }
    let surrogate = &z_col * &y;
    let xty = x.t().dot(&surrogate);
    Ok(ginv.matrix.dot(&xty))
}

/// `(c / n) sum_i f'(c * ytilde_i)`
pub fn empirical_scale(c: f64, ytilde: ArrayView1<f64>, link: &LinkFunction) -> f64 {
    let n = ytilde.len() as f64;
    let sum: f64 = ytilde.iter().map(|&v| link.d1(c * v)).sum();
    c * sum / n
}

/// Derivative of [`empirical_scale`] in `c`:
/// `(1 / n) sum_i { f'(c ytilde_i) + c ytilde_i f''(c ytilde_i) }`.
pub fn empirical_scale_deriv(c: f64, ytilde: ArrayView1<f64>, link: &LinkFunction) -> f64 {
    let n = ytilde.len() as f64;
    let sum: f64 = ytilde
        .iter()
        .map(|&v| {
            let u = c * v;
            link.d1(u) + u * link.d2(u)
        })
        .sum();
    sum / n
}

/// Settings for the scale-equation solver.
#[derive(Debug, Clone, PartialEq)]
pub struct RootOptions {
    pub c_init: f64,
    /// Search cap. Iterates never leave `0 < |c| <= c_max`.
    pub c_max: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Newton steps with `|derivative|` below this are abandoned.
    pub deriv_floor: f64,
    /// Solve on every `(n / m)`-th entry of `ytilde` when set to `Some(m)`
    /// with `m < n`.
    pub root_subsample: Option<usize>,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            c_init: 1.0,
            c_max: 1e6,
            tol: 1e-10,
            max_iter: 100,
            deriv_floor: 1e-12,
            root_subsample: None,
        }
    }
}

impl RootOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SlsError::InvalidInput(format!("root options: {what}")));
        if !(self.c_max > 0.0 && self.c_max.is_finite()) {
            return bad("c_max must be positive and finite");
        }
        if !(self.c_init > 0.0 && self.c_init <= self.c_max) {
            return bad("c_init must lie in (0, c_max]");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.deriv_floor > 0.0) {
            return bad("deriv_floor must be positive");
        }
        if self.root_subsample == Some(0) {
            return bad("root_subsample must be positive");
        }
        Ok(())
    }
}

/// What the scale solver did for one direction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RootDiagnostics {
    pub newton_iters: usize,
    pub bisection_iters: usize,
    pub converged: bool,
    pub used_bisection: bool,
    /// `|l(c_hat) - 1|`, NaN when no root was found.
    pub final_residual: f64,
    /// Sign-change bracket when the bisection fallback ran.
    pub bracket: Option<(f64, f64)>,
}

/// Reason a direction produced no estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectionFailure {
    NoRootInRange { c_max: f64 },
    NonFiniteScale { c: f64 },
}

impl fmt::Display for DirectionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectionFailure::NoRootInRange { c_max } => write!(f, "no_root_in_range(c_max={c_max})"),
            DirectionFailure::NonFiniteScale { c } => write!(f, "non_finite_scale(c={c})"),
        }
    }
}

impl From<DirectionFailure> for SlsError {
    fn from(f: DirectionFailure) -> Self {
        match f {
            DirectionFailure::NoRootInRange { c_max } => SlsError::NoRootInRange { c_max },
            DirectionFailure::NonFiniteScale { c } => SlsError::NonFiniteScale { c },
        }
    }
}

/// Solves `empirical_scale(c) = 1` for `0 < |c| <= c_max`.
///
/// The search runs on the half-line where `l(c)` starts out with the sign
/// of `f'(0)`: positive for increasing links, negative for decreasing ones
/// such as the logistic link, whose root is `1 / E[f'] < 0`. If that side
/// has no root the other side is tried.
///
/// On a side, Newton iterations start at `c_init` (mirrored for the
/// negative side). When Newton stalls (flat derivative, an iterate leaving
/// the interval, or the iteration budget running out) the solver brackets a
/// sign change by doubling or halving from `c_init` and bisects. With
/// several roots this returns the one Newton reaches from `c_init`, or else
/// the first sign change found from `c_init`.
pub fn newton_root(
    ytilde: ArrayView1<f64>,
    link: &LinkFunction,
    opts: &RootOptions,
) -> Result<(f64, RootDiagnostics)> {
    opts.validate()?;
    let (outcome, diag) = solve_scale(ytilde, link, opts);
    outcome.map(|c| (c, diag)).map_err(SlsError::from)
}

type Outcome = std::result::Result<f64, DirectionFailure>;

fn solve_scale(ytilde: ArrayView1<f64>, link: &LinkFunction, opts: &RootOptions) -> (Outcome, RootDiagnostics) {
    let strided;
    let ytilde = match opts.root_subsample {
        Some(m) if m < ytilde.len() => {
            let step = ytilde.len() / m;
            strided = ytilde.iter().step_by(step).take(m).copied().collect::<Array1<f64>>();
            strided.view()
        }
        _ => ytilde,
    };
    // A zero direction carries no scale information even when the equation
    // has a root (identity: l(c) = c), so it is reported as unsolvable.
    if ytilde.iter().all(|&v| v == 0.0) {
        let diag = RootDiagnostics { final_residual: f64::NAN, ..Default::default() };
        return (Err(DirectionFailure::NoRootInRange { c_max: opts.c_max }), diag);
    }
    let first = if link.d1(0.0) < 0.0 { -1.0 } else { 1.0 };
    let (outcome, diag) = solve_side(ytilde, link, opts, first);
    match outcome {
        Err(DirectionFailure::NoRootInRange { .. }) => {
            let (outcome, mut other) = solve_side(ytilde, link, opts, -first);
            other.newton_iters += diag.newton_iters;
            other.bisection_iters += diag.bisection_iters;
            other.used_bisection = true;
            (outcome, other)
        }
        _ => (outcome, diag),
    }
}

/// Solves `l(sign * s) = 1` over `s` in `(0, c_max]`.
fn solve_side(ytilde: ArrayView1<f64>, link: &LinkFunction, opts: &RootOptions, sign: f64) -> (Outcome, RootDiagnostics) {
    let mut diag = RootDiagnostics {
        final_residual: f64::NAN,
        ..Default::default()
    };
    let residual = |s: f64| -> Outcome {
        let r = empirical_scale(sign * s, ytilde, link) - 1.0;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(DirectionFailure::NonFiniteScale { c: sign * s })
        }
    };

    // Newton phase.
    let mut s = opts.c_init;
    loop {
        let r = match residual(s) {
            Ok(r) => r,
            Err(e) => return (Err(e), diag),
        };
        if r.abs() <= opts.tol {
            diag.converged = true;
            diag.final_residual = r.abs();
            return (Ok(sign * s), diag);
        }
        if diag.newton_iters == opts.max_iter {
            break;
        }
        let d = sign * empirical_scale_deriv(sign * s, ytilde, link);
        if !d.is_finite() || d.abs() < opts.deriv_floor {
            break;
        }
        let next = s - r / d;
        diag.newton_iters += 1;
        if !(next > 0.0 && next <= opts.c_max) {
            break;
        }
        s = next;
    }

    // Bisection fallback.
    diag.used_bisection = true;
    let (lo, hi) = match bracket(opts, &residual) {
        Ok(Some(b)) => b,
        Ok(None) => return (Err(DirectionFailure::NoRootInRange { c_max: opts.c_max }), diag),
        Err(e) => return (Err(e), diag),
    };
    diag.bracket = Some(if sign > 0.0 { (lo, hi) } else { (-hi, -lo) });
    // residual(lo) < 0 <= residual(hi)
    let (mut lo, mut hi) = (lo, hi);
    let mut best = (hi, f64::INFINITY);
    const MAX_BISECTIONS: usize = 2000;
    while diag.bisection_iters < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        diag.bisection_iters += 1;
        let r = match residual(mid) {
            Ok(r) => r,
            Err(e) => return (Err(e), diag),
        };
        if r.abs() < best.1 {
            best = (mid, r.abs());
        }
        if r.abs() <= opts.tol {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    diag.converged = best.1 <= opts.tol;
    diag.final_residual = best.1;
    (Ok(sign * best.0), diag)
}

/// Finds `lo < hi` with `residual(lo) < 0 <= residual(hi)` by geometric
/// expansion from `c_init`.
fn bracket<F>(opts: &RootOptions, residual: &F) -> std::result::Result<Option<(f64, f64)>, DirectionFailure>
where
    F: Fn(f64) -> std::result::Result<f64, DirectionFailure>,
{
    let start = opts.c_init;
    let r0 = residual(start)?;
    if r0 < 0.0 {
        let mut lo = start;
        while lo < opts.c_max {
            let hi = (2.0 * lo).min(opts.c_max);
            if residual(hi)? >= 0.0 {
                return Ok(Some((lo, hi)));
            }
            lo = hi;
        }
        Ok(None)
    } else {
        let mut hi = start;
        loop {
            let lo = 0.5 * hi;
            if lo < f64::MIN_POSITIVE {
                return Ok(None);
            }
            if residual(lo)? < 0.0 {
                return Ok(Some((lo, hi)));
            }
            hi = lo;
        }
    }
}

/// How the Gram inverse is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GramOption {
    Full,
    /// Random row subset of the given size; `seed` selects the subset.
    Subsampled { size: SubsampleSize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleSize {
    /// Fraction of `n` in `(0, 1]`, rounded to the nearest row count.
    Fraction(f64),
    Count(usize),
}

impl SubsampleSize {
    pub fn resolve(self, n: usize, p: usize) -> Result<usize> {
        let m = match self {
            SubsampleSize::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(SlsError::InvalidInput(format!("subsample fraction {f} not in (0, 1]")));
                }
                (f * n as f64).round() as usize
            }
            SubsampleSize::Count(m) => m,
        };
        if m < p || m > n {
            return Err(SlsError::InvalidInput(format!(
                "subsample size {m} must lie in [p, n] = [{p}, {n}]"
            )));
        }
        Ok(m)
    }
}

/// Sorted random subset of `0..n` of size `m`; the full range when `m == n`.
pub fn subsample_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = rng::stream(seed, Stream::Subsample);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Per-direction record in an [`EstimationResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionDiagnostics {
    pub root: RootDiagnostics,
    pub failure: Option<DirectionFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Rows are `beta_ols_j`.
    pub beta_ols: Array2<f64>,
    /// NaN for failed directions.
    pub c_hat: Array1<f64>,
    /// Rows are `c_hat[j] * beta_ols_j`; NaN rows for failed directions.
    pub beta_nlr: Array2<f64>,
    pub diagnostics: Vec<DirectionDiagnostics>,
    pub gram_source: GramSource,
}

impl EstimationResult {
    pub fn failed_directions(&self) -> Vec<usize> {
        self.diagnostics
            .iter()
            .enumerate()
            .filter(|(_, d)| d.failure.is_some())
            .map(|(j, _)| j)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.diagnostics.iter().all(|d| d.failure.is_none())
    }
}

/// Runs the full estimator. Directions run in parallel on the current rayon
/// pool. A direction whose scale equation has no root is marked in its
/// diagnostics; the others are unaffected.
pub fn sls_estimate(
    data: &Dataset,
    links: &[LinkFunction],
    option: &GramOption,
    opts: &RootOptions,
) -> Result<EstimationResult> {
    opts.validate()?;
    let (n, p, k) = (data.n(), data.p(), data.k());
    if links.len() != k {
        return Err(SlsError::DimensionMismatch(format!(
            "{} links for {k} coefficient columns",
            links.len()
        )));
    }
    let x = data.x().view();
    let ginv = match *option {
        GramOption::Full => gram_inverse_full(x)?,
        GramOption::Subsampled { size, seed } => {
            let m = size.resolve(n, p)?;
            gram_inverse_subsampled(x, &subsample_indices(n, m, seed))?
        }
    };

    let per_direction: Vec<Result<(Array1<f64>, f64, DirectionDiagnostics)>> = (0..k)
        .into_par_iter()
        .map(|j| {
            let beta_ols = ols_direction(&ginv, x, data.y().view(), data.z().column(j))?;
            let ytilde = x.dot(&beta_ols);
            let (outcome, root) = solve_scale(ytilde.view(), &links[j], opts);
            let (c, failure) = match outcome {
                Ok(c) => (c, None),
                Err(f) => (f64::NAN, Some(f)),
            };
            Ok((beta_ols, c, DirectionDiagnostics { root, failure }))
        })
        .collect();

    let mut beta_ols = Array2::<f64>::zeros((k, p));
    let mut beta_nlr = Array2::<f64>::zeros((k, p));
    let mut c_hat = Array1::<f64>::zeros(k);
    let mut diagnostics = Vec::with_capacity(k);
    for (j, item) in per_direction.into_iter().enumerate() {
        let (ols, c, diag) = item?;
        beta_nlr.row_mut(j).assign(&ols.mapv(|v| c * v));
        beta_ols.row_mut(j).assign(&ols);
        c_hat[j] = c;
        diagnostics.push(diag);
    }
    Ok(EstimationResult {
        beta_ols,
        c_hat,
        beta_nlr,
        diagnostics,
        gram_source: ginv.source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn full_inverse_of_diagonal_design() {
        let x = array![[2.0, 0.0], [0.0, 2.0]];
        let g = gram_inverse_full(x.view()).unwrap();
        assert_eq!(g.matrix, array![[0.25, 0.0], [0.0, 0.25]]);
        assert_eq!(g.source, GramSource::Full);
        let eye = gram_inverse_full(Array2::<f64>::eye(2).view()).unwrap();
        assert_eq!(eye.matrix, Array2::<f64>::eye(2));
    }

    #[test]
    fn duplicated_column_is_singular() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(gram_inverse_full(x.view()), Err(SlsError::SingularGram { .. })));
        assert!(matches!(
            gram_inverse_subsampled(x.view(), &[0, 2]),
            Err(SlsError::SingularGram { .. })
        ));
    }

    #[test]
    fn subsampled_constant_column() {
        let x = Array2::<f64>::ones((4, 1));
        let g = gram_inverse_subsampled(x.view(), &[0, 1]).unwrap();
        assert_abs_diff_eq!(g.matrix[[0, 0]], 0.25, epsilon = 1e-15);
        assert_eq!(g.source, GramSource::Subsampled { size: 2 });
        assert_abs_diff_eq!(g.matrix[[0, 0]], gram_inverse_full(x.view()).unwrap().matrix[[0, 0]], epsilon = 1e-15);
    }

    #[test]
    fn subsampled_rejects_bad_indices() {
        let x = Array2::<f64>::ones((4, 1));
        assert!(gram_inverse_subsampled(x.view(), &[0, 4]).is_err());
        assert!(gram_inverse_subsampled(x.view(), &[1, 1]).is_err());
        assert!(gram_inverse_subsampled(Array2::<f64>::eye(3).view(), &[0, 1]).is_err());
    }

    #[test]
    fn ols_on_identity_design() {
        let x = Array2::<f64>::eye(2);
        let g = gram_inverse_full(x.view()).unwrap();
        let b = ols_direction(&g, x.view(), array![3.0, 5.0].view(), array![1.0, 1.0].view()).unwrap();
        assert_eq!(b, array![3.0, 5.0]);
        let zero = ols_direction(&g, x.view(), array![3.0, 5.0].view(), array![0.0, 0.0].view()).unwrap();
        assert_eq!(zero, array![0.0, 0.0]);
        assert!(ols_direction(&g, x.view(), array![3.0].view(), array![0.0, 0.0].view()).is_err());
    }

    #[test]
    fn scale_function_examples() {
        let yt = array![1.0, -1.0, 2.0, 0.0];
        assert_eq!(empirical_scale(0.7, yt.view(), &LinkFunction::identity()), 0.7);
        assert_eq!(empirical_scale(1.0, yt.view(), &LinkFunction::monomial(3)), 4.5);
        assert_eq!(empirical_scale(0.0, yt.view(), &LinkFunction::sigmoid()), 0.0);
        assert_eq!(empirical_scale_deriv(0.3, yt.view(), &LinkFunction::identity()), 1.0);
        assert_eq!(empirical_scale_deriv(1.0, yt.view(), &LinkFunction::monomial(3)), 13.5);
        let zeros = Array1::<f64>::zeros(5);
        assert_eq!(empirical_scale_deriv(3.0, zeros.view(), &LinkFunction::sigmoid()), 0.25);
    }

    #[test]
    fn scale_derivative_matches_finite_difference() {
        let yt = array![0.3, -1.2, 2.0, 0.05, -0.7];
        let h = 1e-6;
        for link in [LinkFunction::sigmoid(), LinkFunction::logistic(), LinkFunction::monomial(5)] {
            for &c in &[0.2, 1.0, 3.5] {
                let fd = (empirical_scale(c + h, yt.view(), &link) - empirical_scale(c - h, yt.view(), &link))
                    / (2.0 * h);
                let d = empirical_scale_deriv(c, yt.view(), &link);
                assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{link} at {c}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn identity_root_in_one_newton_step() {
        let yt = array![0.5, -2.0, 7.0];
        for &start in &[0.01, 1.0, 50.0] {
            let opts = RootOptions {
                c_init: start,
                ..Default::default()
            };
            let (c, d) = newton_root(yt.view(), &LinkFunction::identity(), &opts).unwrap();
            assert_abs_diff_eq!(c, 1.0, epsilon = 1e-14);
            assert!(d.newton_iters <= 1);
            assert!(d.converged && !d.used_bisection);
        }
    }

    #[test]
    fn cubic_root_closed_form() {
        let yt = array![1.0, -1.0, 2.0, 0.0];
        let (c, d) = newton_root(yt.view(), &LinkFunction::monomial(3), &RootOptions::default()).unwrap();
        // (3 * 1.5)^(-1/3)
        assert_abs_diff_eq!(c, 0.605_706_864_277_379_9, epsilon = 1e-9);
        assert!(d.final_residual <= 1e-10);
    }

    #[test]
    fn logistic_on_zeros_has_no_root() {
        let yt = Array1::<f64>::zeros(10);
        let err = newton_root(yt.view(), &LinkFunction::logistic(), &RootOptions::default()).unwrap_err();
        assert!(matches!(err, SlsError::NoRootInRange { .. }));
    }

    #[test]
    fn logistic_root_is_negative() {
        // f' < 0 everywhere, so l(c) < 0 for every c > 0
        let yt = array![0.4, -1.1, 0.9, 0.2, -0.3];
        let link = LinkFunction::logistic();
        let (c, d) = newton_root(yt.view(), &link, &RootOptions::default()).unwrap();
        assert!(c < 0.0, "{c}");
        assert!((empirical_scale(c, yt.view(), &link) - 1.0).abs() <= 1e-10);
        assert!(d.converged && !d.used_bisection);
        // mirrored: l(-s) for the logistic link is s * mean(sigmoid(s * yt))
        let s = -c;
        let mirrored: f64 = yt.iter().map(|&v| LinkFunction::sigmoid().eval(s * v)).sum::<f64>() * s / 5.0;
        assert_abs_diff_eq!(mirrored, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn non_finite_input_is_reported() {
        let yt = array![1.0, f64::NAN];
        let err = newton_root(yt.view(), &LinkFunction::monomial(3), &RootOptions::default()).unwrap_err();
        assert!(matches!(err, SlsError::NonFiniteScale { .. }));
    }

    #[test]
    fn bisection_rescues_a_stalled_newton() {
        // l(c) ~ c / 4 here: Newton leaves (0, 2] on its first step and the
        // bracket search hits the cap without a sign change.
        let yt = array![1e-3, -1e-3];
        let opts = RootOptions {
            c_max: 2.0,
            ..Default::default()
        };
        let err = newton_root(yt.view(), &LinkFunction::sigmoid(), &opts).unwrap_err();
        assert!(matches!(err, SlsError::NoRootInRange { c_max } if c_max == 2.0));

        let opts = RootOptions {
            max_iter: 1,
            ..Default::default()
        };
        let yt = array![0.1, -0.05, 0.08, -0.12];
        let (c, d) = newton_root(yt.view(), &LinkFunction::sigmoid(), &opts).unwrap();
        assert!(d.used_bisection);
        let (lo, hi) = d.bracket.unwrap();
        assert!(lo < c && c <= hi);
        assert!((empirical_scale(c, yt.view(), &LinkFunction::sigmoid()) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn bisection_brackets_downward_when_start_is_past_root() {
        let yt = array![1.0, -1.0, 2.0, 0.0];
        let opts = RootOptions {
            c_init: 40.0,
            max_iter: 0,
            ..Default::default()
        };
        assert!(opts.validate().is_err());
        let opts = RootOptions {
            c_init: 40.0,
            max_iter: 1,
            deriv_floor: 1e300,
            ..Default::default()
        };
        let (c, d) = newton_root(yt.view(), &LinkFunction::monomial(3), &opts).unwrap();
        assert!(d.used_bisection && d.newton_iters == 0);
        assert_abs_diff_eq!(c, 4.5f64.powf(-1.0 / 3.0), epsilon = 1e-10);
    }

    #[test]
    fn root_subsample_uses_strided_rows() {
        let yt = Array1::from_iter((0..1000).map(|i| ((i as f64) * 0.37).sin()));
        let opts = RootOptions {
            root_subsample: Some(100),
            ..Default::default()
        };
        let (c_sub, _) = newton_root(yt.view(), &LinkFunction::monomial(3), &opts).unwrap();
        let sub: Array1<f64> = yt.iter().step_by(10).copied().collect();
        let expected = (3.0 * sub.mapv(|v| v * v).mean().unwrap()).powf(-1.0 / 3.0);
        assert_abs_diff_eq!(c_sub, expected, epsilon = 1e-9);
    }

    #[test]
    fn invalid_root_options() {
        let base = RootOptions::default();
        for opts in [
            RootOptions { c_init: 0.0, ..base.clone() },
            RootOptions { c_init: 2e6, ..base.clone() },
            RootOptions { tol: 0.0, ..base.clone() },
            RootOptions { deriv_floor: -1.0, ..base.clone() },
            RootOptions { root_subsample: Some(0), ..base.clone() },
        ] {
            assert!(opts.validate().is_err(), "{opts:?}");
        }
    }

    #[test]
    fn subsample_sizes() {
        assert_eq!(SubsampleSize::Fraction(0.2).resolve(1000, 10).unwrap(), 200);
        assert_eq!(SubsampleSize::Count(50).resolve(1000, 10).unwrap(), 50);
        assert!(SubsampleSize::Fraction(0.0).resolve(1000, 10).is_err());
        assert!(SubsampleSize::Fraction(1.5).resolve(1000, 10).is_err());
        assert!(SubsampleSize::Count(5).resolve(1000, 10).is_err());
        let idx = subsample_indices(100, 30, 4);
        assert_eq!(idx.len(), 30);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(idx, subsample_indices(100, 30, 4));
        assert_eq!(subsample_indices(5, 5, 4), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_coefficient_column_fails_only_that_direction() {
        // y = z_0 * <x, (1, 0)>, second coefficient column identically zero
        let x = array![[1.0, 0.5], [-0.5, 1.0], [0.3, -0.2], [2.0, 1.0], [-1.0, 0.4]];
        let z0 = array![1.0, -1.0, 0.5, 2.0, -0.3];
        let y = &z0 * &x.column(0);
        let mut z = Array2::<f64>::zeros((5, 2));
        z.column_mut(0).assign(&z0);
        let data = Dataset::new(x, z, y).unwrap();
        let links = [LinkFunction::identity(), LinkFunction::identity()];
        let res = sls_estimate(&data, &links, &GramOption::Full, &RootOptions::default()).unwrap();
        assert_eq!(res.failed_directions(), vec![1]);
        assert_eq!(res.beta_ols.row(1), array![0.0, 0.0]);
        assert!(res.c_hat[1].is_nan());
        assert!(matches!(res.diagnostics[1].failure, Some(DirectionFailure::NoRootInRange { .. })));
        assert_abs_diff_eq!(res.c_hat[0], 1.0, epsilon = 1e-12);
        assert!(!res.is_complete());
    }

    #[test]
    fn link_count_must_match() {
        let data = Dataset::new(Array2::eye(2), Array2::ones((2, 1)), array![1.0, 1.0]).unwrap();
        let links = [LinkFunction::identity(), LinkFunction::identity()];
        assert!(sls_estimate(&data, &links, &GramOption::Full, &RootOptions::default()).is_err());
    }

    proptest! {
        #[test]
        fn cubic_root_matches_closed_form(v in proptest::collection::vec(-3f64..3.0, 5..60)) {
            let yt = Array1::from(v);
            let m2 = yt.mapv(|t| t * t).mean().unwrap();
            prop_assume!(m2 > 1e-3);
            let (c, d) = newton_root(yt.view(), &LinkFunction::monomial(3), &RootOptions::default()).unwrap();
            let expected = (3.0 * m2).powf(-1.0 / 3.0);
            prop_assert!((c - expected).abs() <= 1e-9 * expected.max(1.0));
            prop_assert!(d.final_residual <= 1e-10);
        }

        #[test]
        fn root_is_permutation_invariant(
            v in proptest::collection::vec(-2f64..2.0, 8..40),
            rot in 0usize..40,
        ) {
            let yt = Array1::from(v.clone());
            let mut w = v;
            let len = w.len();
            w.rotate_left(rot % len);
            w.reverse();
            let yw = Array1::from(w);
            let link = LinkFunction::sigmoid();
            let a = newton_root(yt.view(), &link, &RootOptions::default());
            let b = newton_root(yw.view(), &link, &RootOptions::default());
            match (a, b) {
                (Ok((ca, _)), Ok((cb, _))) => prop_assert!((ca - cb).abs() <= 1e-12 * ca.max(1.0)),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }
}
