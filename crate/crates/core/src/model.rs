//! Model types: link functions with exact derivatives, the model
//! specification and the observed dataset.
//!
//! The response of observation `i` is
//!
//! ```text
//! y_i = sum_j z_ij * f_j(<beta_j, x_i>) + eps_i
//! ```
//!
//! where the links `f_j` are known and the coefficients `z_ij` are observed
//! but random.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlsError};

/// Shape of a link function.
///
/// Names used in configuration files: `identity`, `monomial:<d>`, `sigmoid`
/// and `logistic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LinkKind {
    /// `f(z) = z`
    Identity,
    /// `f(z) = z^d` for an odd degree `d >= 1`.
    Monomial(u32),
    /// `f(z) = 1 / (1 + e^-z)`
    Sigmoid,
    /// `f(z) = log(1 + e^-z)`
    Logistic,
}

impl LinkKind {
    /// Checks the odd-degree constraint on monomials. Even degrees make
    /// `E[f'(<x, beta>)]` vanish under symmetric designs.
    pub fn validate(self) -> Result<Self> {
        match self {
            LinkKind::Monomial(d) if d == 0 || d % 2 == 0 => Err(SlsError::InvalidInput(format!(
                "monomial degree must be odd and >= 1, got {d}"
            ))),
            other => Ok(other),
        }
    }

    /// Links that are unbounded in `f'`. They fall outside the bounded
    /// Lipschitz-derivative regime but are still supported.
    pub fn has_unbounded_derivative(self) -> bool {
        matches!(self, LinkKind::Monomial(d) if d >= 3)
    }

    /// Cycles `x`, `x^3`, `x^5` over `k` directions.
    pub fn mixed_polynomial(k: usize) -> Vec<LinkKind> {
        const CYCLE: [LinkKind; 3] = [
            LinkKind::Monomial(1),
            LinkKind::Monomial(3),
            LinkKind::Monomial(5),
        ];
        (0..k).map(|j| CYCLE[j % 3]).collect()
    }

    /// Cycles `x^3`, sigmoid, logistic over `k` directions.
    pub fn mixed(k: usize) -> Vec<LinkKind> {
        const CYCLE: [LinkKind; 3] = [LinkKind::Monomial(3), LinkKind::Sigmoid, LinkKind::Logistic];
        (0..k).map(|j| CYCLE[j % 3]).collect()
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkKind::Identity => f.write_str("identity"),
            LinkKind::Monomial(d) => write!(f, "monomial:{d}"),
            LinkKind::Sigmoid => f.write_str("sigmoid"),
            LinkKind::Logistic => f.write_str("logistic"),
        }
    }
}

impl FromStr for LinkKind {
    type Err = SlsError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let kind = match s {
            "identity" => LinkKind::Identity,
            "sigmoid" => LinkKind::Sigmoid,
            "logistic" => LinkKind::Logistic,
            _ => {
                let degree = s
                    .strip_prefix("monomial:")
                    .ok_or_else(|| SlsError::InvalidInput(format!("unknown link `{s}`")))?;
                let d: u32 = degree.parse().map_err(|_| {
                    SlsError::InvalidInput(format!("bad monomial degree `{degree}`"))
                })?;
                LinkKind::Monomial(d)
            }
        };
        kind.validate()
    }
}

impl TryFrom<String> for LinkKind {
    type Error = SlsError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LinkKind> for String {
    fn from(kind: LinkKind) -> Self {
        kind.to_string()
    }
}

/// A link function together with its first two derivatives.
///
/// `bound_d1` is `L` (a bound on `|f'|`) and `lipschitz_d1` is `G` (the
/// Lipschitz constant of `f'`). They are descriptive only; nothing checks
/// them at runtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFunction {
    kind: LinkKind,
    lipschitz_d1: Option<f64>,
    bound_d1: Option<f64>,
}

// max |f''| of the sigmoid, attained at z = ln(2 +- sqrt 3): 1 / (6 sqrt 3)
const SIGMOID_MAX_D2: f64 = 0.096_225_044_864_937_63;

impl LinkFunction {
    pub fn new(kind: LinkKind) -> Result<Self> {
        let kind = kind.validate()?;
        let (lipschitz_d1, bound_d1) = match kind {
            LinkKind::Identity | LinkKind::Monomial(1) => (Some(0.0), Some(1.0)),
            LinkKind::Monomial(_) => (None, None),
            LinkKind::Sigmoid => (Some(SIGMOID_MAX_D2), Some(0.25)),
            LinkKind::Logistic => (Some(0.25), Some(1.0)),
        };
        Ok(LinkFunction {
            kind,
            lipschitz_d1,
            bound_d1,
        })
    }

    pub fn identity() -> Self {
        Self::new(LinkKind::Identity).unwrap()
    }

    pub fn sigmoid() -> Self {
        Self::new(LinkKind::Sigmoid).unwrap()
    }

    pub fn logistic() -> Self {
        Self::new(LinkKind::Logistic).unwrap()
    }

    /// Panics on an even or zero degree; use [`LinkFunction::new`] for
    /// fallible construction.
    pub fn monomial(degree: u32) -> Self {
        Self::new(LinkKind::Monomial(degree)).expect("monomial degree must be odd")
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn lipschitz_d1(&self) -> Option<f64> {
        self.lipschitz_d1
    }

    pub fn bound_d1(&self) -> Option<f64> {
        self.bound_d1
    }

    /// `f(z)`
    pub fn eval(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => z,
            LinkKind::Monomial(d) => z.powi(d as i32),
            LinkKind::Sigmoid => {
                let e = (-z.abs()).exp();
                if z >= 0.0 {
                    1.0 / (1.0 + e)
                } else {
                    e / (1.0 + e)
                }
            }
            // softplus(-z)
            LinkKind::Logistic => {
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
        }
    }

    /// `f'(z)`
    pub fn d1(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Monomial(d) => d as f64 * z.powi(d as i32 - 1),
            LinkKind::Sigmoid => sigmoid_d1(z),
            LinkKind::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
        }
    }

    /// `f''(z)`
    pub fn d2(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 0.0,
            LinkKind::Monomial(1) => 0.0,
            LinkKind::Monomial(d) => {
                let d = d as f64;
                d * (d - 1.0) * z.powi(d as i32 - 2)
            }
            LinkKind::Sigmoid => sigmoid_d2(z),
            // the logistic link's f'' is the sigmoid's f'
            LinkKind::Logistic => sigmoid_d1(z),
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl From<LinkKind> for LinkFunction {
    /// Panics on an invalid monomial degree.
    fn from(kind: LinkKind) -> Self {
        LinkFunction::new(kind).expect("invalid link kind")
    }
}

pub(crate) fn sigmoid_d1(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub(crate) fn sigmoid_d2(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    let mag = e * (1.0 - e) / ((1.0 + e) * (1.0 + e) * (1.0 + e));
    if z >= 0.0 {
        -mag
    } else {
        mag
    }
}

/// Sigmoid third derivative `e^z (1 - 4e^z + e^2z) / (1 + e^z)^4`, written
/// in terms of `e^-|z|` (the function is even).
pub(crate) fn sigmoid_d3(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    let q = 1.0 + e;
    e * (1.0 - 4.0 * e + e * e) / (q * q * q * q)
}

/// Model dimensions, links and (for synthetic data) the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub p: usize,
    pub k: usize,
    pub links: Vec<LinkFunction>,
    /// Rows are the true directions `beta*_j`.
    pub beta_star: Option<Array2<f64>>,
    pub noise_std: f64,
}

impl ModelSpec {
    pub fn new(
        p: usize,
        links: Vec<LinkFunction>,
        beta_star: Option<Array2<f64>>,
        noise_std: f64,
    ) -> Result<Self> {
        let k = links.len();
        if k == 0 || p == 0 {
            return Err(SlsError::InvalidInput("p and k must be positive".into()));
        }
        if let Some(b) = &beta_star {
            if b.dim() != (k, p) {
                return Err(SlsError::DimensionMismatch(format!(
                    "beta_star is {:?}, expected ({k}, {p})",
                    b.dim()
                )));
            }
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(SlsError::InvalidInput(format!(
                "noise_std must be finite and >= 0, got {noise_std}"
            )));
        }
        Ok(ModelSpec {
            p,
            k,
            links,
            beta_star,
            noise_std,
        })
    }

    /// Links that violate the bounded-derivative assumption.
    pub fn unbounded_links(&self) -> Vec<usize> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind().has_unbounded_derivative())
            .map(|(j, _)| j)
            .collect()
    }
}

/// `sum_j z_j f_j(<beta*_j, x>) + eps`. Requires `spec.beta_star`.
pub fn response(spec: &ModelSpec, x: ArrayView1<f64>, z: ArrayView1<f64>, eps: f64) -> Result<f64> {
    let beta = spec
        .beta_star
        .as_ref()
        .ok_or_else(|| SlsError::InvalidInput("response needs beta_star".into()))?;
    if x.len() != spec.p || z.len() != spec.k {
        return Err(SlsError::DimensionMismatch(format!(
            "x has {} entries (p = {}), z has {} (k = {})",
            x.len(),
            spec.p,
            z.len(),
            spec.k
        )));
    }
    let mut y = 0.0;
    for (j, link) in spec.links.iter().enumerate() {
        y += z[j] * link.eval(beta.row(j).dot(&x));
    }
    Ok(y + eps)
}

/// Observations: design `x` (n x p), coefficients `z` (n x k), response `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    z: Array2<f64>,
    y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, z: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if z.nrows() != n || y.len() != n {
            return Err(SlsError::DimensionMismatch(format!(
                "x has {n} rows, z has {}, y has {}",
                z.nrows(),
                y.len()
            )));
        }
        if p == 0 || z.ncols() == 0 {
            return Err(SlsError::InvalidInput("p and k must be positive".into()));
        }
        if n < p {
            return Err(SlsError::InvalidInput(format!("need n >= p, got n = {n}, p = {p}")));
        }
        let finite = x.iter().chain(z.iter()).chain(y.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(SlsError::InvalidInput("dataset contains non-finite entries".into()));
        }
        Ok(Dataset { x, z, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        (self.x, self.z, self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_links() -> Vec<LinkFunction> {
        vec![
            LinkFunction::identity(),
            LinkFunction::monomial(1),
            LinkFunction::monomial(3),
            LinkFunction::monomial(5),
            LinkFunction::sigmoid(),
            LinkFunction::logistic(),
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(LinkFunction::sigmoid().eval(0.0), 0.5);
        assert_abs_diff_eq!(LinkFunction::logistic().eval(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(LinkFunction::monomial(3).eval(2.0), 8.0);
    }

    #[test]
    fn d1_examples() {
        assert_eq!(LinkFunction::sigmoid().d1(0.0), 0.25);
        assert_eq!(LinkFunction::logistic().d1(0.0), -0.5);
        // e^2.5 / (1 + e^2.5)^2 evaluated in 30-digit arithmetic
        assert_abs_diff_eq!(LinkFunction::sigmoid().d1(2.5), 0.070_103_716_545_108_16, epsilon = 1e-15);
    }

    #[test]
    fn d2_examples() {
        assert_eq!(LinkFunction::sigmoid().d2(0.0), 0.0);
        assert_eq!(LinkFunction::logistic().d2(0.0), 0.25);
        assert_abs_diff_eq!(LinkFunction::sigmoid().d2(2.5), -0.059_467_835_845_434_07, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_d3_matches_finite_difference() {
        let h = 1e-5;
        for &z in &[-7.0, -1.3, 0.0, 0.4, 2.5, 11.0] {
            let fd = (sigmoid_d2(z + h) - sigmoid_d2(z - h)) / (2.0 * h);
            assert_abs_diff_eq!(sigmoid_d3(z), fd, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(sigmoid_d3(1.3), -0.001_647_670_389_542_852, epsilon = 1e-15);
    }

    #[test]
    fn far_tails_are_finite() {
        for link in [LinkFunction::sigmoid(), LinkFunction::logistic()] {
            for &z in &[-1e4, -750.0, -40.0, 40.0, 750.0, 1e4] {
                assert!(link.eval(z).is_finite(), "{link} eval at {z}");
                assert!(link.d1(z).is_finite(), "{link} d1 at {z}");
                assert!(link.d2(z).is_finite(), "{link} d2 at {z}");
            }
        }
        // asymptotes: logistic(z) ~ -z, sigmoid(z) ~ e^z
        assert_abs_diff_eq!(LinkFunction::logistic().eval(-800.0), 800.0, epsilon = 1e-12);
        assert_eq!(LinkFunction::sigmoid().eval(-800.0), 0.0);
        assert_abs_diff_eq!(LinkFunction::sigmoid().eval(-35.0), (-35.0f64).exp(), epsilon = 1e-28);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-6;
        for link in all_links() {
            for _ in 0..1000 {
                let z: f64 = rng.random_range(-20.0..20.0);
                let fd1 = (link.eval(z + h) - link.eval(z - h)) / (2.0 * h);
                let d1 = link.d1(z);
                assert!(
                    (d1 - fd1).abs() <= 1e-5 * (1.0 + d1.abs()),
                    "{link}: d1({z}) = {d1}, fd = {fd1}"
                );
                let fd2 = (link.d1(z + h) - link.d1(z - h)) / (2.0 * h);
                let d2 = link.d2(z);
                assert!(
                    (d2 - fd2).abs() <= 1e-5 * (1.0 + d2.abs()),
                    "{link}: d2({z}) = {d2}, fd = {fd2}"
                );
            }
        }
    }

    #[test]
    fn metadata_flags() {
        assert!(LinkFunction::sigmoid().bound_d1().is_some());
        assert!(LinkFunction::logistic().lipschitz_d1().is_some());
        assert!(LinkFunction::monomial(3).bound_d1().is_none());
        assert!(LinkFunction::monomial(5).lipschitz_d1().is_none());
        assert_abs_diff_eq!(SIGMOID_MAX_D2, 1.0 / (6.0 * 3f64.sqrt()), epsilon = 1e-16);
    }

    #[test]
    fn link_names_round_trip() {
        for name in ["identity", "monomial:1", "monomial:3", "monomial:5", "sigmoid", "logistic"] {
            let kind: LinkKind = name.parse().unwrap();
            assert_eq!(kind.to_string(), name);
        }
        assert!("monomial:2".parse::<LinkKind>().is_err());
        assert!("monomial:0".parse::<LinkKind>().is_err());
        assert!("monomial:x".parse::<LinkKind>().is_err());
        assert!("tanh".parse::<LinkKind>().is_err());
        assert!(LinkFunction::new(LinkKind::Monomial(4)).is_err());
    }

    #[test]
    fn mixed_presets_split_in_thirds() {
        let m = LinkKind::mixed(6);
        assert_eq!(m.iter().filter(|k| **k == LinkKind::Sigmoid).count(), 2);
        let poly = LinkKind::mixed_polynomial(3);
        assert_eq!(poly, vec![LinkKind::Monomial(1), LinkKind::Monomial(3), LinkKind::Monomial(5)]);
    }

    fn spec_with(links: Vec<LinkFunction>, beta: Array2<f64>) -> ModelSpec {
        ModelSpec::new(beta.ncols(), links, Some(beta), 0.0).unwrap()
    }

    #[test]
    fn response_examples() {
        let spec = spec_with(vec![LinkFunction::monomial(3)], array![[1.0, 0.0]]);
        assert_eq!(response(&spec, array![2.0, 0.0].view(), array![1.0].view(), 0.0).unwrap(), 8.0);
        assert_eq!(response(&spec, array![2.0, 0.0].view(), array![0.0].view(), 0.0).unwrap(), 0.0);

        let spec = spec_with(
            vec![LinkFunction::identity(), LinkFunction::identity()],
            array![[1.0, 0.0], [0.0, 1.0]],
        );
        let y = response(&spec, array![3.0, 4.0].view(), array![1.0, -1.0].view(), 0.5).unwrap();
        assert_eq!(y, -0.5);
    }

    #[test]
    fn response_needs_ground_truth() {
        let spec = ModelSpec::new(2, vec![LinkFunction::identity()], None, 1.0).unwrap();
        assert!(response(&spec, array![1.0, 1.0].view(), array![1.0].view(), 0.0).is_err());
    }

    #[test]
    fn dataset_validation() {
        let ok = Dataset::new(Array2::eye(2), Array2::ones((2, 1)), array![1.0, 2.0]);
        assert!(ok.is_ok());
        assert!(Dataset::new(Array2::zeros((1, 2)), Array2::ones((1, 1)), array![1.0]).is_err());
        assert!(Dataset::new(Array2::eye(2), Array2::ones((3, 1)), array![1.0, 2.0]).is_err());
        let mut x = Array2::eye(2);
        x[[0, 1]] = f64::NAN;
        assert!(Dataset::new(x, Array2::ones((2, 1)), array![1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn sigmoid_ranges(z in -1e3f64..1e3) {
            let s = LinkFunction::sigmoid();
            let v = s.eval(z);
            prop_assert!((0.0..=1.0).contains(&v));
            if z.abs() < 30.0 {
                prop_assert!(v > 0.0 && v < 1.0);
                prop_assert!(s.d1(z) > 0.0);
            }
            prop_assert!(s.d1(z) <= 0.25);
            prop_assert!(s.d2(z).abs() < 0.1);
        }

        #[test]
        fn logistic_derivative_is_strictly_negative(z in -30f64..30.0) {
            let d = LinkFunction::logistic().d1(z);
            prop_assert!(d > -1.0 && d < 0.0);
        }

        #[test]
        fn response_is_linear_in_z(
            x in proptest::collection::vec(-2f64..2.0, 3),
            z1 in proptest::collection::vec(-3f64..3.0, 2),
            z2 in proptest::collection::vec(-3f64..3.0, 2),
            a in -2f64..2.0,
        ) {
            let spec = spec_with(
                vec![LinkFunction::sigmoid(), LinkFunction::monomial(3)],
                array![[1.0, -0.5, 0.25], [0.3, 0.2, -1.0]],
            );
            let x = Array1::from(x);
            let z1 = Array1::from(z1);
            let z2 = Array1::from(z2);
            let combo = &z1 * a + &z2;
            let lhs = response(&spec, x.view(), combo.view(), 0.0).unwrap();
            let rhs = a * response(&spec, x.view(), z1.view(), 0.0).unwrap()
                + response(&spec, x.view(), z2.view(), 0.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
