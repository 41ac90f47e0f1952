//! Small dense kernels: Cholesky with a relative pivot check, SPD inversion,
//! triangular solves and a symmetric eigendecomposition.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SlsError};

/// Relative pivot tolerance: a pivot at or below `PIVOT_RTOL * trace / p`
/// marks the matrix as singular.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `a = L L^T`.
///
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = a.nrows();
    if a.ncols() != p {
        return Err(SlsError::DimensionMismatch(format!("cholesky of a {:?} matrix", a.dim())));
    }
    let trace: f64 = (0..p).map(|i| a[[i, i]]).sum();
    let threshold = PIVOT_RTOL * trace / p as f64;
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut pivot = a[[j, j]];
        for m in 0..j {
            pivot -= l[[j, m]] * l[[j, m]];
        }
        if !(pivot > threshold) {
            return Err(SlsError::SingularGram {
                column: j,
                pivot,
                threshold,
            });
        }
        let diag = pivot.sqrt();
        l[[j, j]] = diag;
        for i in j + 1..p {
            let mut s = a[[i, j]];
            for m in 0..j {
                s -= l[[i, m]] * l[[j, m]];
            }
            l[[i, j]] = s / diag;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
/// The result is exactly symmetric.
pub fn spd_inverse(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    let p = l.nrows();
    // W = L^-1, lower triangular
    let mut w = Array2::<f64>::zeros((p, p));
    for col in 0..p {
        w[[col, col]] = 1.0 / l[[col, col]];
        for i in col + 1..p {
            let mut s = 0.0;
            for m in col..i {
                s -= l[[i, m]] * w[[m, col]];
            }
            w[[i, col]] = s / l[[i, i]];
        }
    }
    // a^-1 = W^T W
    let mut inv = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut s = 0.0;
            for m in i..p {
                s += w[[m, i]] * w[[m, j]];
            }
            inv[[i, j]] = s;
            inv[[j, i]] = s;
        }
    }
    Ok(inv)
}

/// Solves `L v = b` for lower-triangular `L`.
pub fn solve_lower(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let p = l.nrows();
    let mut v = Array1::<f64>::zeros(p);
    for i in 0..p {
        let mut s = b[i];
        for m in 0..i {
            s -= l[[i, m]] * v[m];
        }
        v[i] = s / l[[i, i]];
    }
    v
}

/// Solves `L^T v = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let p = l.nrows();
    let mut v = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let mut s = b[i];
        for m in i + 1..p {
            s -= l[[m, i]] * v[m];
        }
        v[i] = s / l[[i, i]];
    }
    v
}

/// Eigenvalues (ascending) and matching eigenvectors (columns) of a
/// symmetric matrix.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let p = a.nrows();
    let m = DMatrix::from_fn(p, p, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((p, p), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_reconstructs() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        let inv = spd_inverse(a.view()).unwrap();
        let eye = inv.dot(&a);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(eye[[i, j]], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        assert_eq!(inv, inv.t());
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        match cholesky(a.view()) {
            Err(SlsError::SingularGram { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected SingularGram, got {other:?}"),
        }
        assert!(cholesky(array![[-1.0]].view()).is_err());
    }

    #[test]
    fn triangular_solves() {
        let l = array![[2.0, 0.0], [1.0, 3.0]];
        let b = array![4.0, 11.0];
        let v = solve_lower(l.view(), b.view());
        assert_eq!(v, array![2.0, 3.0]);
        let w = solve_lower_transpose(l.view(), b.view());
        assert_abs_diff_eq!(l.t().dot(&w)[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l.t().dot(&w)[1], 11.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_of_two_by_two() {
        let (vals, vecs) = symmetric_eigen(array![[2.0, 1.0], [1.0, 2.0]].view());
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs[[0, 1]].abs(), 0.5f64.sqrt(), epsilon = 1e-14);
    }
}
