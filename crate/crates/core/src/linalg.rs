//! Small dense linear-algebra helpers on `ndarray` types.
//!
//! Eigendecompositions go through nalgebra's pure-Rust symmetric solver; the
//! matrices involved are desk-scale (sketch blocks up to 64, model Hessians up
//! to 2000) so no external LAPACK is needed.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

fn to_nalgebra(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    let (r, c) = a.dim();
    nalgebra::DMatrix::from_fn(r, c, |i, j| a[(i, j)])
}

/// Eigendecomposition of a symmetric matrix: eigenvalues ascending, matching
/// eigenvectors as columns.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "sym_eigen needs a square matrix");
    let se = nalgebra::SymmetricEigen::new(to_nalgebra(a));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let mut vals = Array1::zeros(d);
    let mut vecs = Array2::zeros((d, d));
    for (slot, &i) in order.iter().enumerate() {
        vals[slot] = se.eigenvalues[i];
        for r in 0..d {
            vecs[(r, slot)] = se.eigenvectors[(r, i)];
        }
    }
    (vals, vecs)
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eigen_bounds(a: &Array2<f64>) -> (f64, f64) {
    let (vals, _) = sym_eigen(a);
    (vals[0], vals[vals.len() - 1])
}

/// Symmetric positive-semidefinite square root via eigendecomposition.
/// Negative eigenvalues within `-1e-10·|λ|_max` are clamped to zero; anything
/// more negative is a contract violation.
pub fn sym_sqrt(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (vals, vecs) = sym_eigen(a);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sqrt_vals = Array1::zeros(vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v < -1e-10 * scale.max(1.0) {
            return Err(Error::Numerical(format!(
                "matrix square root of an indefinite matrix (eigenvalue {v:.3e})"
            )));
        }
        sqrt_vals[i] = v.max(0.0).sqrt();
    }
    let scaled = &vecs * &sqrt_vals; // scales columns
    Ok(scaled.dot(&vecs.t()))
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let d = a.nrows();
    assert_eq!(d, a.ncols());
    assert_eq!(d, b.len());
    let mut l = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::Numerical(format!(
                "Cholesky pivot {diag:.3e} at column {j}: matrix is not positive definite"
            )));
        }
        let diag = diag.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..d {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / diag;
        }
    }
    // forward then backward substitution
    let mut y = b.clone();
    for i in 0..d {
        for k in 0..i {
            let lik = l[(i, k)];
            y[i] -= lik * y[k];
        }
        y[i] /= l[(i, i)];
    }
    let mut x = y;
    for i in (0..d).rev() {
        for k in (i + 1)..d {
            let lki = l[(k, i)];
            x[i] -= lki * x[k];
        }
        x[i] /= l[(i, i)];
    }
    Ok(x)
}

/// Euclidean norm.
pub fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn eigen_reconstructs_symmetric_matrix() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 2.0]];
        let (vals, vecs) = sym_eigen(&a);
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let recon = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
        for (x, y) in a.iter().zip(recon.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let a = array![[2.0, 0.3], [0.3, 1.0]];
        let s = sym_sqrt(&a).unwrap();
        let back = s.dot(&s);
        for (x, y) in a.iter().zip(back.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(sym_sqrt(&a).is_err());
    }

    #[test]
    fn spd_solve_matches_direct_inverse() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        let x = solve_spd(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(norm(&r) < 1e-12);
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let b = array![1.0, 1.0];
        assert!(solve_spd(&a, &b).is_err());
    }
}
