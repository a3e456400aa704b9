//! Thin wrappers over `faer` decompositions.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

/// Thin SVD `A = U diag(s) Vᵀ` with singular values in descending order.
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn svd(a: MatRef<'_, f64>) -> Result<Svd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::DimensionMismatch("SVD of an empty matrix".into()));
    }
    let d = a.thin_svd().map_err(|e| Error::Decomposition(format!("SVD: {e:?}")))?;
    Ok(Svd {
        u: d.U().to_owned(),
        s: d.S().column_vector().iter().copied().collect(),
        v: d.V().to_owned(),
    })
}

pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = a
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("singular values: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values at or above `rel_tol * s_max`.
pub fn numerical_rank(s: &[f64], rel_tol: f64) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v >= rel_tol * smax).count()
}

/// Default relative cutoff for pseudo-inverses: machine epsilon times the
/// larger dimension.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

/// Minimum-norm least-squares solution of `A x = b` for complex `A`.
///
/// Singular values below `rcond * s_max` are discarded.
pub fn pinv_solve(a: MatRef<'_, Complex64>, b: &[Complex64], rcond: f64) -> Result<Vec<Complex64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}-row system with {}-element right-hand side",
            a.nrows(),
            b.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let d = a.thin_svd().map_err(|e| Error::Decomposition(format!("SVD: {e:?}")))?;
    let u = d.U();
    let v = d.V();
    let s: Vec<f64> = d.S().column_vector().iter().map(|z| z.re).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut x = vec![Complex64::new(0.0, 0.0); a.ncols()];
    for (k, &sk) in s.iter().enumerate() {
        if sk <= rcond * smax || sk == 0.0 {
            continue;
        }
        let mut coef = Complex64::new(0.0, 0.0);
        for i in 0..a.nrows() {
            coef += u[(i, k)].conj() * b[i];
        }
        coef /= sk;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += v[(j, k)] * coef;
        }
    }
    Ok(x)
}

/// Eigen-decomposition of a real square matrix.
pub fn eigen_real(a: MatRef<'_, f64>) -> Result<(Vec<Complex64>, CMat)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let e = a.eigen().map_err(|e| Error::Decomposition(format!("eigen: {e:?}")))?;
    let vals = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues of a complex square matrix.
pub fn eigenvalues_complex(a: MatRef<'_, Complex64>) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    a.eigenvalues().map_err(|e| Error::Decomposition(format!("eigenvalues: {e:?}")))
}

pub fn to_complex(a: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| Complex64::new(a[(i, j)], 0.0))
}

/// Greedy multiset distance: the largest distance after pairing each value
/// in `a` with its nearest unused value in `b`.
pub fn max_pairing_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = f64::INFINITY;
        let mut best_j = None;
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best {
                    best = d;
                    best_j = Some(j);
                }
            }
        }
        match best_j {
            Some(j) => used[j] = true,
            None => return f64::INFINITY,
        }
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_counts_relative_threshold() {
        assert_eq!(numerical_rank(&[1.0, 1e-3, 1e-11], 1e-10), 2);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-10), 0);
        assert_eq!(numerical_rank(&[], 1e-10), 0);
    }

    #[test]
    fn svd_reconstructs() {
        let a = Mat::from_fn(5, 3, |i, j| ((i * 3 + j) as f64).sin());
        let d = svd(a.as_ref()).unwrap();
        let mut us = d.u.clone();
        for j in 0..d.s.len() {
            for i in 0..us.nrows() {
                us[(i, j)] *= d.s[j];
            }
        }
        let back = &us * d.v.transpose();
        for i in 0..5 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-13);
            }
        }
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pinv_solves_overdetermined_consistent_system() {
        let a = Mat::from_fn(4, 2, |i, j| Complex64::new((i + j) as f64, (i * j) as f64 + 1.0));
        let x = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        let b: Vec<Complex64> = (0..4).map(|i| a[(i, 0)] * x[0] + a[(i, 1)] * x[1]).collect();
        let got = pinv_solve(a.as_ref(), &b, 1e-14).unwrap();
        assert!((got[0] - x[0]).norm() < 1e-12);
        assert!((got[1] - x[1]).norm() < 1e-12);
    }

    #[test]
    fn eigen_of_rotation() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let a = Mat::from_fn(2, 2, |i, j| [[c, -s], [s, c]][i][j]);
        let (vals, _) = eigen_real(a.as_ref()).unwrap();
        let expect = [Complex64::from_polar(1.0, 0.3), Complex64::from_polar(1.0, -0.3)];
        assert!(max_pairing_distance(&vals, &expect) < 1e-14);
    }
}
