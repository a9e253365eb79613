//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, c(s, 0.0))
}

pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn fro_norm(m: &CMat) -> f64 {
    fro_norm_sq(m).sqrt()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// `diag(v)` as a dense matrix.
pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// `R * diag(phi)`, i.e. scales column `n` of `r` by `phi[n]`.
pub fn scale_columns(r: &CMat, phi: &CVec) -> CMat {
    let mut out = r.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= phi[j];
    }
    out
}

/// Hermitian eigen-decomposition with ascending real eigenvalues.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Cholesky factor `L` of a Hermitian positive-definite matrix, `M = L·L^H`.
#[derive(Debug, Clone)]
pub struct HpdFactor {
    l: CMat,
}

impl HpdFactor {
    /// Factors the Hermitian part of `m`; fails on any non-positive pivot.
    pub fn new(m: &CMat) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::Dimension("Cholesky of a non-square matrix".into()));
        }
        let a = hermitian_part(m);
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)].re;
            for k in 0..j {
                pivot -= l[(j, k)].norm_sqr();
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::Numerical("matrix is not Hermitian positive definite".into()));
            }
            let d = pivot.sqrt();
            l[(j, j)] = c(d, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &CMat {
        &self.l
    }

    /// Solves `L·X = B`.
    pub fn solve_lower(&self, b: &CMat) -> CMat {
        let n = self.l.nrows();
        let mut x = b.clone();
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Solves `L^H·X = B`.
    pub fn solve_upper(&self, b: &CMat) -> CMat {
        let n = self.l.nrows();
        let mut x = b.clone();
        for col in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in i + 1..n {
                    s -= self.l[(k, i)].conj() * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Solves `M·X = B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn solve_vec(&self, b: &CVec) -> CVec {
        let m = CMat::from_column_slice(b.len(), 1, b.as_slice());
        let x = self.solve(&m);
        CVec::from_column_slice(x.as_slice())
    }

    pub fn inverse(&self) -> CMat {
        let n = self.l.nrows();
        hermitian_part(&self.solve(&identity(n)))
    }

    pub fn ln_det(&self) -> f64 {
        self.l.diagonal().iter().map(|d| 2.0 * d.re.ln()).sum()
    }
}

/// Inverse of a Hermitian positive-definite matrix, returned Hermitized.
pub fn inv_hpd(m: &CMat) -> Result<CMat> {
    Ok(HpdFactor::new(m)?.inverse())
}

/// `ln det` of a Hermitian positive-definite matrix.
pub fn ln_det_hpd(m: &CMat) -> Result<f64> {
    Ok(HpdFactor::new(m)?.ln_det())
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn rel_fro_err(a: &CMat, b: &CMat) -> f64 {
    let den = fro_norm(b);
    let num = fro_norm(&(a - b));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with threshold `rel_tol * s_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
