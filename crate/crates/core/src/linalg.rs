//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|v| v.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|v| v.im)
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_diff(a: &RMat, b: &RMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `A + iB` from its real and imaginary parts.
pub fn complex_from_parts(re: &RMat, im: &RMat) -> CMat {
    re.zip_map(im, Complex64::new)
}

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &RMat) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn sym_min_eigenvalue(m: &RMat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Slightly negative eigenvalues (rounding) are clamped to zero.
pub fn sym_sqrt_psd(m: &RMat) -> RMat {
    let eig = symmetrize(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    q * RMat::from_diagonal(&roots) * q.transpose()
}

/// 2-norm condition number of a complex matrix.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, v| a.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `E X + X F = C` through the Kronecker form
/// `(I ⊗ E + Fᵀ ⊗ I) vec(X) = vec(C)`.
pub fn solve_sylvester(e: &RMat, f: &RMat, c: &RMat) -> Result<RMat> {
    let n = e.nrows();
    let m = f.nrows();
    if e.ncols() != n || f.ncols() != m || c.shape() != (n, m) {
        return Err(Error::Dimension("sylvester operands".into()));
    }
    let size = n * m;
    let mut k = RMat::zeros(size, size);
    // vec index of X[i, j] is j * n + i
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                k[(row, j * n + l)] += e[(i, l)];
            }
            for l in 0..m {
                k[(row, l * n + i)] += f[(l, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(size, c.iter().copied());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularConversion { which: "sylvester operator" })?;
    Ok(RMat::from_column_slice(n, m, sol.as_slice()))
}
