//! Primary matrix functions of real matrices with known Jordan structure.
//!
//! A real matrix `Λ = P J P⁻¹` is stored through its similarity `P` and the
//! list of Jordan blocks of `J`. Blocks are lower triangular (ones on the
//! subdiagonal), so for a stem `h` the block `h(J_λ)` has `(i, j)` entry
//! `h^(i-j)(λ) / (i-j)!`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, max_abs, max_abs_c, real_part, to_complex, CMat, RMat};
use crate::special::{gamma_shift_derivatives, is_gamma_pole};

const CLUSTER_TOL: f64 = 1e-7;
const NULLSPACE_TOL: f64 = 1e-8;
const MAX_CONDITION: f64 = 1e8;
const RECONSTRUCTION_TOL: f64 = 1e-12;
const REALNESS_TOL: f64 = 1e-10;
const GAMMA_DERIVATIVE_CAP: usize = 7;
const DERIVATIVE_CAP: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanBlockSpec {
    pub eigenvalue: Complex64,
    pub size: usize,
}

impl JordanBlockSpec {
    pub fn new(eigenvalue: Complex64, size: usize) -> Self {
        Self { eigenvalue, size }
    }

    pub fn real(eigenvalue: f64, size: usize) -> Self {
        Self::new(Complex64::new(eigenvalue, 0.0), size)
    }

    /// The block itself as a dense lower-triangular matrix.
    pub fn matrix(&self) -> CMat {
        let r = self.size;
        CMat::from_fn(r, r, |i, j| {
            if i == j {
                self.eigenvalue
            } else if i == j + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Scalar stem functions used by the representation formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stem {
    /// `b^z` stored through `ln b`.
    Power { log_base: f64 },
    /// `b^z - 1`, accurate when `z ln b` is small.
    PowerMinusOne { log_base: f64 },
    /// `Γ(z + 1)`.
    GammaShift,
    /// `sin(πz/2)`.
    SinHalfPi,
    /// `cos(πz/2)`.
    CosHalfPi,
    /// `exp(sign · iπz/2)` with `sign = ±1`.
    ExpHalfPi { sign: f64 },
}

impl Stem {
    pub fn power(base: f64) -> Self {
        assert!(base > 0.0, "power stem needs a positive base");
        Stem::Power { log_base: base.ln() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stem::Power { .. } => "power",
            Stem::PowerMinusOne { .. } => "power_minus_one",
            Stem::GammaShift => "gamma_shift",
            Stem::SinHalfPi => "sin_half_pi",
            Stem::CosHalfPi => "cos_half_pi",
            Stem::ExpHalfPi { .. } => "exp_half_pi",
        }
    }

    pub fn derivative_cap(&self) -> usize {
        match self {
            Stem::GammaShift => GAMMA_DERIVATIVE_CAP,
            _ => DERIVATIVE_CAP,
        }
    }

    /// Maps conjugate inputs to conjugate outputs.
    pub fn is_real(&self) -> bool {
        !matches!(self, Stem::ExpHalfPi { .. })
    }

    /// `h^(j)(z)` for `j = 0..=order`.
    pub fn derivatives(&self, z: Complex64, order: usize) -> Result<Vec<Complex64>> {
        let cap = self.derivative_cap();
        if order > cap {
            return Err(Error::DerivativeUnavailable { stem: self.name(), order, cap });
        }
        let out = match *self {
            Stem::Power { log_base } => {
                let value = (z * log_base).exp();
                let mut d = Vec::with_capacity(order + 1);
                let mut factor = 1.0;
                for _ in 0..=order {
                    d.push(value * factor);
                    factor *= log_base;
                }
                d
            }
            Stem::PowerMinusOne { log_base } => {
                let mut d = Stem::Power { log_base }.derivatives(z, order)?;
                d[0] = expm1_complex(z * log_base);
                d
            }
            Stem::GammaShift => {
                if is_gamma_pole(z + 1.0, 1e-12) {
                    return Err(Error::StemSingular { stem: self.name(), at: z });
                }
                gamma_shift_derivatives(z, order)
            }
            Stem::SinHalfPi | Stem::CosHalfPi => {
                let phase0 = if matches!(self, Stem::SinHalfPi) { 0.0 } else { PI / 2.0 };
                (0..=order)
                    .map(|j| {
                        let arg = z * (PI / 2.0) + phase0 + j as f64 * PI / 2.0;
                        arg.sin() * (PI / 2.0).powi(j as i32)
                    })
                    .collect()
            }
            Stem::ExpHalfPi { sign } => {
                let k = Complex64::new(0.0, sign * PI / 2.0);
                let value = (z * k).exp();
                let mut d = Vec::with_capacity(order + 1);
                let mut factor = Complex64::new(1.0, 0.0);
                for _ in 0..=order {
                    d.push(value * factor);
                    factor *= k;
                }
                d
            }
        };
        Ok(out)
    }
}

/// `e^w - 1` without cancellation for small `|w|`.
pub fn expm1_complex(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half = (b / 2.0).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half * half, a.exp() * b.sin())
}

/// `h(J_λ)` for one Jordan block.
pub fn jordan_block_apply(stem: &Stem, block: &JordanBlockSpec) -> Result<CMat> {
    let d = stem.derivatives(block.eigenvalue, block.size - 1)?;
    Ok(toeplitz_lower(&d, block.size))
}

/// Lower-triangular Toeplitz matrix with `(i, j)` entry `d[i-j] / (i-j)!`.
fn toeplitz_lower(d: &[Complex64], r: usize) -> CMat {
    let mut scaled = Vec::with_capacity(r);
    let mut fact = 1.0;
    for (k, v) in d.iter().take(r).enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        scaled.push(v / fact);
    }
    CMat::from_fn(r, r, |i, j| if i >= j { scaled[i - j] } else { Complex64::new(0.0, 0.0) })
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    p: CMat,
    p_inv: CMat,
    blocks: Vec<JordanBlockSpec>,
}

impl SpectralDecomposition {
    /// Builds a decomposition from an explicit similarity and block list.
    ///
    /// Checks that the sizes add up, `P` is invertible, the blocks pair up
    /// under conjugation and `P J P⁻¹` is real.
    pub fn from_parts(p: CMat, blocks: Vec<JordanBlockSpec>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::InvalidJordan("P must be square".into()));
        }
        if blocks.iter().any(|b| b.size == 0) {
            return Err(Error::InvalidJordan("block sizes must be positive".into()));
        }
        let total: usize = blocks.iter().map(|b| b.size).sum();
        if total != n {
            return Err(Error::InvalidJordan(format!("block sizes sum to {total}, expected {n}")));
        }
        let scale = blocks.iter().fold(1.0_f64, |a, b| a.max(b.eigenvalue.norm()));
        for b in &blocks {
            if b.eigenvalue.im.abs() > REALNESS_TOL * scale {
                let partners = blocks
                    .iter()
                    .filter(|c| c.size == b.size && (c.eigenvalue - b.eigenvalue.conj()).norm() <= REALNESS_TOL * scale)
                    .count();
                let same = blocks
                    .iter()
                    .filter(|c| c.size == b.size && (c.eigenvalue - b.eigenvalue).norm() <= REALNESS_TOL * scale)
                    .count();
                if partners != same {
                    return Err(Error::InvalidJordan(format!(
                        "eigenvalue {} has no conjugate partner of equal size",
                        b.eigenvalue
                    )));
                }
            }
        }
        let cond = condition_number(&p);
        if !cond.is_finite() || cond > MAX_CONDITION {
            return Err(Error::InvalidJordan(format!("P is singular or ill conditioned (cond {cond:.3e})")));
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidJordan("P is singular".into()))?;
        let s = Self { p, p_inv, blocks };
        let m = s.reconstruct();
        let im = m.map(|v| v.im.abs()).max();
        let re = max_abs(&real_part(&m)).max(1.0);
        if im > REALNESS_TOL * re {
            return Err(Error::InvalidJordan(format!("P J P⁻¹ is not real (imaginary residue {im:.3e})")));
        }
        Ok(s)
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn p_inv(&self) -> &CMat {
        &self.p_inv
    }

    pub fn blocks(&self) -> &[JordanBlockSpec] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.blocks.iter().all(|b| b.size == 1)
    }

    /// Eigenvalues repeated by block size.
    pub fn roots(&self) -> Vec<Complex64> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.eigenvalue, b.size))
            .collect()
    }

    pub fn jordan_matrix(&self) -> CMat {
        let n = self.dim();
        let mut j = CMat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            j.view_mut((off, off), (b.size, b.size)).copy_from(&b.matrix());
            off += b.size;
        }
        j
    }

    fn reconstruct(&self) -> CMat {
        &self.p * self.jordan_matrix() * &self.p_inv
    }

    /// The real matrix `P J P⁻¹`.
    pub fn matrix(&self) -> RMat {
        real_part(&self.reconstruct())
    }

    /// Decomposition of `Λ + δI` with the same similarity.
    pub fn shifted(&self, delta: f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| JordanBlockSpec::new(b.eigenvalue + delta, b.size))
            .collect();
        Self { p: self.p.clone(), p_inv: self.p_inv.clone(), blocks }
    }

    /// Same matrix with the blocks listed in the order `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.blocks.len());
        let mut offsets = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for b in &self.blocks {
            offsets.push(off);
            off += b.size;
        }
        let n = self.dim();
        let mut p = CMat::zeros(n, n);
        let mut p_inv = CMat::zeros(n, n);
        let mut blocks = Vec::with_capacity(perm.len());
        let mut dst = 0;
        for &k in perm {
            let b = self.blocks[k];
            let src = offsets[k];
            p.columns_mut(dst, b.size).copy_from(&self.p.columns(src, b.size));
            p_inv.rows_mut(dst, b.size).copy_from(&self.p_inv.rows(src, b.size));
            blocks.push(b);
            dst += b.size;
        }
        Self { p, p_inv, blocks }
    }

    /// `h(Λ) = P h(J) P⁻¹` for a stem given by its derivative table.
    pub fn apply_with<F>(&self, mut derivs: F) -> Result<CMat>
    where
        F: FnMut(Complex64, usize) -> Result<Vec<Complex64>>,
    {
        let n = self.dim();
        let mut hj = CMat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let d = derivs(b.eigenvalue, b.size - 1)?;
            hj.view_mut((off, off), (b.size, b.size)).copy_from(&toeplitz_lower(&d, b.size));
            off += b.size;
        }
        Ok(&self.p * hj * &self.p_inv)
    }

    /// `base^Λ` written as `exp(log_base · Λ)`, real part only.
    pub fn exp_log(&self, log_base: f64) -> RMat {
        if log_base == 0.0 {
            return RMat::identity(self.dim(), self.dim());
        }
        let stem = Stem::Power { log_base };
        let m = self
            .apply_with(|z, order| stem.derivatives(z, order))
            .expect("power stem derivatives are always available");
        real_part(&m)
    }

    /// `x^{-Λ}` for `x > 0`.
    pub fn power_neg(&self, x: f64) -> RMat {
        self.exp_log(-x.ln())
    }
}

pub fn primary_matfun(stem: &Stem, s: &SpectralDecomposition) -> Result<CMat> {
    s.apply_with(|z, order| stem.derivatives(z, order))
}

/// Real result of a conjugation-preserving stem; errors when the imaginary
/// residue exceeds the relative realness tolerance.
pub fn primary_matfun_real(stem: &Stem, s: &SpectralDecomposition) -> Result<RMat> {
    let m = primary_matfun(stem, s)?;
    realify(&m)
}

pub fn realify(m: &CMat) -> Result<RMat> {
    let residue = m.iter().fold(0.0_f64, |a, v| a.max(v.im.abs()));
    let scale = max_abs_c(m).max(1.0);
    if residue > REALNESS_TOL * scale {
        return Err(Error::ImaginaryResidue { residue, tol: REALNESS_TOL * scale });
    }
    Ok(real_part(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `x₊^{-D}` or `x₋^{-D}`, with `0^{-D} = 0`.
pub fn matrix_power_signed(s: &SpectralDecomposition, x: f64, side: Side) -> RMat {
    let part = match side {
        Side::Plus => x.max(0.0),
        Side::Minus => (-x).max(0.0),
    };
    if part == 0.0 {
        return RMat::zeros(s.dim(), s.dim());
    }
    s.power_neg(part)
}

/// Eigendecomposition of a real diagonalizable matrix.
///
/// Defective structure is never inferred: clusters whose geometric
/// multiplicity falls short of the algebraic one are rejected, as are
/// eigenvector bases with condition number above `1e8`.
pub fn decompose(h: &RMat) -> Result<SpectralDecomposition> {
    let n = h.nrows();
    if h.ncols() != n || n == 0 {
        return Err(Error::Dimension("decompose needs a non-empty square matrix".into()));
    }
    let scale = max_abs(h).max(1.0);
    let eig: Vec<Complex64> = h.complex_eigenvalues().iter().copied().collect();
    let clusters = cluster(&eig, CLUSTER_TOL * scale);

    let mut columns: Vec<(Complex64, nalgebra::DVector<Complex64>)> = Vec::with_capacity(n);
    for (lambda, m) in &clusters {
        let lambda = *lambda;
        let m = *m;
        if lambda.im < -CLUSTER_TOL * scale {
            continue;
        }
        if lambda.im.abs() <= CLUSTER_TOL * scale {
            let lr = lambda.re;
            let shifted = h - RMat::identity(n, n) * lr;
            let vecs = if m == n && max_abs(&shifted) <= NULLSPACE_TOL * scale {
                (0..n).map(|k| RMat::identity(n, n).column(k).into_owned()).collect()
            } else {
                real_null_vectors(&shifted, m, scale)?
            };
            for v in vecs {
                columns.push((Complex64::new(lr, 0.0), normalize_phase(to_complex_vec(&v))));
            }
        } else {
            let shifted = to_complex(h) - CMat::identity(n, n) * lambda;
            let vecs = complex_null_vectors(&shifted, m, scale)?;
            let partner = clusters
                .iter()
                .filter(|(mu, _)| (mu - lambda.conj()).norm() <= 2.0 * CLUSTER_TOL * scale)
                .map(|(_, k)| *k)
                .sum::<usize>();
            if partner != m {
                return Err(Error::NonDiagonalizable {
                    reason: format!("eigenvalue {lambda} lacks a conjugate partner of equal multiplicity"),
                });
            }
            for v in vecs {
                let v = normalize_phase(v);
                columns.push((lambda, v.clone()));
                columns.push((lambda.conj(), v.map(|c| c.conj())));
            }
        }
    }
    if columns.len() != n {
        return Err(Error::NonDiagonalizable { reason: "eigenvector count mismatch".into() });
    }
    columns.sort_by(|a, b| {
        b.0.re
            .partial_cmp(&a.0.re)
            .unwrap()
            .then(b.0.im.partial_cmp(&a.0.im).unwrap())
    });
    let mut p = CMat::zeros(n, n);
    for (k, (_, v)) in columns.iter().enumerate() {
        p.set_column(k, v);
    }
    let blocks: Vec<JordanBlockSpec> = columns.iter().map(|(l, _)| JordanBlockSpec::new(*l, 1)).collect();
    let cond = condition_number(&p);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::NonDiagonalizable { reason: format!("eigenvector condition number {cond:.3e}") });
    }
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NonDiagonalizable { reason: "singular eigenvector matrix".into() })?;
    let s = SpectralDecomposition { p, p_inv, blocks };
    let recon = s.reconstruct();
    let resid = recon
        .iter()
        .zip(h.iter())
        .fold(0.0_f64, |a, (x, y)| a.max((x - Complex64::new(*y, 0.0)).norm()));
    if resid > RECONSTRUCTION_TOL * scale {
        return Err(Error::NonDiagonalizable { reason: format!("reconstruction residual {resid:.3e}") });
    }
    Ok(s)
}

fn cluster(eig: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut sorted = eig.to_vec();
    sorted.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    'outer: for z in sorted {
        for g in groups.iter_mut() {
            if g.iter().any(|w| (w - z).norm() <= tol) {
                g.push(z);
                continue 'outer;
            }
        }
        groups.push(vec![z]);
    }
    groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().sum::<Complex64>() / g.len() as f64;
            (mean, g.len())
        })
        .collect()
}

fn to_complex_vec(v: &nalgebra::DVector<f64>) -> nalgebra::DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

fn normalize_phase(v: nalgebra::DVector<Complex64>) -> nalgebra::DVector<Complex64> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let lead = v
        .iter()
        .copied()
        .fold(Complex64::new(0.0, 0.0), |a, c| if c.norm() > a.norm() * (1.0 + 1e-12) { c } else { a });
    let phase = lead.conj() / lead.norm();
    v.map(|c| c * phase / norm)
}

fn real_null_vectors(m: &RMat, k: usize, scale: f64) -> Result<Vec<nalgebra::DVector<f64>>> {
    let n = m.nrows();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let worst = svd.singular_values[idx[k - 1]];
    if worst > NULLSPACE_TOL * scale {
        return Err(Error::NonDiagonalizable {
            reason: format!("eigenspace deficient (singular value {worst:.3e})"),
        });
    }
    Ok(idx[..k].iter().map(|&i| v_t.row(i).transpose()).collect())
}

fn complex_null_vectors(m: &CMat, k: usize, scale: f64) -> Result<Vec<nalgebra::DVector<Complex64>>> {
    let n = m.nrows();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let worst = svd.singular_values[idx[k - 1]];
    if worst > NULLSPACE_TOL * scale {
        return Err(Error::NonDiagonalizable {
            reason: format!("eigenspace deficient (singular value {worst:.3e})"),
        });
    }
    Ok(idx[..k].iter().map(|&i| v_t.row(i).adjoint()).collect())
}

/// Identity-based real decomposition of a diagonal matrix.
pub fn diagonal(values: &[f64]) -> SpectralDecomposition {
    let n = values.len();
    SpectralDecomposition {
        p: CMat::identity(n, n),
        p_inv: CMat::identity(n, n),
        blocks: values.iter().map(|&v| JordanBlockSpec::real(v, 1)).collect(),
    }
}

/// Dense `n × n` real matrix from row-major data.
pub fn rmat(n: usize, rows: &[f64]) -> RMat {
    DMatrix::from_row_slice(n, n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::special::{gamma, polygamma};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_input_gives_identity_similarity() {
        let h = rmat(2, &[0.7, 0.0, 0.0, 0.3]);
        let s = decompose(&h).unwrap();
        assert!(max_abs_c(&(s.p() - CMat::identity(2, 2))) < 1e-14);
        assert_eq!(s.blocks()[0], JordanBlockSpec::real(0.7, 1));
        assert_eq!(s.blocks()[1], JordanBlockSpec::real(0.3, 1));
    }

    #[test]
    fn defective_input_is_rejected() {
        let h = rmat(2, &[0.5, 0.0, 1.0, 0.5]);
        assert!(matches!(decompose(&h), Err(Error::NonDiagonalizable { .. })));
    }

    #[test]
    fn scalar_multiple_of_identity() {
        let h = RMat::identity(3, 3) * 0.5;
        let s = decompose(&h).unwrap();
        assert_eq!(s.blocks().len(), 3);
        assert!(max_abs_diff(&s.matrix(), &h) < 1e-15);
    }

    #[test]
    fn rotation_like_matrix_gives_conjugate_pair() {
        let h = rmat(2, &[0.65, 0.2, -0.2, 0.65]);
        let s = decompose(&h).unwrap();
        let r = s.roots();
        assert!((r[0] - r[1].conj()).norm() < 1e-15);
        assert!((r[0].im.abs() - 0.2).abs() < 1e-12);
        assert!(max_abs_diff(&s.matrix(), &h) < 1e-14);
    }

    #[test]
    fn explicit_jordan_parts_reconstruct() {
        let s = SpectralDecomposition::from_parts(CMat::identity(2, 2), vec![JordanBlockSpec::real(0.5, 2)]).unwrap();
        assert!(max_abs_diff(&s.matrix(), &rmat(2, &[0.5, 0.0, 1.0, 0.5])) < 1e-15);
    }

    #[test]
    fn unpaired_complex_block_rejected() {
        let blocks = vec![JordanBlockSpec::new(Complex64::new(0.5, 0.1), 1), JordanBlockSpec::real(0.5, 1)];
        assert!(SpectralDecomposition::from_parts(CMat::identity(2, 2), blocks).is_err());
    }

    #[test]
    fn bad_block_sizes_rejected() {
        let r = SpectralDecomposition::from_parts(CMat::identity(2, 2), vec![JordanBlockSpec::real(0.5, 3)]);
        assert!(matches!(r, Err(Error::InvalidJordan(_))));
    }

    #[test]
    fn power_base_one_is_identity() {
        for size in 1..=4 {
            let m = jordan_block_apply(&Stem::power(1.0), &JordanBlockSpec::real(0.37, size)).unwrap();
            assert!(max_abs_c(&(m - CMat::identity(size, size))) < 1e-15);
        }
    }

    #[test]
    fn power_block_of_size_two() {
        let z: f64 = 3.0;
        let lam = 0.4;
        let m = jordan_block_apply(&Stem::power(z), &JordanBlockSpec::real(lam, 2)).unwrap();
        let zl = z.powf(lam);
        assert!((m[(0, 0)] - c(zl)).norm() < 1e-15);
        assert!((m[(1, 1)] - c(zl)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(z.ln() * zl)).norm() < 1e-15);
        assert_eq!(m[(0, 1)], c(0.0));
    }

    #[test]
    fn gamma_block_of_size_two() {
        let m = jordan_block_apply(&Stem::GammaShift, &JordanBlockSpec::real(0.2, 2)).unwrap();
        let g = gamma(c(1.2));
        assert!((m[(0, 0)] - g).norm() < 1e-15);
        assert!((m[(1, 0)] - g * polygamma(0, c(1.2))).norm() < 1e-14);
    }

    #[test]
    fn gamma_at_pole_is_singular() {
        let r = jordan_block_apply(&Stem::GammaShift, &JordanBlockSpec::real(-2.0, 1));
        assert!(matches!(r, Err(Error::StemSingular { .. })));
    }

    #[test]
    fn derivative_cap_enforced() {
        let r = jordan_block_apply(&Stem::GammaShift, &JordanBlockSpec::real(0.2, 9));
        assert!(matches!(r, Err(Error::DerivativeUnavailable { .. })));
    }

    #[test]
    fn trig_derivatives_cycle() {
        let z = c(0.3);
        let s = Stem::SinHalfPi.derivatives(z, 4).unwrap();
        let k = PI / 2.0;
        let expect = [
            (k * 0.3).sin(),
            k * (k * 0.3).cos(),
            -k * k * (k * 0.3).sin(),
            -k.powi(3) * (k * 0.3).cos(),
            k.powi(4) * (k * 0.3).sin(),
        ];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - c(b)).norm() < 1e-13);
        }
        let co = Stem::CosHalfPi.derivatives(z, 1).unwrap();
        assert!((co[1] - c(-k * (k * 0.3).sin())).norm() < 1e-15);
    }

    #[test]
    fn power_minus_one_is_accurate_for_tiny_exponent() {
        let d = Stem::PowerMinusOne { log_base: 1e-12 }.derivatives(c(0.3), 0).unwrap();
        let x: f64 = 0.3e-12;
        assert!((d[0].re / (x + 0.5 * x * x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_root_of_scalar_identity() {
        let s = diagonal(&[0.5, 0.5]);
        let m = primary_matfun_real(&Stem::power(9.0), &s).unwrap();
        assert!(max_abs_diff(&m, &(RMat::identity(2, 2) * 3.0)) < 1e-14);
    }

    #[test]
    fn odd_stem_on_symmetric_spectrum() {
        let d = 0.3;
        let s = diagonal(&[d, -d]);
        let m = primary_matfun_real(&Stem::SinHalfPi, &s).unwrap();
        let v = (PI * d / 2.0).sin();
        assert!(max_abs_diff(&m, &rmat(2, &[v, 0.0, 0.0, -v])) < 1e-15);
    }

    #[test]
    fn signed_power_conventions() {
        let s = decompose(&rmat(2, &[0.2, 0.1, 0.0, -0.1])).unwrap();
        for side in [Side::Plus, Side::Minus] {
            assert_eq!(max_abs(&matrix_power_signed(&s, 0.0, side)), 0.0);
        }
        assert!(max_abs_diff(&matrix_power_signed(&s, 1.0, Side::Plus), &RMat::identity(2, 2)) < 1e-14);
        assert_eq!(max_abs(&matrix_power_signed(&s, 1.0, Side::Minus)), 0.0);
        assert!(max_abs_diff(&matrix_power_signed(&s, -2.0, Side::Minus), &s.power_neg(2.0)) == 0.0);
    }

    #[test]
    fn nilpotent_power_at_e() {
        let s = SpectralDecomposition::from_parts(CMat::identity(2, 2), vec![JordanBlockSpec::real(0.0, 2)]).unwrap();
        let m = matrix_power_signed(&s, std::f64::consts::E, Side::Plus);
        assert!(max_abs_diff(&m, &rmat(2, &[1.0, 0.0, -1.0, 1.0])) < 1e-15);
    }

    #[test]
    fn exp_half_pi_not_real_but_conjugate_pair_is() {
        let s = diagonal(&[0.2, -0.1]);
        let plus = primary_matfun(&Stem::ExpHalfPi { sign: 1.0 }, &s).unwrap();
        let minus = primary_matfun(&Stem::ExpHalfPi { sign: -1.0 }, &s).unwrap();
        assert!(max_abs_c(&(plus.map(|v| v.conj()) - minus)) < 1e-15);
    }

    fn series_power_neg(d: &RMat, x: f64) -> RMat {
        let n = d.nrows();
        let a = d * (-x.ln());
        let mut term = RMat::identity(n, n);
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * &a / k as f64;
            sum += &term;
            if max_abs(&term) < 1e-18 {
                break;
            }
        }
        sum
    }

    prop_compose! {
        /// Diagonalizable real matrix with roots in (-1/2, 1/2), possibly a complex pair.
        fn diagonalizable(n: usize)(
            noise in proptest::collection::vec(-0.3f64..0.3, n * n),
            re in proptest::collection::vec(-0.45f64..0.45, n),
            im in 0.05f64..0.3,
            pair in proptest::bool::ANY,
        ) -> RMat {
            let q = RMat::identity(n, n) + RMat::from_row_slice(n, n, &noise);
            let mut lam = RMat::from_diagonal(&nalgebra::DVector::from_vec(re.clone()));
            if pair && n >= 2 {
                lam[(0, 0)] = re[0];
                lam[(1, 1)] = re[0];
                lam[(0, 1)] = im;
                lam[(1, 0)] = -im;
            }
            &q * lam * q.try_inverse().unwrap()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_within_tolerance(d in diagonalizable(3)) {
            let s = decompose(&d).unwrap();
            prop_assert!(max_abs_diff(&s.matrix(), &d) <= 1e-12 * max_abs(&d).max(1.0));
        }

        #[test]
        fn group_law(d in diagonalizable(3), x in 0.01f64..50.0, y in 0.01f64..50.0) {
            if let Ok(s) = decompose(&d) {
                let lhs = s.power_neg(x) * s.power_neg(y);
                let rhs = s.power_neg(x * y);
                prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * max_abs(&rhs).max(1.0));
            }
        }

        #[test]
        fn series_equivalence(d in diagonalizable(3), x in 0.05f64..20.0) {
            if let Ok(s) = decompose(&d) {
                let m = s.power_neg(x);
                prop_assert!(max_abs_diff(&m, &series_power_neg(&d, x)) <= 1e-10 * max_abs(&m).max(1.0));
            }
        }

        #[test]
        fn realness_residue(d in diagonalizable(4), x in 0.05f64..20.0) {
            if let Ok(s) = decompose(&d) {
                for stem in [Stem::power(x), Stem::GammaShift, Stem::SinHalfPi, Stem::CosHalfPi] {
                    prop_assert!(primary_matfun_real(&stem, &s).is_ok());
                }
            }
        }

        #[test]
        fn block_permutation_invariance(d in diagonalizable(3), x in 0.05f64..20.0, rot in 0usize..3) {
            if let Ok(s) = decompose(&d) {
                let perm: Vec<usize> = (0..3).map(|k| (k + rot) % 3).collect();
                let a = primary_matfun(&Stem::GammaShift, &s).unwrap();
                let b = primary_matfun(&Stem::GammaShift, &s.permuted(&perm)).unwrap();
                prop_assert!(max_abs_c(&(&a - &b)) <= 1e-12 * max_abs_c(&a).max(1.0));
                let pa = s.power_neg(x);
                let pb = s.permuted(&perm).power_neg(x);
                prop_assert!(max_abs_diff(&pa, &pb) <= 1e-12 * max_abs(&pa).max(1.0));
            }
        }
    }
}
