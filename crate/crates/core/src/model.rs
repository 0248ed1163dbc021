//! OFBM models: exponent, parameterizations, conversions and classification.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_abs_diff, sym_min_eigenvalue, sym_sqrt_psd, CMat, RMat};
use crate::matfun::{decompose, primary_matfun_real, JordanBlockSpec, SpectralDecomposition, Stem};

const HALF_ROOT_TOL: f64 = 1e-12;
const CLASSIFY_TOL: f64 = 1e-10;
const STEM_ZERO_TOL: f64 = 1e-12;

/// The operator self-similarity exponent `H` and its shift `D = H - I/2`.
#[derive(Debug, Clone)]
pub struct ExponentSpec {
    h: RMat,
    d: RMat,
    h_dec: SpectralDecomposition,
    d_dec: SpectralDecomposition,
    half_root: bool,
    half_identity: bool,
}

impl ExponentSpec {
    pub fn from_matrix(h: RMat) -> Result<Self> {
        let dec = decompose(&h)?;
        Self::build(h, dec)
    }

    pub fn from_jordan(p: CMat, blocks: Vec<JordanBlockSpec>) -> Result<Self> {
        let dec = SpectralDecomposition::from_parts(p, blocks)?;
        let h = dec.matrix();
        Self::build(h, dec)
    }

    pub fn from_decomposition(dec: SpectralDecomposition) -> Result<Self> {
        let h = dec.matrix();
        Self::build(h, dec)
    }

    /// `H = h I`.
    pub fn scalar(n: usize, h: f64) -> Result<Self> {
        Self::from_decomposition(crate::matfun::diagonal(&vec![h; n]))
    }

    fn build(h: RMat, h_dec: SpectralDecomposition) -> Result<Self> {
        let n = h.nrows();
        for root in h_dec.roots() {
            if root.re <= 0.0 || root.re >= 1.0 {
                return Err(Error::RootOutOfRange { root });
            }
        }
        let half_root = h_dec.roots().iter().any(|r| (r.re - 0.5).abs() <= HALF_ROOT_TOL);
        let d = &h - RMat::identity(n, n) * 0.5;
        let half_identity = max_abs(&d) <= HALF_ROOT_TOL;
        let d_dec = h_dec.shifted(-0.5);
        Ok(Self { h, d, h_dec, d_dec, half_root, half_identity })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn h(&self) -> &RMat {
        &self.h
    }

    pub fn d(&self) -> &RMat {
        &self.d
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.h_dec
    }

    pub fn d_decomposition(&self) -> &SpectralDecomposition {
        &self.d_dec
    }

    /// Characteristic roots `h_k` with multiplicity.
    pub fn roots(&self) -> Vec<Complex64> {
        self.h_dec.roots()
    }

    /// Characteristic roots `d_k = h_k - 1/2`.
    pub fn d_roots(&self) -> Vec<Complex64> {
        self.d_dec.roots()
    }

    pub fn half_root(&self) -> bool {
        self.half_root
    }

    pub fn is_half_identity(&self) -> bool {
        self.half_identity
    }

    /// `c^H` for `c > 0`.
    pub fn power(&self, c: f64) -> RMat {
        self.h_dec.exp_log(c.ln())
    }

    /// `x^{-D}` for `x > 0`.
    pub fn power_neg_d(&self, x: f64) -> RMat {
        self.d_dec.power_neg(x)
    }

    /// Smallest and largest `Re(d_k)`.
    pub fn d_re_range(&self) -> (f64, f64) {
        self.d_roots()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.re), hi.max(r.re)))
    }
}

/// `A = A₁ + iA₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParam {
    pub a1: RMat,
    pub a2: RMat,
}

impl SpectralParam {
    pub fn new(a1: RMat, a2: RMat) -> Self {
        Self { a1, a2 }
    }

    pub fn real(a1: RMat) -> Self {
        let n = a1.nrows();
        Self { a1, a2: RMat::zeros(n, n) }
    }

    pub fn complex(&self) -> CMat {
        crate::linalg::complex_from_parts(&self.a1, &self.a2)
    }

    /// `Re(AA*) = A₁A₁ᵀ + A₂A₂ᵀ`.
    pub fn gram_re(&self) -> RMat {
        &self.a1 * self.a1.transpose() + &self.a2 * self.a2.transpose()
    }

    /// `Im(AA*) = A₂A₁ᵀ - A₁A₂ᵀ`.
    pub fn gram_im(&self) -> RMat {
        &self.a2 * self.a1.transpose() - &self.a1 * self.a2.transpose()
    }

    pub fn scale(&self) -> f64 {
        max_abs(&self.a1).max(max_abs(&self.a2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeParam {
    pub m_plus: RMat,
    pub m_minus: RMat,
}

/// Parameters of the `H = I/2` time-domain kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianCaseParam {
    pub m: RMat,
    pub n: RMat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameterization {
    Spectral(SpectralParam),
    Time(TimeParam),
    Brownian(BrownianCaseParam),
}

impl Parameterization {
    pub fn tag(&self) -> &'static str {
        match self {
            Parameterization::Spectral(_) => "spectral",
            Parameterization::Time(_) => "time",
            Parameterization::Brownian(_) => "bm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProperCertificate {
    pub certified: bool,
    /// Smallest eigenvalue of `Re(AA*)`.
    pub witness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelFlags {
    pub proper: ProperCertificate,
    pub time_reversible: bool,
    pub is_obm: bool,
}

/// A validated exponent together with one parameterization; the remaining
/// parameterizations are derived when they exist.
#[derive(Debug, Clone)]
pub struct OfbmModel {
    exponent: ExponentSpec,
    original: Parameterization,
    spectral: SpectralParam,
    time: Option<TimeParam>,
    brownian: Option<BrownianCaseParam>,
    flags: ModelFlags,
}

impl OfbmModel {
    pub fn new(exponent: ExponentSpec, param: Parameterization) -> Result<Self> {
        let n = exponent.dim();
        let check = |m: &RMat, name: &str| -> Result<()> {
            if m.shape() != (n, n) {
                return Err(Error::Dimension(format!("{name} is {:?}, expected {n}×{n}", m.shape())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        let (spectral, time, brownian) = match &param {
            Parameterization::Spectral(a) => {
                check(&a.a1, "A1")?;
                check(&a.a2, "A2")?;
                let time = if exponent.half_root() { None } else { Some(m_from_a(a, &exponent)?) };
                let bm = if exponent.is_half_identity() { Some(brownian_params(a, &exponent)?) } else { None };
                (a.clone(), time, bm)
            }
            Parameterization::Time(m) => {
                check(&m.m_plus, "M_plus")?;
                check(&m.m_minus, "M_minus")?;
                let a = a_from_m(m, &exponent)?;
                (a, Some(m.clone()), None)
            }
            Parameterization::Brownian(b) => {
                check(&b.m, "M")?;
                check(&b.n, "N")?;
                if !exponent.is_half_identity() {
                    return Err(Error::WrongExponent);
                }
                (spectral_from_brownian(b), None, Some(b.clone()))
            }
        };
        let proper = proper_certificate(&spectral, time.as_ref());
        let time_reversible = reversible(&spectral);
        let is_obm = exponent.is_half_identity() && time_reversible;
        Ok(Self {
            exponent,
            original: param,
            spectral,
            time,
            brownian,
            flags: ModelFlags { proper, time_reversible, is_obm },
        })
    }

    pub fn spectral(exponent: ExponentSpec, a: SpectralParam) -> Result<Self> {
        Self::new(exponent, Parameterization::Spectral(a))
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    pub fn exponent(&self) -> &ExponentSpec {
        &self.exponent
    }

    pub fn original(&self) -> &Parameterization {
        &self.original
    }

    pub fn spectral_param(&self) -> &SpectralParam {
        &self.spectral
    }

    pub fn time_param(&self) -> Option<&TimeParam> {
        self.time.as_ref()
    }

    pub fn brownian_param(&self) -> Option<&BrownianCaseParam> {
        self.brownian.as_ref()
    }

    pub fn flags(&self) -> ModelFlags {
        self.flags
    }

    /// `Re(AA*)`.
    pub fn gram_re(&self) -> RMat {
        self.spectral.gram_re()
    }

    /// `Im(AA*)`.
    pub fn gram_im(&self) -> RMat {
        self.spectral.gram_im()
    }
}

struct ConversionFactors {
    gamma: RMat,
    sin: RMat,
    cos: RMat,
}

fn conversion_factors(exponent: &ExponentSpec) -> Result<ConversionFactors> {
    if exponent.half_root() {
        return Err(Error::HalfRoot);
    }
    let dd = exponent.d_decomposition();
    for (stem, which) in [
        (Stem::SinHalfPi, "sin(πD/2)"),
        (Stem::CosHalfPi, "cos(πD/2)"),
        (Stem::GammaShift, "Γ(D+I)"),
    ] {
        for b in dd.blocks() {
            let v = stem.derivatives(b.eigenvalue, 0).map_err(|_| Error::SingularConversion { which })?;
            if v[0].norm() <= STEM_ZERO_TOL {
                return Err(Error::SingularConversion { which });
            }
        }
    }
    Ok(ConversionFactors {
        gamma: primary_matfun_real(&Stem::GammaShift, dd)?,
        sin: primary_matfun_real(&Stem::SinHalfPi, dd)?,
        cos: primary_matfun_real(&Stem::CosHalfPi, dd)?,
    })
}

/// Solves `A₁ = (2π)^{-1/2} Γ(D+I) sin(πD/2)(M₊ − M₋)`,
/// `A₂ = (2π)^{-1/2} Γ(D+I) cos(πD/2)(M₊ + M₋)` for `(M₊, M₋)`.
pub fn m_from_a(a: &SpectralParam, exponent: &ExponentSpec) -> Result<TimeParam> {
    let f = conversion_factors(exponent)?;
    let gs = (&f.gamma * &f.sin)
        .try_inverse()
        .ok_or(Error::SingularConversion { which: "Γ(D+I) sin(πD/2)" })?;
    let gc = (&f.gamma * &f.cos)
        .try_inverse()
        .ok_or(Error::SingularConversion { which: "Γ(D+I) cos(πD/2)" })?;
    let root = (2.0 * PI).sqrt();
    let diff = gs * &a.a1 * root;
    let sum = gc * &a.a2 * root;
    Ok(TimeParam { m_plus: (&sum + &diff) * 0.5, m_minus: (&sum - &diff) * 0.5 })
}

pub fn a_from_m(m: &TimeParam, exponent: &ExponentSpec) -> Result<SpectralParam> {
    let f = conversion_factors(exponent)?;
    let scale = 1.0 / (2.0 * PI).sqrt();
    let a1 = &f.gamma * &f.sin * (&m.m_plus - &m.m_minus) * scale;
    let a2 = &f.gamma * &f.cos * (&m.m_plus + &m.m_minus) * scale;
    Ok(SpectralParam { a1, a2 })
}

/// `M = √(π/2) A₁`, `N = −√(2/π) A₂`; only for `H = I/2`.
pub fn brownian_params(a: &SpectralParam, exponent: &ExponentSpec) -> Result<BrownianCaseParam> {
    if !exponent.is_half_identity() {
        return Err(Error::WrongExponent);
    }
    Ok(BrownianCaseParam { m: &a.a1 * (PI / 2.0).sqrt(), n: &a.a2 * -(2.0 / PI).sqrt() })
}

pub fn spectral_from_brownian(b: &BrownianCaseParam) -> SpectralParam {
    SpectralParam { a1: &b.m / (PI / 2.0).sqrt(), a2: &b.n * -(PI / 2.0).sqrt() }
}

fn rank_full(m: &RMat) -> bool {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, v| a.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    max > 0.0 && min > CLASSIFY_TOL * max.max(1.0)
}

fn proper_certificate(a: &SpectralParam, time: Option<&TimeParam>) -> ProperCertificate {
    let r = a.gram_re();
    let witness = sym_min_eigenvalue(&r);
    let mut certified = witness > CLASSIFY_TOL * max_abs(&r).max(1.0);
    if let Some(m) = time {
        certified |= rank_full(&(&m.m_plus + &m.m_minus)) && rank_full(&(&m.m_plus - &m.m_minus));
    }
    ProperCertificate { certified, witness }
}

fn reversible(a: &SpectralParam) -> bool {
    let scale = a.scale().max(1.0);
    let lhs = &a.a2 * a.a1.transpose();
    let rhs = &a.a1 * a.a2.transpose();
    max_abs_diff(&lhs, &rhs) <= CLASSIFY_TOL * scale * scale
}

/// Sufficient properness test; `certified = false` does not disprove it.
pub fn check_proper(model: &OfbmModel) -> ProperCertificate {
    model.flags.proper
}

pub fn check_time_reversible(model: &OfbmModel) -> bool {
    model.flags.time_reversible
}

pub fn check_obm(model: &OfbmModel) -> bool {
    model.flags.is_obm
}

/// The positive semidefinite `W` with `W² = A₁A₁ᵀ + A₂A₂ᵀ` of an operator
/// Brownian motion.
pub fn obm_root(model: &OfbmModel) -> Result<RMat> {
    if !model.flags.is_obm {
        return Err(Error::NotObm);
    }
    Ok(sym_sqrt_psd(&model.gram_re()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_c;
    use crate::matfun::rmat;
    use crate::special::gamma;
    use proptest::prelude::*;

    fn l() -> RMat {
        rmat(2, &[0.0, 1.0, -1.0, 0.0])
    }

    /// `AA*` rebuilt from `(M₊, M₋)` through the complex exponential kernel
    /// `(2π)^{-1/2} Γ(D+I)(e^{-iπD/2}M₊ + e^{iπD/2}M₋)`.
    fn gram_from_time(m: &TimeParam, e: &ExponentSpec) -> CMat {
        let dd = e.d_decomposition();
        let g = crate::matfun::primary_matfun(&Stem::GammaShift, dd).unwrap();
        let em = crate::matfun::primary_matfun(&Stem::ExpHalfPi { sign: -1.0 }, dd).unwrap();
        let ep = crate::matfun::primary_matfun(&Stem::ExpHalfPi { sign: 1.0 }, dd).unwrap();
        let mp = crate::linalg::to_complex(&m.m_plus);
        let mm = crate::linalg::to_complex(&m.m_minus);
        let k = g * (em * mp + ep * mm) * Complex64::new(1.0 / (2.0 * PI).sqrt(), 0.0);
        &k * k.adjoint()
    }

    #[test]
    fn scalar_conversion_constant() {
        let d: f64 = 0.2;
        let e = ExponentSpec::scalar(1, 0.5 + d).unwrap();
        let a = SpectralParam::real(rmat(1, &[1.3]));
        let m = m_from_a(&a, &e).unwrap();
        let expect = (PI / 2.0).sqrt() * 1.3 / (gamma(Complex64::new(d + 1.0, 0.0)).re * (PI * d / 2.0).sin());
        assert!((m.m_plus[(0, 0)] - expect).abs() < 1e-13);
        assert!((m.m_minus[(0, 0)] + expect).abs() < 1e-13);
    }

    #[test]
    fn zero_parameters_map_to_zero() {
        let e = ExponentSpec::from_matrix(rmat(2, &[0.3, 0.0, 0.1, 0.8])).unwrap();
        let z = RMat::zeros(2, 2);
        let m = m_from_a(&SpectralParam::new(z.clone(), z.clone()), &e).unwrap();
        assert_eq!(max_abs(&m.m_plus), 0.0);
        let a = a_from_m(&TimeParam { m_plus: z.clone(), m_minus: z }, &e).unwrap();
        assert_eq!(a.scale(), 0.0);
    }

    #[test]
    fn equal_time_matrices_give_pure_cosine_term() {
        let e = ExponentSpec::from_matrix(rmat(2, &[0.3, 0.0, 0.1, 0.8])).unwrap();
        let m = rmat(2, &[1.0, 0.2, -0.4, 0.7]);
        let a = a_from_m(&TimeParam { m_plus: m.clone(), m_minus: m.clone() }, &e).unwrap();
        assert_eq!(max_abs(&a.a1), 0.0);
        let g = primary_matfun_real(&Stem::GammaShift, e.d_decomposition()).unwrap();
        let c = primary_matfun_real(&Stem::CosHalfPi, e.d_decomposition()).unwrap();
        let expect = g * c * &m * (2.0 / PI).sqrt();
        assert!(max_abs_diff(&a.a2, &expect) < 1e-14);
    }

    #[test]
    fn half_root_refuses_time_parameters() {
        let e = ExponentSpec::from_matrix(rmat(2, &[0.5, 0.0, 0.0, 0.7])).unwrap();
        assert!(e.half_root());
        let a = SpectralParam::real(RMat::identity(2, 2));
        assert!(matches!(m_from_a(&a, &e), Err(Error::HalfRoot)));
        let model = OfbmModel::spectral(e.clone(), a).unwrap();
        assert!(model.time_param().is_none());
        let t = TimeParam { m_plus: RMat::identity(2, 2), m_minus: RMat::zeros(2, 2) };
        assert!(OfbmModel::new(e, Parameterization::Time(t)).is_err());
    }

    #[test]
    fn brownian_constants() {
        let e = ExponentSpec::scalar(2, 0.5).unwrap();
        let i = RMat::identity(2, 2);
        let z = RMat::zeros(2, 2);
        let b = brownian_params(&SpectralParam::new(i.clone(), z.clone()), &e).unwrap();
        assert!(max_abs_diff(&b.m, &(&i * (PI / 2.0).sqrt())) < 1e-15);
        assert_eq!(max_abs(&b.n), 0.0);
        let b = brownian_params(&SpectralParam::new(z.clone(), i.clone()), &e).unwrap();
        assert_eq!(max_abs(&b.m), 0.0);
        assert!(max_abs_diff(&b.n, &(&i * -(2.0 / PI).sqrt())) < 1e-15);
        let b = brownian_params(&SpectralParam::new(z.clone(), z.clone()), &e).unwrap();
        assert_eq!(max_abs(&b.m) + max_abs(&b.n), 0.0);
        let back = spectral_from_brownian(&brownian_params(&SpectralParam::new(i.clone(), l()), &e).unwrap());
        assert!(max_abs_diff(&back.a2, &l()) < 1e-15);
        let wrong = ExponentSpec::scalar(2, 0.6).unwrap();
        assert!(matches!(brownian_params(&SpectralParam::real(i), &wrong), Err(Error::WrongExponent)));
    }

    #[test]
    fn root_guard() {
        assert!(matches!(ExponentSpec::scalar(1, 1.0), Err(Error::RootOutOfRange { .. })));
        assert!(matches!(ExponentSpec::scalar(1, 0.0), Err(Error::RootOutOfRange { .. })));
        assert!(ExponentSpec::from_matrix(rmat(2, &[1.0, 0.0, 0.0, 0.5])).is_err());
        assert!(ExponentSpec::scalar(1, 0.999).is_ok());
    }

    #[test]
    fn rank_deficient_a_still_certified() {
        let s = 1.0 / 2f64.sqrt();
        let a = SpectralParam::new(RMat::identity(2, 2) * s, l() * s);
        let aa = {
            let c = a.complex();
            &c * c.adjoint()
        };
        let expect = CMat::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), Complex64::new(1.0, 0.0)],
        );
        assert!(max_abs_c(&(aa - expect)) < 1e-15);
        let model = OfbmModel::spectral(ExponentSpec::scalar(2, 0.7).unwrap(), a).unwrap();
        let cert = check_proper(&model);
        assert!(cert.certified);
        assert!((cert.witness - 1.0).abs() < 1e-14);
        assert!(!check_time_reversible(&model));
    }

    #[test]
    fn zero_a_not_certified() {
        let model = OfbmModel::spectral(ExponentSpec::scalar(2, 0.7).unwrap(), SpectralParam::real(RMat::zeros(2, 2))).unwrap();
        assert!(!check_proper(&model).certified);
    }

    #[test]
    fn rank_one_gram_not_certified() {
        let e = ExponentSpec::from_matrix(rmat(2, &[0.3, 0.0, 0.0, 0.7])).unwrap();
        let model = OfbmModel::spectral(e, SpectralParam::real(rmat(2, &[1.0, 0.0, 2.0, 0.0]))).unwrap();
        let cert = check_proper(&model);
        assert!(!cert.certified);
        assert!(cert.witness.abs() < 1e-14);
    }

    #[test]
    fn reversibility_cases() {
        let e = ExponentSpec::scalar(2, 0.5).unwrap();
        let m = OfbmModel::spectral(e.clone(), SpectralParam::real(rmat(2, &[1.0, 2.0, 3.0, 4.0]))).unwrap();
        assert!(check_time_reversible(&m));
        let m = OfbmModel::spectral(e.clone(), SpectralParam::new(RMat::identity(2, 2), l())).unwrap();
        assert!(!check_time_reversible(&m));
        let u = OfbmModel::spectral(ExponentSpec::scalar(1, 0.3).unwrap(), SpectralParam::new(rmat(1, &[1.0]), rmat(1, &[5.0])))
            .unwrap();
        assert!(check_time_reversible(&u));
    }

    #[test]
    fn obm_cases() {
        let e = ExponentSpec::scalar(2, 0.5).unwrap();
        let bm = BrownianCaseParam { m: RMat::identity(2, 2), n: l() };
        let m = OfbmModel::new(e.clone(), Parameterization::Brownian(bm.clone())).unwrap();
        assert!(!check_obm(&m));
        assert!(!check_time_reversible(&m));
        assert!(max_abs_diff(&(&bm.m * bm.n.transpose()), &(-&bm.n * bm.m.transpose())) < 1e-15);
        assert!(matches!(obm_root(&m), Err(Error::NotObm)));
        let bm0 = BrownianCaseParam { m: rmat(2, &[1.0, 0.3, 0.0, 2.0]), n: RMat::zeros(2, 2) };
        assert!(check_obm(&OfbmModel::new(e.clone(), Parameterization::Brownian(bm0)).unwrap()));
        let off = OfbmModel::spectral(ExponentSpec::scalar(2, 0.6).unwrap(), SpectralParam::real(RMat::identity(2, 2))).unwrap();
        assert!(!check_obm(&off));
    }

    #[test]
    fn obm_root_examples() {
        let e = ExponentSpec::scalar(2, 0.5).unwrap();
        for c in [1.0, 2.0] {
            let m = OfbmModel::spectral(e.clone(), SpectralParam::real(RMat::identity(2, 2) * c)).unwrap();
            assert!(max_abs_diff(&obm_root(&m).unwrap(), &(RMat::identity(2, 2) * c)) < 1e-14);
        }
    }

    #[test]
    fn jordan_exponent_is_accepted() {
        let e = ExponentSpec::from_jordan(CMat::identity(2, 2), vec![JordanBlockSpec::real(0.5, 2)]).unwrap();
        assert!(e.half_root());
        assert!(!e.is_half_identity());
        let c: f64 = 3.0;
        let expect = rmat(2, &[1.0, 0.0, c.ln(), 1.0]) * c.sqrt();
        assert!(max_abs_diff(&e.power(c), &expect) < 1e-14);
    }

    prop_compose! {
        fn exponent(n: usize)(
            noise in proptest::collection::vec(-0.25f64..0.25, n * n),
            roots in proptest::collection::vec(prop_oneof![0.05f64..0.49, 0.51f64..0.95], n),
        ) -> ExponentSpec {
            let q = RMat::identity(n, n) + RMat::from_row_slice(n, n, &noise);
            let h = &q * RMat::from_diagonal(&nalgebra::DVector::from_vec(roots)) * q.try_inverse().unwrap();
            ExponentSpec::from_matrix(h).unwrap()
        }
    }

    fn square(n: usize) -> impl Strategy<Value = RMat> {
        proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| RMat::from_row_slice(n, n, &v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn round_trip_spectral(e in exponent(3), a1 in square(3), a2 in square(3)) {
            let a = SpectralParam::new(a1, a2);
            let back = a_from_m(&m_from_a(&a, &e).unwrap(), &e).unwrap();
            let scale = a.scale().max(1.0);
            prop_assert!(max_abs_diff(&back.a1, &a.a1) <= 1e-12 * scale);
            prop_assert!(max_abs_diff(&back.a2, &a.a2) <= 1e-12 * scale);
        }

        #[test]
        fn round_trip_time(e in exponent(2), mp in square(2), mm in square(2)) {
            let m = TimeParam { m_plus: mp, m_minus: mm };
            let back = m_from_a(&a_from_m(&m, &e).unwrap(), &e).unwrap();
            let scale = max_abs(&m.m_plus).max(max_abs(&m.m_minus)).max(1.0);
            prop_assert!(max_abs_diff(&back.m_plus, &m.m_plus) <= 1e-12 * scale);
            prop_assert!(max_abs_diff(&back.m_minus, &m.m_minus) <= 1e-12 * scale);
        }

        #[test]
        fn gram_reconstruction(e in exponent(3), a1 in square(3), a2 in square(3)) {
            let a = SpectralParam::new(a1, a2);
            let m = m_from_a(&a, &e).unwrap();
            let got = gram_from_time(&m, &e);
            let c = a.complex();
            let want = &c * c.adjoint();
            prop_assert!(max_abs_c(&(got - want)) <= 1e-10 * a.scale().max(1.0).powi(2));
        }

        #[test]
        fn obm_implies_reversible(m in square(2), k in -1.0f64..1.0) {
            let e = ExponentSpec::scalar(2, 0.5).unwrap();
            let bm = BrownianCaseParam { m: m.clone(), n: &m * k };
            let model = OfbmModel::new(e, Parameterization::Brownian(bm)).unwrap();
            prop_assert!(check_obm(&model));
            prop_assert!(check_time_reversible(&model));
            let w = obm_root(&model).unwrap();
            prop_assert!(max_abs_diff(&(&w * &w), &model.gram_re()) <= 1e-12 * max_abs(&model.gram_re()).max(1.0));
        }

        #[test]
        fn univariate_always_reversible(h in 0.05f64..0.95, a1 in -3.0f64..3.0, a2 in -3.0f64..3.0) {
            let model = OfbmModel::spectral(
                ExponentSpec::scalar(1, h).unwrap(),
                SpectralParam::new(rmat(1, &[a1]), rmat(1, &[a2])),
            ).unwrap();
            prop_assert!(check_time_reversible(&model));
        }
    }
}
