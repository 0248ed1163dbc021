//! Covariance function `Γ(s, t) = E B_H(s) B_H(t)ᵀ`.
//!
//! With `R = Re(AA*)`, `Q = Im(AA*)` and `F_S(x) = x^{-D} S x^{-Dᵀ}`,
//!
//! ```text
//! V(r) = 4 ∫₀^∞ (1 - cos rx) x⁻² F_R(x) dx
//! W(r) =   ∫₀^∞ (sin rx - rx·1{x<1}) x⁻² F_Q(x) dx
//! Γ(s, t) = ½(V(s) + V(t) - V(t-s)) - 2(W(s-t) - W(s) + W(t))
//! ```
//!
//! Each profile is split into `[0, ε]` (Taylor series against exact power
//! moments), `[ε, X]` (adaptive Gauss–Kronrod) and `[X, ∞)` (exact moment for
//! the mean part, integration by parts for the oscillatory part). Power
//! moments `∫ x^k F_S dx` are exact: they solve the Lyapunov equation
//! `E M + M Eᵀ = [x^{k+1} F_S(x)]` with `E = (k+1)/2·I - D`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, solve_sylvester, RMat};
use crate::matfun::SpectralDecomposition;
use crate::model::{ExponentSpec, OfbmModel};
use crate::quadrature::{adaptive_gk, exp_sinh, oscillatory_tail, tanh_sinh};

const TAYLOR_TERMS: usize = 12;
const IBP_TERMS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// Exact mean part plus an integration-by-parts series for the oscillation.
    AsymptoticCorrection,
    /// Sixteen times longer oscillatory range; the remaining oscillation is
    /// only bounded, not summed.
    ExtendedTruncation,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Upper end of the Taylor range; the effective cutoff is `min(ε, 0.5/r)`.
    pub inner_cutoff: f64,
    /// Smallest admissible outer cutoff.
    pub outer_cutoff: f64,
    /// Oscillation periods covered by the panel range.
    pub periods: usize,
    /// Initial panels per half period.
    pub panels: usize,
    pub tail: TailMode,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            inner_cutoff: 1.0,
            outer_cutoff: 2.0,
            periods: 32,
            panels: 1,
            tail: TailMode::AsymptoticCorrection,
            abs_tol: 1e-10,
            rel_tol: 1e-11,
            max_panels: 20_000,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol * 0.1, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_cutoff > 0.0 && self.inner_cutoff < 1.0 + 1e-15 && self.outer_cutoff > 1.0) {
            return Err(Error::InvalidInput("quadrature cutoffs must satisfy 0 < ε ≤ 1 < X".into()));
        }
        if !(self.abs_tol > 0.0) || self.periods == 0 || self.panels == 0 {
            return Err(Error::InvalidInput("quadrature tolerance and panel counts must be positive".into()));
        }
        Ok(())
    }
}

/// A matrix together with an entrywise absolute error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub value: RMat,
    pub error: RMat,
}

impl MatrixEstimate {
    pub fn zeros(n: usize) -> Self {
        Self { value: RMat::zeros(n, n), error: RMat::zeros(n, n) }
    }

    pub fn max_error(&self) -> f64 {
        max_abs(&self.error)
    }

    fn add_scaled(&mut self, other: &MatrixEstimate, c: f64) {
        self.value += &other.value * c;
        self.error += &other.error * c.abs();
    }
}

/// `F_S(x) = x^{-D} S x^{-Dᵀ}` with its exact power moments and the
/// derivative seeds used by the integration-by-parts tail.
#[derive(Debug, Clone)]
pub struct GramFactor {
    d: RMat,
    dec: SpectralDecomposition,
    s: RMat,
}

impl GramFactor {
    pub fn new(exponent: &ExponentSpec, s: RMat) -> Self {
        Self { d: exponent.d().clone(), dec: exponent.d_decomposition().clone(), s }
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_zero(&self) -> bool {
        max_abs(&self.s) == 0.0
    }

    pub fn at(&self, x: f64) -> RMat {
        self.at_with(x, &self.s)
    }

    pub fn at_with(&self, x: f64, s: &RMat) -> RMat {
        let p = self.dec.power_neg(x);
        &p * s * p.transpose()
    }

    /// `∫_a^b x^k F_S(x) dx`; `b = None` means `∞`, `a = 0` is allowed when
    /// the integrand is integrable there.
    pub fn moment(&self, k: i32, a: f64, b: Option<f64>) -> Result<RMat> {
        let n = self.dim();
        let e = RMat::identity(n, n) * ((k as f64 + 1.0) / 2.0) - &self.d;
        let kp1 = k + 1;
        let upper = match b {
            Some(b) => self.at(b) * b.powi(kp1),
            None => RMat::zeros(n, n),
        };
        let lower = if a == 0.0 { RMat::zeros(n, n) } else { self.at(a) * a.powi(kp1) };
        solve_sylvester(&e, &e.transpose(), &(upper - lower))
    }

    /// `S_k` with `d^k/dx^k [x⁻² F_S(x)] = x^{-2-k} x^{-D} S_k x^{-Dᵀ}`.
    pub fn derivative_seeds(&self, count: usize) -> Vec<RMat> {
        let mut out = Vec::with_capacity(count);
        let mut sk = self.s.clone();
        for k in 0..count {
            let next = &sk * -(2.0 + k as f64) - &self.d * &sk - &sk * self.d.transpose();
            out.push(sk);
            sk = next;
        }
        out
    }

    /// `∫_X^∞ e^{iωx} x⁻² F_S(x) dx` for `ω > 0` via integration by parts.
    fn oscillatory_tail(&self, omega: f64, x0: f64) -> (Vec<num_complex::Complex64>, Vec<f64>) {
        let seeds = self.derivative_seeds(IBP_TERMS);
        oscillatory_tail(
            omega,
            x0,
            |k| {
                let m = self.at_with(x0, &seeds[k]) * x0.powi(-2 - k as i32);
                m.as_slice().to_vec()
            },
            IBP_TERMS,
        )
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn from_flat(n: usize, v: &[f64]) -> RMat {
    RMat::from_column_slice(n, n, v)
}

/// Panel boundaries: geometric up to a half period, then half-period steps.
fn breakpoints(start: f64, end: f64, omega: f64, per_half_period: usize, extra: &[f64]) -> Vec<f64> {
    let half = PI / omega;
    let mut b = vec![start];
    let mut x = start;
    while x * 2.0 < half.min(end) {
        x *= 2.0;
        b.push(x);
    }
    let step = half / per_half_period as f64;
    let mut x = half.max(x * 2.0).min(end);
    if x > start {
        b.push(x);
    }
    while x + step < end {
        x += step;
        b.push(x);
    }
    b.push(end);
    for &e in extra {
        if e > start && e < end {
            b.push(e);
        }
    }
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup_by(|a, c| (*a - *c).abs() <= 1e-14 * c.abs());
    b
}

/// Warnings attached to covariance evaluations.
pub fn accuracy_warnings(exponent: &ExponentSpec) -> Vec<String> {
    let (lo, hi) = exponent.d_re_range();
    if lo <= -0.49 || hi >= 0.49 {
        vec![format!(
            "LowAccuracy: Re(d) range [{lo:.4}, {hi:.4}] leaves (-0.49, 0.49); error bounds are not certified"
        )]
    } else {
        Vec::new()
    }
}

/// Evaluator of `V`, `W` and `Γ` for one model.
#[derive(Debug, Clone)]
pub struct CovarianceEngine {
    n: usize,
    fr: GramFactor,
    fq: GramFactor,
    reversible: bool,
    h_dec: SpectralDecomposition,
    cfg: QuadratureConfig,
}

impl CovarianceEngine {
    pub fn new(model: &OfbmModel, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let e = model.exponent();
        Ok(Self {
            n: model.dim(),
            fr: GramFactor::new(e, model.gram_re()),
            fq: GramFactor::new(e, model.gram_im()),
            reversible: model.flags().time_reversible,
            h_dec: e.decomposition().clone(),
            cfg,
        })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    fn outer(&self, omega: f64) -> f64 {
        let mut x = (self.cfg.periods as f64 * 2.0 * PI / omega).max(self.cfg.outer_cutoff);
        if self.cfg.tail == TailMode::ExtendedTruncation {
            x *= 16.0;
        }
        x
    }

    fn check(&self, est: MatrixEstimate, converged: bool) -> Result<MatrixEstimate> {
        let target = (10.0 * self.cfg.abs_tol).max(1e-6 * max_abs(&est.value));
        if !converged && est.max_error() > target {
            return Err(Error::ToleranceNotMet { achieved: est.max_error(), target });
        }
        Ok(est)
    }

    /// `V(r) = E B_H(r) B_H(r)ᵀ`.
    pub fn variance(&self, r: f64) -> Result<MatrixEstimate> {
        let n = self.n;
        let r = r.abs();
        if r == 0.0 || self.fr.is_zero() {
            return Ok(MatrixEstimate::zeros(n));
        }
        let eps = self.cfg.inner_cutoff.min(0.5 / r);
        let mut out = MatrixEstimate::zeros(n);
        // 1 - cos(rx) = Σ_{k≥1} (-1)^{k+1} (rx)^{2k} / (2k)!
        let mut last = RMat::zeros(n, n);
        for k in 1..=TAYLOR_TERMS {
            let c = 4.0 * if k % 2 == 1 { 1.0 } else { -1.0 } * r.powi(2 * k as i32) / factorial(2 * k);
            let m = self.fr.moment(2 * k as i32 - 2, 0.0, Some(eps))? * c;
            out.value += &m;
            last = m.abs();
        }
        out.error += last;

        let x_max = self.outer(r);
        let breaks = breakpoints(eps, x_max, r, self.cfg.panels, &[]);
        let mid = adaptive_gk(
            |x| {
                let s = (0.5 * r * x).sin();
                (self.fr.at(x) * (8.0 * s * s / (x * x))).as_slice().to_vec()
            },
            &breaks,
            self.cfg.abs_tol,
            self.cfg.rel_tol,
            self.cfg.max_panels,
        );
        out.value += from_flat(n, &mid.value);
        out.error += from_flat(n, &mid.error);

        out.value += self.fr.moment(-2, x_max, None)? * 4.0;
        match self.cfg.tail {
            TailMode::AsymptoticCorrection => {
                let (tail, err) = self.fr.oscillatory_tail(r, x_max);
                let re: Vec<f64> = tail.iter().map(|z| z.re).collect();
                out.value -= from_flat(n, &re) * 4.0;
                out.error += from_flat(n, &err) * 4.0;
            }
            TailMode::ExtendedTruncation => {
                let bound = self.fr.at(x_max).abs() * (4.0 / (r * x_max * x_max));
                out.error += bound;
            }
        }
        self.check(out, mid.converged)
    }

    /// `W(r) = ∫₀^∞ (sin rx − rx·1{x<1}) x⁻² F_Q(x) dx`, odd in `r`.
    pub fn antisymmetric_profile(&self, r: f64) -> Result<MatrixEstimate> {
        let n = self.n;
        if r == 0.0 || self.fq.is_zero() {
            return Ok(MatrixEstimate::zeros(n));
        }
        let sign = r.signum();
        let r = r.abs();
        let eps = self.cfg.inner_cutoff.min(0.5 / r);
        let mut out = MatrixEstimate::zeros(n);
        // sin(rx) - rx = Σ_{k≥1} (-1)^k (rx)^{2k+1} / (2k+1)!
        let mut last = RMat::zeros(n, n);
        for k in 1..=TAYLOR_TERMS {
            let c = if k % 2 == 1 { -1.0 } else { 1.0 } * r.powi(2 * k as i32 + 1) / factorial(2 * k + 1);
            let m = self.fq.moment(2 * k as i32 - 1, 0.0, Some(eps))? * c;
            out.value += &m;
            last = m.abs();
        }
        out.error += last;

        let x_max = self.outer(r);
        let breaks = breakpoints(eps, x_max, r, self.cfg.panels, &[1.0]);
        let mid = adaptive_gk(
            |x| {
                let lin = if x < 1.0 { r * x } else { 0.0 };
                (self.fq.at(x) * (((r * x).sin() - lin) / (x * x))).as_slice().to_vec()
            },
            &breaks,
            self.cfg.abs_tol,
            self.cfg.rel_tol,
            self.cfg.max_panels,
        );
        out.value += from_flat(n, &mid.value);
        out.error += from_flat(n, &mid.error);

        match self.cfg.tail {
            TailMode::AsymptoticCorrection => {
                let (tail, err) = self.fq.oscillatory_tail(r, x_max);
                let im: Vec<f64> = tail.iter().map(|z| z.im).collect();
                out.value += from_flat(n, &im);
                out.error += from_flat(n, &err);
            }
            TailMode::ExtendedTruncation => {
                out.error += self.fq.at(x_max).abs() * (1.0 / (r * x_max * x_max));
            }
        }
        out.value *= sign;
        self.check(out, mid.converged)
    }

    /// `Γ(s, t)`. The antisymmetric part is skipped for reversible models.
    pub fn cov(&self, s: f64, t: f64) -> Result<MatrixEstimate> {
        self.cov_with(s, t, !self.reversible)
    }

    fn cov_with(&self, s: f64, t: f64, antisymmetric: bool) -> Result<MatrixEstimate> {
        let n = self.n;
        if s == 0.0 || t == 0.0 {
            return Ok(MatrixEstimate::zeros(n));
        }
        let mut out = MatrixEstimate::zeros(n);
        if s == t {
            return self.variance(s);
        }
        out.add_scaled(&self.variance(s)?, 0.5);
        out.add_scaled(&self.variance(t)?, 0.5);
        out.add_scaled(&self.variance(t - s)?, -0.5);
        if antisymmetric {
            out.add_scaled(&self.antisymmetric_profile(s - t)?, -2.0);
            out.add_scaled(&self.antisymmetric_profile(s)?, 2.0);
            out.add_scaled(&self.antisymmetric_profile(t)?, -2.0);
        }
        Ok(out)
    }

    /// `Γ(s, t)` from one direct integral of the full spectral integrand
    /// `2 ∫₀^∞ (Re k·F_R − Im k·F_Q) x⁻² dx`, `k = (e^{isx}−1)(e^{−itx}−1)`.
    /// Independent of the profile route; used as a cross-check.
    pub fn cov_full(&self, s: f64, t: f64) -> Result<MatrixEstimate> {
        let n = self.n;
        if s == 0.0 || t == 0.0 {
            return Ok(MatrixEstimate::zeros(n));
        }
        // Re k = 1 + Σ a_j cos(ω_j x), Im k = Σ b_j sin(ω_j x)
        let mut cos_terms: Vec<(f64, f64)> = Vec::new();
        let mut sin_terms: Vec<(f64, f64)> = Vec::new();
        let mut constant = 1.0;
        for (w, a, b) in [(s - t, 1.0, 1.0), (s, -1.0, -1.0), (t, -1.0, 1.0)] {
            if w == 0.0 {
                constant += a;
            } else {
                cos_terms.push((w.abs(), a));
                sin_terms.push((w.abs(), b * w.signum()));
            }
        }
        let re_k = |x: f64| -> f64 {
            let h = |w: f64| {
                let v = (0.5 * w * x).sin();
                2.0 * v * v
            };
            h(s) + h(t) - h(s - t)
        };
        let im_k = |x: f64| -> f64 {
            let scale = s.abs().max(t.abs()) * x;
            if scale < 0.1 {
                let mut acc = 0.0;
                let mut sign = -1.0;
                for j in (3..=21).step_by(2) {
                    let j = j as i32;
                    acc += sign * x.powi(j) / factorial(j as usize) * ((s - t).powi(j) - s.powi(j) + t.powi(j));
                    sign = -sign;
                }
                acc
            } else {
                ((s - t) * x).sin() - (s * x).sin() + (t * x).sin()
            }
        };
        let integrand = |x: f64| -> Vec<f64> {
            let mut m = self.fr.at(x) * (2.0 * re_k(x));
            if !self.fq.is_zero() {
                m -= self.fq.at(x) * (2.0 * im_k(x));
            }
            m /= x * x;
            m.as_slice().to_vec()
        };
        let tol = self.cfg.abs_tol;
        let head = tanh_sinh(|x, _, _| integrand(x), 0.0, 1.0, tol, self.cfg.rel_tol);
        let omega = cos_terms.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let x_max = (self.cfg.periods as f64 * 2.0 * PI / omega).max(self.cfg.outer_cutoff);
        let breaks = breakpoints(1.0, x_max, cos_terms.iter().map(|c| c.0).fold(0.0, f64::max), 1, &[]);
        let mid = adaptive_gk(integrand, &breaks, tol, self.cfg.rel_tol, self.cfg.max_panels);
        let mean = exp_sinh(
            |x, _| (self.fr.at(x) * (2.0 * constant / (x * x))).as_slice().to_vec(),
            x_max,
            tol * 0.1,
            self.cfg.rel_tol,
        );
        let mut out = MatrixEstimate::zeros(n);
        for q in [&head, &mid, &mean] {
            out.value += from_flat(n, &q.value);
            out.error += from_flat(n, &q.error);
        }
        for &(w, a) in &cos_terms {
            let (tail, err) = self.fr.oscillatory_tail(w, x_max);
            let re: Vec<f64> = tail.iter().map(|z| z.re).collect();
            out.value += from_flat(n, &re) * (2.0 * a);
            out.error += from_flat(n, &err) * (2.0 * a.abs());
        }
        if !self.fq.is_zero() {
            for &(w, b) in &sin_terms {
                let (tail, err) = self.fq.oscillatory_tail(w, x_max);
                let im: Vec<f64> = tail.iter().map(|z| z.im).collect();
                out.value -= from_flat(n, &im) * (2.0 * b);
                out.error += from_flat(n, &err) * (2.0 * b.abs());
            }
        }
        let converged = head.converged && mid.converged && mean.converged;
        self.check(out, converged)
    }

    /// `‖Γ(s,t) + Γ(t,s) − [V(t) + V(s) − V(t−s)]‖_max` with both covariances
    /// from the direct integral.
    pub fn stationary_identity_residual(&self, s: f64, t: f64) -> Result<f64> {
        let a = self.cov_full(s, t)?;
        let b = self.cov_full(t, s)?;
        let rhs = self.variance(t)?.value + self.variance(s)?.value - self.variance(t - s)?.value;
        Ok(max_abs(&(a.value + b.value - rhs)))
    }

    /// `c^H V c^{Hᵀ}`.
    pub fn scale_by(&self, c: f64, m: &RMat) -> RMat {
        let p = self.h_dec.exp_log(c.ln());
        &p * m * p.transpose()
    }
}

pub fn variance_profile(model: &OfbmModel, r: f64, cfg: &QuadratureConfig) -> Result<MatrixEstimate> {
    CovarianceEngine::new(model, *cfg)?.variance(r)
}

pub fn cov(model: &OfbmModel, s: f64, t: f64, cfg: &QuadratureConfig) -> Result<MatrixEstimate> {
    CovarianceEngine::new(model, *cfg)?.cov(s, t)
}

pub fn stationary_identity_residual(model: &OfbmModel, s: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    CovarianceEngine::new(model, *cfg)?.stationary_identity_residual(s, t)
}

/// `½(|t|^H Γ₁₁ |t|^{Hᵀ} + |s|^H Γ₁₁ |s|^{Hᵀ} − |t−s|^H Γ₁₁ |t−s|^{Hᵀ})`
/// with `0^H = 0`.
pub fn cov_time_reversible(exponent: &ExponentSpec, gamma11: &RMat, s: f64, t: f64) -> RMat {
    let term = |r: f64| {
        let r = r.abs();
        if r == 0.0 {
            RMat::zeros(gamma11.nrows(), gamma11.ncols())
        } else {
            let p = exponent.power(r);
            &p * gamma11 * p.transpose()
        }
    };
    (term(t) + term(s) - term(t - s)) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMethod {
    ClosedForm,
    QuadratureSymmetric,
    QuadratureFull,
}

impl CovMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            CovMethod::ClosedForm => "closed-form",
            CovMethod::QuadratureSymmetric => "quadrature-symmetric",
            CovMethod::QuadratureFull => "quadrature-full",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceReport {
    pub pairs: Vec<(f64, f64)>,
    pub values: Vec<MatrixEstimate>,
    pub method: CovMethod,
    pub warnings: Vec<String>,
}

/// `Γ(s, t)` over a list of pairs, evaluated in parallel.
pub fn covariance_report(model: &OfbmModel, pairs: &[(f64, f64)], cfg: &QuadratureConfig) -> Result<CovarianceReport> {
    let engine = CovarianceEngine::new(model, *cfg)?;
    let values = pairs
        .par_iter()
        .map(|&(s, t)| engine.cov(s, t))
        .collect::<Result<Vec<_>>>()?;
    let method = if model.flags().time_reversible {
        CovMethod::QuadratureSymmetric
    } else {
        CovMethod::QuadratureFull
    };
    Ok(CovarianceReport {
        pairs: pairs.to_vec(),
        values,
        method,
        warnings: accuracy_warnings(model.exponent()),
    })
}

/// Closed-form covariance report for a reversible model from `Γ(1,1)`.
pub fn covariance_report_closed_form(model: &OfbmModel, pairs: &[(f64, f64)], cfg: &QuadratureConfig) -> Result<CovarianceReport> {
    if !model.flags().time_reversible {
        return Err(Error::InvalidInput("closed-form covariance needs a time-reversible model".into()));
    }
    let v1 = variance_profile(model, 1.0, cfg)?;
    let values = pairs
        .iter()
        .map(|&(s, t)| {
            let value = cov_time_reversible(model.exponent(), &v1.value, s, t);
            let err = cov_time_reversible(model.exponent(), &v1.error, s, t).abs() * 3.0;
            MatrixEstimate { value, error: err }
        })
        .collect();
    Ok(CovarianceReport {
        pairs: pairs.to_vec(),
        values,
        method: CovMethod::ClosedForm,
        warnings: accuracy_warnings(model.exponent()),
    })
}

#[derive(Debug, Clone)]
pub struct ReversibilityProbe {
    /// Largest `‖Γ(s,t) − Γ(t,s)‖_max` over the grid.
    pub max_gap: f64,
    /// Largest combined error bound of the two evaluations.
    pub max_error: f64,
    /// Whether every gap stays below ten times its error bound.
    pub symmetric: bool,
}

/// Compares `Γ(s,t)` with `Γ(t,s)` on all pairs of `times` using the direct
/// integral, so the antisymmetric part is always computed.
pub fn reversibility_probe(model: &OfbmModel, times: &[f64], cfg: &QuadratureConfig) -> Result<ReversibilityProbe> {
    let engine = CovarianceEngine::new(model, *cfg)?;
    let mut pairs = Vec::new();
    for (i, &s) in times.iter().enumerate() {
        for &t in &times[i + 1..] {
            pairs.push((s, t));
        }
    }
    let rows = pairs
        .par_iter()
        .map(|&(s, t)| -> Result<(f64, f64, f64)> {
            let a = engine.cov_full(s, t)?;
            let b = engine.cov_full(t, s)?;
            let gap = max_abs(&(&a.value - &b.value));
            let err = max_abs(&(&a.error + &b.error));
            let scale = max_abs(&a.value).max(max_abs(&b.value));
            Ok((gap, err, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut probe = ReversibilityProbe { max_gap: 0.0, max_error: 0.0, symmetric: true };
    for (gap, err, scale) in rows {
        probe.max_gap = probe.max_gap.max(gap);
        probe.max_error = probe.max_error.max(err);
        if gap > 10.0 * err + 1e-13 * scale.max(1.0) {
            probe.symmetric = false;
        }
    }
    Ok(probe)
}

/// `det Γ(1,1)`: a numerical properness diagnostic for models whose
/// sufficient certificate fails.
pub fn properness_determinant(model: &OfbmModel, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(variance_profile(model, 1.0, cfg)?.value.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, sym_min_eigenvalue};
    use crate::matfun::rmat;
    use crate::model::{BrownianCaseParam, Parameterization, SpectralParam};
    use crate::special::{gamma, EULER_GAMMA};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c2sq(h: f64) -> f64 {
        PI / (h * gamma(Complex64::new(2.0 * h, 0.0)).re * (h * PI).sin())
    }

    /// Mellin closed form of `V(r)` for diagonalizable `D`:
    /// `4∫(1−cos rx) x^{-2-δ} dx = 2π r^{1+δ} / (Γ(2+δ) cos(πδ/2))`.
    fn mellin_variance(model: &OfbmModel, r: f64) -> RMat {
        let dd = model.exponent().d_decomposition();
        let p = dd.p();
        let pi = dd.p_inv();
        let rr = crate::linalg::to_complex(&model.gram_re());
        let mid = pi * rr * pi.transpose();
        let lam: Vec<Complex64> = dd.blocks().iter().map(|b| b.eigenvalue).collect();
        let n = lam.len();
        let m = crate::linalg::CMat::from_fn(n, n, |i, j| {
            let delta = lam[i] + lam[j];
            let f = Complex64::new(2.0 * PI, 0.0) * (delta + 1.0).scale(r.ln()).exp()
                / (gamma(delta + 2.0) * (delta * (PI / 2.0)).cos());
            f * mid[(i, j)]
        });
        crate::linalg::real_part(&(p * m * p.transpose()))
    }

    fn fbm(h: f64) -> OfbmModel {
        OfbmModel::spectral(ExponentSpec::scalar(1, h).unwrap(), SpectralParam::real(rmat(1, &[1.0]))).unwrap()
    }

    fn brownian_irreversible() -> OfbmModel {
        let l = rmat(2, &[0.0, 1.0, -1.0, 0.0]);
        OfbmModel::new(
            ExponentSpec::scalar(2, 0.5).unwrap(),
            Parameterization::Brownian(BrownianCaseParam { m: RMat::identity(2, 2), n: l }),
        )
        .unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn univariate_variance_constant() {
        for h in [0.3, 0.5, 0.7] {
            let v = variance_profile(&fbm(h), 1.0, &cfg()).unwrap();
            assert!((v.value[(0, 0)] / c2sq(h) - 1.0).abs() < 1e-8, "h = {h}: {}", v.value[(0, 0)]);
        }
        assert!((c2sq(0.5) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn brownian_irreversible_variance() {
        let m = brownian_irreversible();
        for t in [0.5, 1.0, 3.0] {
            let v = variance_profile(&m, t, &cfg()).unwrap();
            let expect = RMat::identity(2, 2) * ((4.0 + PI * PI) * t);
            assert!(max_abs_diff(&v.value, &expect) < 1e-8);
        }
    }

    #[test]
    fn brownian_irreversible_antisymmetric_profile() {
        let m = brownian_irreversible();
        let e = CovarianceEngine::new(&m, cfg()).unwrap();
        let q = m.gram_im();
        for r in [0.3, 1.0, 2.0, -1.5] {
            let w = e.antisymmetric_profile(r).unwrap();
            let expect = &q * (r * (1.0 - EULER_GAMMA - r.abs().ln()));
            assert!(max_abs_diff(&w.value, &expect) < 1e-8, "r = {r}");
        }
        let l = rmat(2, &[0.0, 1.0, -1.0, 0.0]);
        let c = e.cov(1.0, 2.0).unwrap();
        let anti = (&c.value - c.value.transpose()) * 0.5;
        assert!(max_abs_diff(&anti, &(&l * (-8.0 * 2f64.ln()))) < 1e-8);
    }

    #[test]
    fn zero_time_and_equal_times() {
        let m = fbm(0.7);
        let e = CovarianceEngine::new(&m, cfg()).unwrap();
        assert_eq!(max_abs(&e.cov(0.0, 1.0).unwrap().value), 0.0);
        let a = e.cov(1.3, 1.3).unwrap().value;
        let b = e.variance(1.3).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_reversible_cov() {
        let e = ExponentSpec::scalar(1, 0.7).unwrap();
        let g = rmat(1, &[c2sq(0.7)]);
        assert!(max_abs_diff(&cov_time_reversible(&e, &g, 1.0, 1.0), &g) < 1e-14);
        assert_eq!(max_abs(&cov_time_reversible(&e, &g, 0.0, 2.0)), 0.0);
        let (s, t): (f64, f64) = (0.7, 2.2);
        let expect = 0.5 * c2sq(0.7) * (s.powf(1.4) + t.powf(1.4) - (t - s).powf(1.4));
        assert!((cov_time_reversible(&e, &g, s, t)[(0, 0)] - expect).abs() < 1e-13);
    }

    #[test]
    fn rank_one_gram_determinant() {
        let (h1, h2) = (0.3, 0.7);
        let e = ExponentSpec::from_matrix(rmat(2, &[h1, 0.0, 0.0, h2])).unwrap();
        let m = OfbmModel::spectral(e, SpectralParam::real(rmat(2, &[1.0, 0.0, 2.0, 0.0]))).unwrap();
        let det = properness_determinant(&m, &cfg()).unwrap();
        let hm = 0.5 * (h1 + h2);
        let expect = 4.0 * (c2sq(h1) * c2sq(h2) - c2sq(hm).powi(2));
        assert!((det / expect - 1.0).abs() < 1e-6, "{det} vs {expect}");
    }

    #[test]
    fn full_quadrature_agrees_with_profiles() {
        let m = brownian_irreversible();
        let e = CovarianceEngine::new(&m, cfg()).unwrap();
        for (s, t) in [(1.0, 2.0), (-0.5, 1.5), (2.0, 0.3)] {
            let a = e.cov(s, t).unwrap();
            let b = e.cov_full(s, t).unwrap();
            assert!(max_abs_diff(&a.value, &b.value) < 1e-6, "({s}, {t})");
        }
        let res = e.stationary_identity_residual(0.4, 1.7).unwrap();
        assert!(res < 1e-6);
    }

    #[test]
    fn extended_truncation_close_to_asymptotic() {
        let m = fbm(0.3);
        let c = QuadratureConfig { tail: TailMode::ExtendedTruncation, ..cfg() };
        let a = variance_profile(&m, 1.0, &c).unwrap();
        assert!((a.value[(0, 0)] - c2sq(0.3)).abs() <= a.error[(0, 0)].max(1e-8));
    }

    #[test]
    fn reversibility_probe_detects_irreversible_model() {
        let p = reversibility_probe(&brownian_irreversible(), &[0.5, 1.0, 2.0], &cfg()).unwrap();
        assert!(!p.symmetric);
        let p = reversibility_probe(&fbm(0.3), &[0.5, 1.0, 2.0], &cfg()).unwrap();
        assert!(p.symmetric);
    }

    #[test]
    fn jordan_moment_matches_quadrature() {
        let e = ExponentSpec::from_jordan(crate::linalg::CMat::identity(2, 2), vec![crate::matfun::JordanBlockSpec::real(0.6, 2)])
            .unwrap();
        let f = GramFactor::new(&e, rmat(2, &[1.0, 0.2, 0.2, 0.5]));
        let exact = f.moment(1, 0.5, Some(3.0)).unwrap();
        let q = adaptive_gk(|x| (f.at(x) * x).as_slice().to_vec(), &[0.5, 3.0], 1e-14, 0.0, 100);
        assert!(max_abs_diff(&exact, &from_flat(2, &q.value)) < 1e-12);
    }

    prop_compose! {
        fn lrd_model()(
            noise in proptest::collection::vec(-0.2f64..0.2, 4),
            roots in proptest::collection::vec(0.15f64..0.85, 2),
            a in proptest::collection::vec(-1.5f64..1.5, 8),
        ) -> OfbmModel {
            let q = RMat::identity(2, 2) + RMat::from_row_slice(2, 2, &noise);
            let h = &q * RMat::from_diagonal(&nalgebra::DVector::from_vec(roots)) * q.try_inverse().unwrap();
            let e = ExponentSpec::from_matrix(h).unwrap();
            OfbmModel::spectral(e, SpectralParam::new(rmat(2, &a[..4]), rmat(2, &a[4..]))).unwrap()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn variance_matches_mellin_closed_form(m in lrd_model(), r in 0.1f64..5.0) {
            let v = variance_profile(&m, r, &cfg()).unwrap();
            let want = mellin_variance(&m, r);
            prop_assert!(max_abs_diff(&v.value, &want) <= 1e-7 * max_abs(&want).max(1.0));
        }

        #[test]
        fn scaling_law_and_psd(m in lrd_model(), r in 0.2f64..3.0) {
            let e = CovarianceEngine::new(&m, cfg()).unwrap();
            let v = e.variance(r).unwrap().value;
            prop_assert!(sym_min_eigenvalue(&v) >= -1e-10 * max_abs(&v));
            prop_assert!(max_abs_diff(&v, &v.transpose()) <= 1e-12 * max_abs(&v).max(1.0));
            for c in [0.5, 2.0, 10.0] {
                let lhs = e.variance(c * r).unwrap().value;
                let rhs = e.scale_by(c, &v);
                prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-6 * max_abs(&lhs));
            }
        }
    }
}
