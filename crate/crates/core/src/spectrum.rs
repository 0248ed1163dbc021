//! Spectral densities of operator fractional Gaussian noise and the
//! divergence-or-vanish classification of their cross entries at zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::covariance::{variance_profile, GramFactor, QuadratureConfig};
use crate::error::{Error, Result};
use crate::linalg::{complex_from_parts, max_abs_c, CMat};
use crate::model::OfbmModel;
use crate::quadrature::tanh_sinh;

pub const DICHOTOMY_BANNER: &str =
    "WARNING: outside the long-range-dependence hypothesis of the dichotomy theorem (all roots need 1/2 < Re(h) < 1); labels are diagnostic only";

const ZERO_THRESHOLD: f64 = 1e-10;

/// `x^{-D} AA* x^{-D*}` for `x > 0` and `|x|^{-D} conj(AA*) |x|^{-D*}` for
/// `x < 0`; zero at `x = 0`.
#[derive(Debug, Clone)]
pub struct DensityFactor {
    fr: GramFactor,
    fq: GramFactor,
}

impl DensityFactor {
    pub fn new(model: &OfbmModel) -> Self {
        let e = model.exponent();
        Self { fr: GramFactor::new(e, model.gram_re()), fq: GramFactor::new(e, model.gram_im()) }
    }

    pub fn dim(&self) -> usize {
        self.fr.dim()
    }

    pub fn at(&self, x: f64) -> CMat {
        let n = self.dim();
        if x == 0.0 {
            return CMat::zeros(n, n);
        }
        let y = x.abs();
        let re = self.fr.at(y);
        let im = self.fq.at(y);
        if x > 0.0 {
            complex_from_parts(&re, &im)
        } else {
            complex_from_parts(&re, &(-im))
        }
    }
}

/// `2(1 − cos x)` without cancellation near zero.
fn two_one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    4.0 * s * s
}

/// Continuous-time density `|e^{ix} − 1|² / x² · h(x)`.
pub fn ofgn_density_ct(model: &OfbmModel, x: f64) -> CMat {
    ct_with(&DensityFactor::new(model), x)
}

fn ct_with(h: &DensityFactor, x: f64) -> CMat {
    if x == 0.0 {
        return CMat::zeros(h.dim(), h.dim());
    }
    let w = two_one_minus_cos(x) / (x * x);
    h.at(x) * Complex64::new(w, 0.0)
}

#[derive(Debug, Clone)]
pub struct DtDensity {
    pub value: CMat,
    /// Summation range `k ∈ [−K, K]`.
    pub k: usize,
    /// Bound on the error left after the tail correction.
    pub tail_bound: f64,
}

/// Discrete-time density evaluator; `g(x) = Σ_k f(x + 2πk)`.
///
/// The sum runs over `|k| ≤ K`; the remainder is replaced by its midpoint-rule
/// integral, which is exact through power moments. The reported bound is the
/// midpoint-rule remainder estimate `(2π/12)·|φ'|` at the first omitted node
/// for each side.
#[derive(Debug, Clone)]
pub struct DtEvaluator {
    h: DensityFactor,
    seeds_r: Vec<crate::linalg::RMat>,
    seeds_q: Vec<crate::linalg::RMat>,
}

impl DtEvaluator {
    pub fn new(model: &OfbmModel) -> Self {
        let h = DensityFactor::new(model);
        let seeds_r = h.fr.derivative_seeds(2);
        let seeds_q = h.fq.derivative_seeds(2);
        Self { h, seeds_r, seeds_q }
    }

    fn side_tail(&self, y0: f64, sign: f64) -> Result<(CMat, f64)> {
        // ∫_{y0}^∞ y⁻² F(y) dy / 2π, plus the derivative for the bound
        let re = self.h.fr.moment(-2, y0, None)?;
        let im = self.h.fq.moment(-2, y0, None)? * sign;
        let integral = complex_from_parts(&re, &im) * Complex64::new(1.0 / (2.0 * PI), 0.0);
        let dre = self.h.fr.at_with(y0, &self.seeds_r[1]);
        let dim = self.h.fq.at_with(y0, &self.seeds_q[1]);
        let deriv = max_abs_c(&complex_from_parts(&dre, &dim)) * y0.powi(-3);
        Ok((integral, 2.0 * PI / 12.0 * deriv))
    }

    /// Density with a fixed truncation index.
    pub fn with_k(&self, x: f64, k: usize) -> Result<DtDensity> {
        let n = self.h.dim();
        let w = two_one_minus_cos(x);
        let mut acc = CMat::zeros(n, n);
        if w == 0.0 {
            return Ok(DtDensity { value: acc, k, tail_bound: 0.0 });
        }
        for j in -(k as i64)..=(k as i64) {
            let y = x + 2.0 * PI * j as f64;
            if y != 0.0 {
                acc += self.h.at(y) * Complex64::new(1.0 / (y * y), 0.0);
            }
        }
        let half = PI * (2 * k + 1) as f64;
        let (plus, bp) = self.side_tail(half + x, 1.0)?;
        let (minus, bm) = self.side_tail(half - x, -1.0)?;
        acc += plus + minus;
        Ok(DtDensity { value: acc * Complex64::new(w, 0.0), k, tail_bound: w * (bp + bm) })
    }

    /// Density with the smallest `K = 2^m` whose tail bound is below `tol`.
    pub fn eval(&self, x: f64, tol: f64) -> Result<DtDensity> {
        let mut k = 2;
        loop {
            let d = self.with_k(x, k)?;
            if d.tail_bound <= tol || k >= 1 << 16 {
                return Ok(d);
            }
            k *= 2;
        }
    }
}

pub fn ofgn_density_dt(model: &OfbmModel, x: f64, tol: f64) -> Result<DtDensity> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("density tolerance must be positive".into()));
    }
    if !(-PI..=PI).contains(&x) {
        return Err(Error::InvalidInput(format!("frequency {x} outside [-π, π]")));
    }
    DtEvaluator::new(model).eval(x, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    ContinuousTime,
    DiscreteTime,
}

#[derive(Debug, Clone)]
pub struct SpectrumGrid {
    pub frequencies: Vec<f64>,
    pub values: Vec<CMat>,
    /// Per-frequency truncation index (0 in continuous time).
    pub k: Vec<usize>,
    pub tail_bound: Vec<f64>,
}

/// Frequencies: `n_log` log-spaced points in `[1e−6, 1e−1]` mirrored to
/// negative values, plus `n_lin` equispaced points on `[−π, π]`.
pub fn default_frequencies(n_log: usize, n_lin: usize) -> Vec<f64> {
    let mut f = Vec::new();
    for i in 0..n_log {
        let t = if n_log > 1 { i as f64 / (n_log - 1) as f64 } else { 0.0 };
        let x = 10f64.powf(-6.0 + 5.0 * t);
        f.push(x);
        f.push(-x);
    }
    for i in 0..n_lin {
        let t = if n_lin > 1 { i as f64 / (n_lin - 1) as f64 } else { 0.5 };
        f.push(-PI + 2.0 * PI * t);
    }
    f.sort_by(|a, b| a.partial_cmp(b).unwrap());
    f.dedup();
    f
}

pub fn spectrum_grid(model: &OfbmModel, frequencies: &[f64], mode: DensityMode, tol: f64) -> Result<SpectrumGrid> {
    let rows: Vec<DtDensity> = match mode {
        DensityMode::ContinuousTime => {
            let h = DensityFactor::new(model);
            frequencies
                .par_iter()
                .map(|&x| DtDensity { value: ct_with(&h, x), k: 0, tail_bound: 0.0 })
                .collect()
        }
        DensityMode::DiscreteTime => {
            let ev = DtEvaluator::new(model);
            frequencies
                .par_iter()
                .map(|&x| {
                    if !(-PI..=PI).contains(&x) {
                        return Err(Error::InvalidInput(format!("frequency {x} outside [-π, π]")));
                    }
                    ev.eval(x, tol)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(SpectrumGrid {
        frequencies: frequencies.to_vec(),
        k: rows.iter().map(|r| r.k).collect(),
        tail_bound: rows.iter().map(|r| r.tail_bound).collect(),
        values: rows.into_iter().map(|r| r.value).collect(),
    })
}

/// `‖∫_{−π}^{π} g(x) dx − V(1)‖_max / ‖V(1)‖_max`.
pub fn poisson_residual(model: &OfbmModel, tol: f64) -> Result<f64> {
    let ev = DtEvaluator::new(model);
    let n = model.dim();
    // g(−x) = conj(g(x)), so the integral is 2 Re ∫₀^π g
    let q = tanh_sinh(
        |x, _, _| match ev.eval(x, tol * 1e-2) {
            Ok(d) => d.value.iter().map(|z| z.re).collect(),
            Err(_) => vec![f64::NAN; n * n],
        },
        0.0,
        PI,
        tol,
        tol,
    );
    let lhs = crate::linalg::RMat::from_column_slice(n, n, &q.value) * 2.0;
    let v1 = variance_profile(model, 1.0, &QuadratureConfig::default())?.value;
    let scale = crate::linalg::max_abs(&v1);
    if scale == 0.0 {
        return Ok(crate::linalg::max_abs(&lhs));
    }
    Ok(crate::linalg::max_abs_diff(&lhs, &v1) / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryLabel {
    Diverges,
    Zero,
    /// Neither vanishing nor growing; only produced in diagnostic mode.
    Bounded,
}

impl EntryLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntryLabel::Diverges => "DIVERGES",
            EntryLabel::Zero => "ZERO",
            EntryLabel::Bounded => "BOUNDED",
        }
    }
}

/// 20 log-spaced frequencies from 1e−8 to 1e−1, descending toward zero last.
pub fn default_probes() -> Vec<f64> {
    log_probes(20)
}

pub fn log_probes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 10f64.powf(-1.0 - 7.0 * i as f64 / (count - 1) as f64))
        .collect()
}

fn label_matrix(model: &OfbmModel, probes: &[f64]) -> Vec<Vec<Option<EntryLabel>>> {
    let n = model.dim();
    let h = DensityFactor::new(model);
    let mut sorted = probes.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let vals: Vec<CMat> = sorted.iter().map(|&x| h.at(x)).collect();
    let m = sorted.len().min(5).max(1);
    let mut out = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mags: Vec<f64> = vals.iter().map(|v| v[(i, j)].norm()).collect();
            // |h_ij| ≤ sqrt(h_ii h_jj) for a psd matrix, so this is the natural scale
            let scale = vals
                .iter()
                .map(|v| (v[(i, i)].norm() * v[(j, j)].norm()).sqrt())
                .fold(0.0, f64::max);
            let label = if mags.iter().all(|&v| v <= ZERO_THRESHOLD * scale) {
                Some(EntryLabel::Zero)
            } else {
                let large_x = mags[..m].iter().cloned().fold(0.0, f64::max);
                let small_x = mags[mags.len() - m..].iter().cloned().fold(0.0, f64::max);
                if small_x > large_x * (1.0 + 1e-9) {
                    Some(EntryLabel::Diverges)
                } else {
                    None
                }
            };
            out[i][j] = label;
        }
    }
    out
}

fn require_lrd(model: &OfbmModel) -> Result<()> {
    for root in model.exponent().roots() {
        if !(root.re > 0.5 && root.re < 1.0) {
            return Err(Error::LrdRange { root });
        }
    }
    Ok(())
}

/// Labels every entry of the discrete-time density as diverging at zero or
/// vanishing identically. Requires all roots in `1/2 < Re(h) < 1`.
pub fn dichotomy_classify(model: &OfbmModel, probes: &[f64]) -> Result<Vec<Vec<EntryLabel>>> {
    require_lrd(model)?;
    let labels = label_matrix(model, probes);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, l)| l.ok_or(Error::AmbiguousEntry { i, j }))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DichotomyDiagnostic {
    /// Present when the model lies outside the theorem's hypothesis.
    pub banner: Option<&'static str>,
    pub labels: Vec<Vec<EntryLabel>>,
    pub frequencies: Vec<f64>,
    /// Discrete-time density at each probe frequency.
    pub density: Vec<CMat>,
}

/// Classification without the root-range guard, with the density values it
/// is based on.
pub fn dichotomy_diagnostic(model: &OfbmModel, probes: &[f64], tol: f64) -> Result<DichotomyDiagnostic> {
    let banner = require_lrd(model).err().map(|_| DICHOTOMY_BANNER);
    let labels = label_matrix(model, probes)
        .into_iter()
        .map(|row| row.into_iter().map(|l| l.unwrap_or(EntryLabel::Bounded)).collect())
        .collect();
    let ev = DtEvaluator::new(model);
    let density = probes.iter().map(|&x| ev.eval(x, tol).map(|d| d.value)).collect::<Result<_>>()?;
    Ok(DichotomyDiagnostic { banner, labels, frequencies: probes.to_vec(), density })
}
