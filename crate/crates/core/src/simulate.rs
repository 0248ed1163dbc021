//! Sample paths: a spectral Riemann-sum simulator and an exact Cholesky
//! sampler, plus ensemble statistics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{cov_time_reversible, CovarianceEngine, GramFactor, QuadratureConfig};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_sqrt_psd, to_complex, CMat, RMat};
use crate::model::OfbmModel;

/// Frequency nodes: log-spaced on `[x_min, 1]`, linear on `[1, x_max]`, each
/// node at the (geometric or arithmetic) midpoint of its cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nodes_per_decade: usize,
    pub linear_step: f64,
    /// Add the closed-form low- and high-frequency remainders as extra
    /// Gaussian terms.
    pub corrections: bool,
}

impl FrequencyGridSpec {
    /// Defaults for a time grid of span `T` and smallest step `Δt`:
    /// `x_min = 1e−6/T`, `x_max = 200/Δt`, 32 nodes per decade, 16 nodes per
    /// period of the longest time.
    pub fn for_times(times: &[f64]) -> Self {
        let (span, step) = span_and_step(times);
        Self {
            x_min: 1e-6 / span,
            x_max: (200.0 / step).max(2.0),
            nodes_per_decade: 32,
            linear_step: 2.0 * PI / (16.0 * span),
            corrections: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > 0.0 && self.x_min < self.x_max && self.linear_step > 0.0 && self.nodes_per_decade > 0) {
            return Err(Error::InvalidInput("frequency grid needs 0 < x_min < x_max and positive spacing".into()));
        }
        if self.node_count() < 2 {
            return Err(Error::InvalidInput("frequency grid needs at least two nodes".into()));
        }
        Ok(())
    }

    /// `(node, weight)` pairs.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let split = self.x_max.min(1.0);
        if self.x_min < split {
            let decades = (split / self.x_min).log10();
            let m = ((decades * self.nodes_per_decade as f64).ceil() as usize).max(1);
            let ratio = (split / self.x_min).powf(1.0 / m as f64);
            let mut a = self.x_min;
            for i in 0..m {
                let b = if i + 1 == m { split } else { a * ratio };
                out.push(((a * b).sqrt(), b - a));
                a = b;
            }
        }
        let start = self.x_min.max(1.0);
        if self.x_max > start {
            let m = (((self.x_max - start) / self.linear_step).ceil() as usize).max(1);
            let h = (self.x_max - start) / m as f64;
            for i in 0..m {
                out.push((start + (i as f64 + 0.5) * h, h));
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes().len()
    }
}

fn span_and_step(times: &[f64]) -> (f64, f64) {
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.push(0.0);
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let span = (sorted[sorted.len() - 1] - sorted[0]).max(1e-300);
    let step = sorted.windows(2).map(|w| w[1] - w[0]).fold(span, f64::min);
    (if span > 1e-300 { span } else { 1.0 }, if step > 0.0 { step } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Spectral,
    Cholesky,
}

impl SimMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            SimMethod::Spectral => "spectral",
            SimMethod::Cholesky => "cholesky",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub dim: usize,
    pub n_paths: usize,
    /// `data[(p · times.len() + k) · dim + i]` is component `i` of path `p`
    /// at `times[k]`.
    pub data: Vec<f64>,
    pub seed: u64,
    pub method: SimMethod,
    pub freq: Option<FrequencyGridSpec>,
    /// Diagonal jitter added before factorization (Cholesky only).
    pub jitter: f64,
}

impl PathEnsemble {
    pub fn value(&self, path: usize, k: usize) -> &[f64] {
        let o = (path * self.times.len() + k) * self.dim;
        &self.data[o..o + self.dim]
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::GridMiss { time: t })
    }
}

/// Validated time grid: strictly increasing with `0` inserted if absent.
pub fn normalize_times(times: &[f64]) -> Result<Vec<f64>> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
    }
    let mut out = times.to_vec();
    if !out.contains(&0.0) {
        out.push(0.0);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Ok(out)
}

/// Standard normals from a counter-based stream: path `p` uses stream `p`,
/// and every draw consumes exactly one 64-bit word pair per two normals.
struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // Box–Muller keeps the word count per draw fixed
        let r = (-2.0 * self.uniform().ln()).sqrt();
        let th = 2.0 * PI * self.uniform();
        self.spare = Some(r * th.sin());
        r * th.cos()
    }
}

fn phase(t: f64, x: f64) -> Complex64 {
    // (e^{itx} − 1)/(ix) = e^{itx/2} · 2 sin(tx/2)/x
    let half = 0.5 * t * x;
    Complex64::from_polar(2.0 * half.sin() / x, half)
}

/// Precomputed spectral scheme for one model, time grid and frequency grid.
struct SpectralScheme {
    n: usize,
    /// `√Δ_k · x_k^{-D} A` per node.
    factors: Vec<CMat>,
    /// `phase(t_j, x_k)` stored node-major.
    phases: Vec<Complex64>,
    low: Option<RMat>,
    high: Option<RMat>,
}

impl SpectralScheme {
    fn new(model: &OfbmModel, times: &[f64], freq: &FrequencyGridSpec) -> Result<Self> {
        freq.validate()?;
        let n = model.dim();
        let e = model.exponent();
        let a = model.spectral_param().complex();
        let nodes = freq.nodes();
        let factors = nodes
            .iter()
            .map(|&(x, w)| to_complex(&e.power_neg_d(x)) * &a * Complex64::new(w.sqrt(), 0.0))
            .collect();
        let mut phases = Vec::with_capacity(nodes.len() * times.len());
        for &(x, _) in &nodes {
            for &t in times {
                phases.push(phase(t, x));
            }
        }
        let (low, high) = if freq.corrections {
            let fr = GramFactor::new(e, model.gram_re());
            // below x_min: Re k ≈ s t x²; above x_max: Re k averages 1 + δ_st
            let low = fr.moment(0, 0.0, Some(freq.x_min))? * 2.0;
            let high = fr.moment(-2, freq.x_max, None)? * 2.0;
            (Some(sym_sqrt_psd(&low)), Some(sym_sqrt_psd(&high)))
        } else {
            (None, None)
        };
        Ok(Self { n, factors, phases, low, high })
    }

    fn path(&self, times: &[f64], seed: u64, p: usize) -> Vec<f64> {
        let n = self.n;
        let m = times.len();
        let mut out = vec![0.0; m * n];
        let mut rng = NormalStream::new(seed, p as u64);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        for (k, g) in self.factors.iter().enumerate() {
            for zi in z.iter_mut() {
                *zi = Complex64::new(rng.normal() * scale, rng.normal() * scale);
            }
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += g[(i, j)] * z[j];
                }
                w[i] = acc;
            }
            let ph = &self.phases[k * m..(k + 1) * m];
            for (j, f) in ph.iter().enumerate() {
                for i in 0..n {
                    out[j * n + i] += 2.0 * (f * w[i]).re;
                }
            }
        }
        if let (Some(low), Some(high)) = (&self.low, &self.high) {
            let draw = |rng: &mut NormalStream, c: &RMat| {
                let xi: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                c * nalgebra::DVector::from_vec(xi)
            };
            let lo = draw(&mut rng, low);
            let shared = draw(&mut rng, high);
            for (j, &t) in times.iter().enumerate() {
                let own = draw(&mut rng, high);
                if t == 0.0 {
                    continue;
                }
                for i in 0..n {
                    out[j * n + i] += t * lo[i] + shared[i] + own[i];
                }
            }
        }
        for (j, &t) in times.iter().enumerate() {
            if t == 0.0 {
                out[j * n..(j + 1) * n].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        out
    }

    /// Exact covariance of the discretized scheme.
    fn covariance(&self, times: &[f64], j1: usize, j2: usize) -> RMat {
        let m = times.len();
        let mut acc = CMat::zeros(self.n, self.n);
        for (k, g) in self.factors.iter().enumerate() {
            let c = self.phases[k * m + j1] * self.phases[k * m + j2].conj();
            acc += g * g.adjoint() * c;
        }
        let mut out = acc.map(|v| 2.0 * v.re);
        let (s, t) = (times[j1], times[j2]);
        if s == 0.0 || t == 0.0 {
            return RMat::zeros(self.n, self.n);
        }
        if let (Some(low), Some(high)) = (&self.low, &self.high) {
            out += low * low * (s * t);
            let h2 = high * high;
            out += &h2 * if s == t { 2.0 } else { 1.0 };
        }
        out
    }
}

pub fn simulate_spectral(
    model: &OfbmModel,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    freq: &FrequencyGridSpec,
) -> Result<PathEnsemble> {
    let times = normalize_times(times)?;
    let scheme = SpectralScheme::new(model, &times, freq)?;
    let data: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| scheme.path(&times, seed, p))
        .collect::<Vec<_>>()
        .concat();
    Ok(PathEnsemble {
        dim: model.dim(),
        times,
        n_paths,
        data,
        seed,
        method: SimMethod::Spectral,
        freq: Some(*freq),
        jitter: 0.0,
    })
}

/// Covariance `E X(s) X(t)ᵀ` that the spectral scheme targets exactly.
pub fn spectral_scheme_covariance(model: &OfbmModel, s: f64, t: f64, freq: &FrequencyGridSpec) -> Result<RMat> {
    let times = [s, t];
    let scheme = SpectralScheme::new(model, &times, freq)?;
    Ok(scheme.covariance(&times, 0, 1))
}

/// Block covariance matrix over the nonzero times.
fn grid_covariance(model: &OfbmModel, times: &[f64], cfg: &QuadratureConfig) -> Result<RMat> {
    let n = model.dim();
    let m = times.len();
    let mut big = RMat::zeros(m * n, m * n);
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let blocks: Vec<RMat> = if model.flags().time_reversible {
        let engine = CovarianceEngine::new(model, *cfg)?;
        let v1 = engine.variance(1.0)?.value;
        pairs
            .iter()
            .map(|&(i, j)| cov_time_reversible(model.exponent(), &v1, times[i], times[j]))
            .collect()
    } else {
        let engine = CovarianceEngine::new(model, *cfg)?;
        pairs
            .par_iter()
            .map(|&(i, j)| engine.cov(times[i], times[j]).map(|e| e.value))
            .collect::<Result<_>>()?
    };
    for (&(i, j), b) in pairs.iter().zip(blocks) {
        big.view_mut((i * n, j * n), (n, n)).copy_from(&b);
        if i != j {
            big.view_mut((j * n, i * n), (n, n)).copy_from(&b.transpose());
        }
    }
    Ok(big)
}

/// Cholesky factor with the smallest jitter `10^k · 1e−16 · trace` that
/// succeeds, capped at `1e−10 · trace`.
fn jittered_cholesky(m: &RMat) -> Result<(RMat, f64)> {
    let size = m.nrows();
    if size == 0 {
        return Ok((m.clone(), 0.0));
    }
    let trace = m.trace().abs().max(f64::MIN_POSITIVE);
    let cap = 1e-10 * trace;
    if let Some(c) = m.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    for k in 0..=6 {
        let jitter = 1e-16 * trace * 10f64.powi(k);
        let shifted = m + RMat::identity(size, size) * jitter;
        if let Some(c) = shifted.cholesky() {
            return Ok((c.l(), jitter));
        }
    }
    Err(Error::CovarianceNotPsd { cap })
}

pub fn simulate_cholesky(
    model: &OfbmModel,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<PathEnsemble> {
    let times = normalize_times(times)?;
    let n = model.dim();
    let nz: Vec<usize> = (0..times.len()).filter(|&k| times[k] != 0.0).collect();
    let sub: Vec<f64> = nz.iter().map(|&k| times[k]).collect();
    let big = grid_covariance(model, &sub, cfg)?;
    let (l, jitter) = jittered_cholesky(&big)?;
    let size = sub.len() * n;
    let m = times.len();
    let data: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = NormalStream::new(seed, p as u64);
            let xi = nalgebra::DVector::from_iterator(size, (0..size).map(|_| rng.normal()));
            let y = &l * xi;
            let mut out = vec![0.0; m * n];
            for (q, &k) in nz.iter().enumerate() {
                out[k * n..(k + 1) * n].copy_from_slice(&y.as_slice()[q * n..(q + 1) * n]);
            }
            out
        })
        .collect::<Vec<_>>()
        .concat();
    Ok(PathEnsemble { dim: n, times, n_paths, data, seed, method: SimMethod::Cholesky, freq: None, jitter })
}

/// Sample mean of `X(s) X(t)ᵀ` and its elementwise standard error.
pub fn empirical_cov(ens: &PathEnsemble, s: f64, t: f64) -> Result<(RMat, RMat)> {
    let (ks, kt) = (ens.time_index(s)?, ens.time_index(t)?);
    empirical_cov_of(ens, |p| (ens.value(p, ks).to_vec(), ens.value(p, kt).to_vec()))
}

/// Sample cross-moment of two per-path vectors, with standard errors.
pub fn empirical_cov_of<F>(ens: &PathEnsemble, f: F) -> Result<(RMat, RMat)>
where
    F: Fn(usize) -> (Vec<f64>, Vec<f64>),
{
    let n = ens.dim;
    let mut mean = RMat::zeros(n, n);
    let mut sq = RMat::zeros(n, n);
    for p in 0..ens.n_paths {
        let (u, v) = f(p);
        for i in 0..n {
            for j in 0..n {
                let prod = u[i] * v[j];
                mean[(i, j)] += prod;
                sq[(i, j)] += prod * prod;
            }
        }
    }
    let np = ens.n_paths as f64;
    if ens.n_paths < 2 {
        return Ok((if ens.n_paths == 1 { mean } else { RMat::zeros(n, n) }, RMat::zeros(n, n)));
    }
    mean /= np;
    let se = sq.zip_map(&mean, |q, m| ((q / np - m * m).max(0.0) * np / (np - 1.0) / np).sqrt());
    Ok((mean, se))
}

/// Increment `X(t) − X(s)` of path `p`.
pub fn increment(ens: &PathEnsemble, p: usize, s: f64, t: f64) -> Result<Vec<f64>> {
    let (ks, kt) = (ens.time_index(s)?, ens.time_index(t)?);
    Ok(ens.value(p, kt).iter().zip(ens.value(p, ks)).map(|(a, b)| a - b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarityRow {
    pub c: f64,
    pub residual: f64,
    /// Error bound propagated from the two covariance evaluations.
    pub bound: f64,
}

/// `‖Γ(cs, ct) − c^H Γ(s, t) c^{Hᵀ}‖_max` for each scale.
pub fn self_similarity_report(
    model: &OfbmModel,
    base: (f64, f64),
    scales: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<SelfSimilarityRow>> {
    let engine = CovarianceEngine::new(model, *cfg)?;
    let g = engine.cov(base.0, base.1)?;
    scales
        .par_iter()
        .map(|&c| {
            if !(c > 0.0) {
                return Err(Error::InvalidInput(format!("scale {c} must be positive")));
            }
            let lhs = engine.cov(c * base.0, c * base.1)?;
            let rhs = engine.scale_by(c, &g.value);
            let n = g.value.nrows() as f64;
            let bound = lhs.max_error() + max_abs(&model.exponent().power(c)).powi(2) * n * n * g.max_error();
            Ok(SelfSimilarityRow { c, residual: max_abs(&(lhs.value - rhs)), bound })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::variance_profile;
    use crate::linalg::{max_abs_diff, sym_min_eigenvalue};
    use crate::matfun::{rmat, JordanBlockSpec};
    use crate::model::{ExponentSpec, SpectralParam};

    fn fbm(h: f64, a: f64) -> OfbmModel {
        OfbmModel::spectral(ExponentSpec::scalar(1, h).unwrap(), SpectralParam::real(rmat(1, &[a]))).unwrap()
    }

    fn psd_root_model() -> OfbmModel {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        OfbmModel::spectral(
            ExponentSpec::scalar(2, 0.7).unwrap(),
            SpectralParam::new(rmat(2, &[s, 0.0, 0.0, s]), rmat(2, &[0.0, s, -s, 0.0])),
        )
        .unwrap()
    }

    fn within_se(emp: &RMat, se: &RMat, want: &RMat, k: f64) -> bool {
        emp.iter().zip(se.iter()).zip(want.iter()).all(|((e, s), w)| (e - w).abs() <= k * s + 1e-12)
    }

    #[test]
    fn zero_model_gives_zero_paths() {
        let m = fbm(0.7, 0.0);
        let t = [0.5, 1.0];
        let ens = simulate_spectral(&m, &t, 5, 1, &FrequencyGridSpec::for_times(&t)).unwrap();
        assert!(ens.data.iter().all(|&v| v == 0.0));
        let (c, se) = empirical_cov(&ens, 1.0, 1.0).unwrap();
        assert_eq!(max_abs(&c), 0.0);
        assert_eq!(max_abs(&se), 0.0);
    }

    #[test]
    fn paths_start_at_zero_and_are_reproducible() {
        let m = psd_root_model();
        let t = [0.5, 1.0, 2.0];
        let f = FrequencyGridSpec::for_times(&t);
        let a = simulate_spectral(&m, &t, 20, 42, &f).unwrap();
        let b = simulate_spectral(&m, &t, 20, 42, &f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times[0], 0.0);
        for p in 0..20 {
            assert!(a.value(p, 0).iter().all(|&v| v == 0.0));
        }
        let c = simulate_spectral(&m, &t, 20, 43, &f).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn brownian_variance_monte_carlo() {
        let m = fbm(0.5, 0.8);
        let t = [1.0];
        let ens = simulate_spectral(&m, &t, 10_000, 7, &FrequencyGridSpec::for_times(&t)).unwrap();
        let (c, se) = empirical_cov(&ens, 1.0, 1.0).unwrap();
        let want = rmat(1, &[2.0 * PI * 0.64]);
        assert!(within_se(&c, &se, &want, 4.0), "{} ± {}", c[(0, 0)], se[(0, 0)]);
    }

    #[test]
    fn psd_root_model_monte_carlo() {
        let m = psd_root_model();
        let t = [1.0];
        let ens = simulate_spectral(&m, &t, 10_000, 11, &FrequencyGridSpec::for_times(&t)).unwrap();
        let (c, se) = empirical_cov(&ens, 1.0, 1.0).unwrap();
        let v = variance_profile(&m, 1.0, &QuadratureConfig::default()).unwrap().value;
        assert!(within_se(&c, &se, &v, 4.0));
        assert!(sym_min_eigenvalue(&c) >= 0.0);
        assert!(max_abs_diff(&c, &c.transpose()) < 1e-12);
    }

    #[test]
    fn scheme_covariance_close_to_analytic() {
        for m in [fbm(0.3, 1.0), fbm(0.7, 1.0), psd_root_model()] {
            let t = [0.5, 1.0, 2.0];
            let f = FrequencyGridSpec::for_times(&t);
            let engine = CovarianceEngine::new(&m, QuadratureConfig::default()).unwrap();
            for (s, u) in [(1.0, 1.0), (0.5, 2.0), (2.0, 1.0)] {
                let a = spectral_scheme_covariance(&m, s, u, &f).unwrap();
                let b = engine.cov(s, u).unwrap().value;
                assert!(max_abs_diff(&a, &b) <= 2e-3 * max_abs(&b), "({s},{u}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn bias_shrinks_on_refinement_ladder() {
        let m = fbm(0.3, 1.0);
        let want = variance_profile(&m, 1.0, &QuadratureConfig::default()).unwrap().value[(0, 0)];
        let mut prev = f64::INFINITY;
        for (x_min, x_max, dens) in [(1e-2, 20.0, 8), (1e-3, 80.0, 16), (1e-4, 320.0, 32)] {
            let f = FrequencyGridSpec {
                x_min,
                x_max,
                nodes_per_decade: dens,
                linear_step: 2.0 * PI / (2.0 * dens as f64),
                corrections: false,
            };
            let bias = (spectral_scheme_covariance(&m, 1.0, 1.0, &f).unwrap()[(0, 0)] - want).abs();
            assert!(bias < prev, "bias {bias} did not shrink");
            prev = bias;
        }
    }

    #[test]
    fn cholesky_single_time_and_cross_method() {
        let m = fbm(0.7, 1.0);
        let cfg = QuadratureConfig::default();
        let t = [1.0, 2.0];
        let chol = simulate_cholesky(&m, &t, 10_000, 3, &cfg).unwrap();
        let v1 = variance_profile(&m, 1.0, &cfg).unwrap().value;
        let (c, se) = empirical_cov(&chol, 1.0, 1.0).unwrap();
        assert!(within_se(&c, &se, &v1, 4.0));
        let spec = simulate_spectral(&m, &t, 10_000, 4, &FrequencyGridSpec::for_times(&t)).unwrap();
        let (a, sa) = empirical_cov(&chol, 1.0, 2.0).unwrap();
        let (b, sb) = empirical_cov(&spec, 1.0, 2.0).unwrap();
        assert!((a[(0, 0)] - b[(0, 0)]).abs() <= 4.0 * (sa[(0, 0)] + sb[(0, 0)]));
    }

    #[test]
    fn obm_independent_increments() {
        let w = rmat(2, &[1.0, 0.3, 0.3, 0.5]);
        let m = OfbmModel::spectral(ExponentSpec::scalar(2, 0.5).unwrap(), SpectralParam::real(w)).unwrap();
        let ens = simulate_cholesky(&m, &[1.0, 2.0, 3.0], 10_000, 5, &QuadratureConfig::default()).unwrap();
        let (c, se) = empirical_cov_of(&ens, |p| (increment(&ens, p, 0.0, 1.0).unwrap(), increment(&ens, p, 2.0, 3.0).unwrap()))
            .unwrap();
        assert!(within_se(&c, &se, &RMat::zeros(2, 2), 4.0));
    }

    #[test]
    fn grid_miss_and_se_scaling() {
        let m = fbm(0.6, 1.0);
        let t = [1.0];
        let f = FrequencyGridSpec::for_times(&t);
        let small = simulate_spectral(&m, &t, 2_000, 9, &f).unwrap();
        assert!(matches!(empirical_cov(&small, 0.7, 1.0), Err(Error::GridMiss { .. })));
        let big = simulate_spectral(&m, &t, 8_000, 9, &f).unwrap();
        let se1 = empirical_cov(&small, 1.0, 1.0).unwrap().1[(0, 0)];
        let se2 = empirical_cov(&big, 1.0, 1.0).unwrap().1[(0, 0)];
        assert!((se1 / se2 / 2.0 - 1.0).abs() < 0.2);
    }

    #[test]
    fn stationary_increments_statistically() {
        let m = fbm(0.7, 1.0);
        let t = [1.0, 2.0, 5.0, 6.0];
        let ens = simulate_spectral(&m, &t, 10_000, 21, &FrequencyGridSpec::for_times(&t)).unwrap();
        let stats: Vec<(f64, f64)> = [0.0, 1.0, 5.0]
            .iter()
            .map(|&h| {
                let (c, se) =
                    empirical_cov_of(&ens, |p| {
                        let d = increment(&ens, p, h, h + 1.0).unwrap();
                        (d.clone(), d)
                    })
                    .unwrap();
                (c[(0, 0)], se[(0, 0)])
            })
            .collect();
        for a in &stats {
            for b in &stats {
                assert!((a.0 - b.0).abs() <= 4.0 * (a.1 + b.1));
            }
        }
    }

    #[test]
    fn jitter_and_psd_failure() {
        let ok = rmat(2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, j) = jittered_cholesky(&ok).unwrap();
        assert!(j > 0.0 && j <= 2e-10);
        let bad = rmat(2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(jittered_cholesky(&bad), Err(Error::CovarianceNotPsd { .. })));
    }

    #[test]
    fn self_similarity_rows() {
        let cfg = QuadratureConfig::default();
        let rows = self_similarity_report(&fbm(0.3, 1.0), (0.7, 1.3), &[1.0, 2.0, 10.0], &cfg).unwrap();
        assert_eq!(rows[0].residual, 0.0);
        for r in &rows {
            assert!(r.residual <= 10.0 * r.bound + 1e-12, "{r:?}");
        }
        let m = fbm(0.7, 1.0);
        let v1 = variance_profile(&m, 1.0, &cfg).unwrap().value[(0, 0)];
        let v2 = variance_profile(&m, 2.0, &cfg).unwrap().value[(0, 0)];
        assert!((v2 / v1 / 2f64.powf(1.4) - 1.0).abs() < 1e-8);

        let e = ExponentSpec::from_jordan(CMat::identity(2, 2), vec![JordanBlockSpec::real(0.5, 2)]).unwrap();
        let c: f64 = 3.0;
        let want = rmat(2, &[1.0, 0.0, c.ln(), 1.0]) * c.sqrt();
        assert!(max_abs_diff(&e.power(c), &want) < 1e-14);
        let jm = OfbmModel::spectral(e, SpectralParam::new(rmat(2, &[1.0, 0.0, 0.2, 0.8]), rmat(2, &[0.0, 0.3, -0.1, 0.0]))).unwrap();
        for r in self_similarity_report(&jm, (1.0, 1.0), &[0.5, 2.0, 10.0], &cfg).unwrap() {
            assert!(r.residual <= 1e-6, "{r:?}");
        }
    }
}
