//! Vector-valued quadrature rules.
//!
//! Integrands return a flat `Vec<f64>` of fixed length (a matrix in column
//! order, or interleaved real/imaginary parts). Error estimates are per
//! component and absolute.

use std::f64::consts::PI;

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss 7-point weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub evals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn zeros(len: usize) -> Self {
        Self { value: vec![0.0; len], error: vec![0.0; len], evals: 0, converged: true }
    }

    pub fn max_error(&self) -> f64 {
        self.error.iter().fold(0.0_f64, |a, e| a.max(*e))
    }

    pub fn accumulate(&mut self, other: &QuadResult) {
        add_into(&mut self.value, &other.value);
        add_into(&mut self.error, &other.error);
        self.evals += other.evals;
        self.converged &= other.converged;
    }
}

pub fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn add_scaled(acc: &mut [f64], v: &[f64], w: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += w * b;
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Tolerance test shared by the adaptive rules.
fn within(err: &[f64], val: &[f64], abs_tol: f64, rel_tol: f64) -> bool {
    max_abs(err) <= abs_tol.max(rel_tol * max_abs(val))
}

/// One Gauss–Kronrod 7/15 panel.
pub fn gk15<F: FnMut(f64) -> Vec<f64>>(f: &mut F, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let len = fc.len();
    let mut k = vec![0.0; len];
    let mut g = vec![0.0; len];
    add_scaled(&mut k, &fc, WGK[7]);
    add_scaled(&mut g, &fc, WG[3]);
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        add_scaled(&mut k, &f1, WGK[j]);
        add_scaled(&mut k, &f2, WGK[j]);
        if j % 2 == 1 {
            add_scaled(&mut g, &f1, WG[j / 2]);
            add_scaled(&mut g, &f2, WG[j / 2]);
        }
    }
    let value: Vec<f64> = k.iter().map(|v| v * h).collect();
    let error: Vec<f64> = k.iter().zip(&g).map(|(kv, gv)| ((kv - gv) * h).abs()).collect();
    (value, error)
}

/// Adaptive Gauss–Kronrod over `[breaks[0], breaks[last]]`, starting from the
/// given panel boundaries and bisecting the worst panel.
pub fn adaptive_gk<F: FnMut(f64) -> Vec<f64>>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> QuadResult {
    assert!(breaks.len() >= 2);
    let mut panels: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            panels.push((w[0], w[1], v, e));
        }
    }
    if panels.is_empty() {
        let len = f(breaks[0]).len();
        return QuadResult::zeros(len);
    }
    let len = panels[0].2.len();
    let mut evals = 15 * panels.len();
    let totals = |panels: &[(f64, f64, Vec<f64>, Vec<f64>)]| {
        let mut v = vec![0.0; len];
        let mut e = vec![0.0; len];
        for p in panels {
            add_into(&mut v, &p.2);
            add_into(&mut e, &p.3);
        }
        (v, e)
    };
    let (mut value, mut error) = totals(&panels);
    let mut converged = within(&error, &value, abs_tol, rel_tol);
    while !converged && panels.len() < max_panels {
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, max_abs(&p.3)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (a, b, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            break;
        }
        let (v1, e1) = gk15(&mut f, a, m);
        let (v2, e2) = gk15(&mut f, m, b);
        evals += 30;
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
        let t = totals(&panels);
        value = t.0;
        error = t.1;
        converged = within(&error, &value, abs_tol, rel_tol);
    }
    QuadResult { value, error, evals, converged }
}

/// Tanh-sinh rule on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` with the two distances computed
/// without cancellation, so it can resolve endpoint singularities.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> Vec<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    const MAX_LEVEL: u32 = 10;
    let half = 0.5 * (b - a);
    let eval_at = |t: f64, f: &mut F| -> Option<(f64, Vec<f64>)> {
        let u = 0.5 * PI * t.sinh();
        let ch = u.cosh();
        let comp = (-u.abs()).exp() / ch;
        let w = 0.5 * PI * t.cosh() / (ch * ch);
        let dist = half * comp;
        if dist <= f64::MIN_POSITIVE * 1e4 || w == 0.0 {
            return None;
        }
        let (x, da, db) = if t > 0.0 {
            (b - dist, 2.0 * half - dist, dist)
        } else if t < 0.0 {
            (a + dist, dist, 2.0 * half - dist)
        } else {
            (a + half, half, half)
        };
        let v = f(x, da, db);
        Some((w * half, v))
    };
    let mut evals = 0;
    let first = eval_at(0.0, &mut f).expect("midpoint node");
    evals += 1;
    let len = first.1.len();
    let mut sum = vec![0.0; len];
    add_scaled(&mut sum, &first.1, first.0);
    // level 0: integer nodes
    let mut k = 1;
    loop {
        let mut any = false;
        for t in [k as f64, -(k as f64)] {
            if let Some((w, v)) = eval_at(t, &mut f) {
                evals += 1;
                if v.iter().all(|x| x.is_finite()) {
                    add_scaled(&mut sum, &v, w);
                }
                any = true;
            }
        }
        if !any {
            break;
        }
        k += 1;
    }
    let mut h = 1.0;
    let mut estimate: Vec<f64> = sum.clone();
    let mut error = vec![f64::INFINITY; len];
    let mut converged = false;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut j = 1usize;
        loop {
            let t = j as f64 * h;
            let mut any = false;
            for tt in [t, -t] {
                if let Some((w, v)) = eval_at(tt, &mut f) {
                    evals += 1;
                    if v.iter().all(|x| x.is_finite()) {
                        add_scaled(&mut sum, &v, w);
                    }
                    any = true;
                }
            }
            if !any {
                break;
            }
            j += 2;
        }
        let new: Vec<f64> = sum.iter().map(|s| s * h).collect();
        error = new.iter().zip(&estimate).map(|(x, y)| (x - y).abs()).collect();
        estimate = new;
        if level >= 3 && within(&error, &estimate, abs_tol, rel_tol) {
            converged = true;
            break;
        }
    }
    QuadResult { value: estimate, error, evals, converged }
}

/// Exp-sinh rule on `[a, ∞)` for non-oscillatory integrands that decay at
/// least like an integrable power. The integrand receives `(x, x - a)`.
pub fn exp_sinh<F: FnMut(f64, f64) -> Vec<f64>>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    const MAX_LEVEL: u32 = 10;
    const U_LIMIT: f64 = 690.0;
    let node = |t: f64, f: &mut F| -> Option<(f64, Vec<f64>)> {
        let u = 0.5 * PI * t.sinh();
        if u.abs() > U_LIMIT {
            return None;
        }
        let e = u.exp();
        let w = 0.5 * PI * t.cosh() * e;
        let v = f(a + e, e);
        Some((w, v))
    };
    let mut evals = 0;
    let (w0, v0) = node(0.0, &mut f).expect("central node");
    evals += 1;
    let len = v0.len();
    let mut sum = vec![0.0; len];
    add_scaled(&mut sum, &v0, w0);
    let step_out = |h: f64, start: usize, stride: usize, sum: &mut Vec<f64>, f: &mut F, evals: &mut usize| {
        for dir in [1.0, -1.0] {
            let mut j = start;
            while let Some((w, v)) = node(dir * j as f64 * h, f) {
                *evals += 1;
                if v.iter().all(|x| x.is_finite()) {
                    add_scaled(sum, &v, w);
                }
                j += stride;
            }
        }
    };
    step_out(1.0, 1, 1, &mut sum, &mut f, &mut evals);
    let mut h = 1.0;
    let mut estimate = sum.clone();
    let mut error = vec![f64::INFINITY; len];
    let mut converged = false;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        step_out(h, 1, 2, &mut sum, &mut f, &mut evals);
        let new: Vec<f64> = sum.iter().map(|s| s * h).collect();
        error = new.iter().zip(&estimate).map(|(x, y)| (x - y).abs()).collect();
        estimate = new;
        if level >= 3 && within(&error, &estimate, abs_tol, rel_tol) {
            converged = true;
            break;
        }
    }
    QuadResult { value: estimate, error, evals, converged }
}

/// Asymptotic tail `∫_X^∞ e^{iωx} g(x) dx` by repeated integration by parts:
/// `-e^{iωX} Σ_k (-1)^k g^(k)(X) / (iω)^{k+1}`.
///
/// `deriv(k)` must return `g^(k)(X)` componentwise. Summation stops once a
/// term drops below `1e-17` of the first, once terms start to grow, or at
/// `max_terms`. Returns the complex tail and the size of the last term kept
/// as an error estimate.
pub fn oscillatory_tail<G: FnMut(usize) -> Vec<f64>>(
    omega: f64,
    x0: f64,
    mut deriv: G,
    max_terms: usize,
) -> (Vec<Complex64>, Vec<f64>) {
    let i_omega = Complex64::new(0.0, omega);
    let lead = -Complex64::from_polar(1.0, omega * x0);
    let mut factor = lead / i_omega;
    let first = deriv(0);
    let len = first.len();
    let mut total: Vec<Complex64> = first.iter().map(|g| factor * g).collect();
    let first_size = max_abs(&first) / omega.abs();
    let mut last_size = first_size;
    let mut err = vec![first_size; len];
    for k in 1..max_terms {
        factor = -factor / i_omega;
        let g = deriv(k);
        let size = max_abs(&g) * factor.norm();
        if size > last_size {
            break;
        }
        for (t, v) in total.iter_mut().zip(&g) {
            *t += factor * v;
        }
        err = g.iter().map(|v| (v * factor.norm()).abs()).collect();
        last_size = size;
        if size <= 1e-17 * first_size {
            break;
        }
    }
    (total, err)
}
