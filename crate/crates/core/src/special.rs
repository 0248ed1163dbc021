//! Complex gamma and polygamma functions.
//!
//! Everything here works on `Complex64` because exponent roots may come in
//! conjugate pairs. Accuracy is close to machine precision for
//! `Re(z) > 0`; the reflection formula covers the left half-plane for `Γ`.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// B_2, B_4, ..., B_20
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

const SHIFT_THRESHOLD: f64 = 20.0;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// True when `z` sits on (or within `tol` of) a pole of `Γ`.
pub fn is_gamma_pole(z: Complex64, tol: f64) -> bool {
    z.re <= tol && z.im.abs() <= tol && (z.re - z.re.round()).abs() <= tol
}

/// Logarithm of `Γ(z)` on some branch; only `exp` of it is branch-free.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        return Complex64::new(PI.ln(), 0.0) - (z * PI).sin().ln() - ln_gamma(1.0 - z);
    }
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.re < SHIFT_THRESHOLD {
        shift += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2.0 * (k + 1) as f64;
        series += pow * (b / (two_k * (two_k - 1.0)));
        pow *= inv2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
}

pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// Polygamma `ψ^(m)(z)`; `m = 0` is the digamma function.
pub fn polygamma(m: usize, z: Complex64) -> Complex64 {
    if z.re < 0.5 && m == 0 {
        // ψ(1-z) - ψ(z) = π cot(πz)
        let cot = (z * PI).cos() / (z * PI).sin();
        return polygamma(0, 1.0 - z) - cot * PI;
    }
    let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
    let m_fact = factorial(m);
    let mut w = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while w.re < SHIFT_THRESHOLD {
        // ψ^(m)(w) = ψ^(m)(w+1) - (-1)^m m! / w^(m+1)
        acc += w.powi(-(m as i32) - 1) * (sign_m * m_fact);
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let asym = if m == 0 {
        let mut s = w.ln() - inv * 0.5;
        let mut pow = inv2;
        for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
            let two_k = 2.0 * (k + 1) as f64;
            s -= pow * (b / two_k);
            pow *= inv2;
        }
        s
    } else {
        let lead = -sign_m; // (-1)^(m+1)
        let mut s = inv.powi(m as i32) * factorial(m - 1) + inv.powi(m as i32 + 1) * (m_fact / 2.0);
        let mut pow = inv.powi(m as i32) * inv2;
        for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
            let two_k = 2 * (k + 1);
            s += pow * (b * factorial(two_k + m - 1) / factorial(two_k));
            pow *= inv2;
        }
        s * lead
    };
    asym - acc
}

/// Derivatives `d^j/dz^j Γ(z + 1)` for `j = 0..=order`.
///
/// Uses `G = exp(L)` with `L' = ψ`, so that
/// `G^(k+1) = Σ_i C(k, i) ψ^(i)(z+1) G^(k-i)`.
pub fn gamma_shift_derivatives(z: Complex64, order: usize) -> Vec<Complex64> {
    let arg = z + 1.0;
    let mut out = Vec::with_capacity(order + 1);
    out.push(gamma(arg));
    let psis: Vec<Complex64> = (0..order).map(|m| polygamma(m, arg)).collect();
    for k in 0..order {
        let mut next = Complex64::new(0.0, 0.0);
        let mut binom = 1.0;
        for i in 0..=k {
            next += psis[i] * out[k - i] * binom;
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(c(1.0)).re - 1.0).abs() < 1e-14);
        assert!((gamma(c(5.0)).re - 24.0).abs() < 1e-12);
        assert!((gamma(c(0.5)).re - PI.sqrt()).abs() < 1e-14);
        // reflection branch
        assert!((gamma(c(-0.5)).re + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gamma_recurrence_complex() {
        let z = Complex64::new(0.3, 0.7);
        let lhs = gamma(z + 1.0);
        let rhs = z * gamma(z);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn gamma_conjugate_symmetry() {
        let z = Complex64::new(1.2, -0.4);
        assert!((gamma(z.conj()) - gamma(z).conj()).norm() < 1e-15);
    }

    #[test]
    fn digamma_at_one_is_minus_euler() {
        assert!((polygamma(0, c(1.0)).re + EULER_GAMMA).abs() < 1e-15);
    }

    #[test]
    fn trigamma_at_one_is_zeta_two() {
        assert!((polygamma(1, c(1.0)).re - PI * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn tetragamma_at_one() {
        // ψ''(1) = -2 ζ(3)
        let zeta3 = 1.202_056_903_159_594_3;
        assert!((polygamma(2, c(1.0)).re + 2.0 * zeta3).abs() < 1e-13);
    }

    #[test]
    fn polygamma_recurrence_complex() {
        let z = Complex64::new(0.4, 0.25);
        for m in 0..5usize {
            let lhs = polygamma(m, z + 1.0) - polygamma(m, z);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = z.powi(-(m as i32) - 1) * (sign * factorial(m));
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0), "m = {m}");
        }
    }

    #[test]
    fn gamma_shift_first_derivative() {
        let d = gamma_shift_derivatives(c(0.2), 1);
        let g = gamma(c(1.2));
        assert!((d[1] - g * polygamma(0, c(1.2))).norm() < 1e-15);
    }

    #[test]
    fn gamma_shift_derivatives_match_complex_step_free_differences() {
        // central differences of the analytic lower order as a loose check
        let z = Complex64::new(-0.15, 0.1);
        let d = gamma_shift_derivatives(z, 4);
        let h = 1e-5;
        for j in 0..4 {
            let up = gamma_shift_derivatives(z + h, j)[j];
            let dn = gamma_shift_derivatives(z - h, j)[j];
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - d[j + 1]).norm() < 1e-7 * d[j + 1].norm().max(1.0), "order {}", j + 1);
        }
    }

    #[test]
    fn pole_detection() {
        assert!(is_gamma_pole(c(0.0), 1e-12));
        assert!(is_gamma_pole(c(-3.0), 1e-12));
        assert!(!is_gamma_pole(c(0.5), 1e-12));
        assert!(!is_gamma_pole(Complex64::new(-1.0, 0.3), 1e-12));
    }
}
