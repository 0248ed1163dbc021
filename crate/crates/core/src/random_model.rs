//! Seeded random models for the property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::RMat;
use crate::model::{ExponentSpec, OfbmModel, SpectralParam};

/// Admissible real parts of the exponent roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBand {
    pub lo: f64,
    pub hi: f64,
    /// Half-width of the excluded window around 1/2.
    pub exclude_half: f64,
}

impl RootBand {
    /// `(0.05, 0.95)` without `0.5 ± 0.01`.
    pub const GENERAL: RootBand = RootBand { lo: 0.05, hi: 0.95, exclude_half: 0.01 };
    /// Long-range dependent band `(0.55, 0.95)`.
    pub const LRD: RootBand = RootBand { lo: 0.55, hi: 0.95, exclude_half: 0.0 };

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let h = rng.random_range(self.lo..self.hi);
            if (h - 0.5).abs() > self.exclude_half {
                return h;
            }
        }
    }
}

pub struct ModelSampler {
    rng: ChaCha8Rng,
    band: RootBand,
    /// Probability of drawing a complex-conjugate root pair where two slots remain.
    pub complex_rate: f64,
}

const MIN_GAP: f64 = 0.02;
const MAX_COND: f64 = 50.0;

impl ModelSampler {
    pub fn new(seed: u64, band: RootBand) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), band, complex_rate: 0.3 }
    }

    /// Real parts of the roots, pairwise at least `MIN_GAP` apart, and the
    /// block-diagonal real form they generate.
    fn block_form(&mut self, n: usize) -> RMat {
        let mut b = RMat::zeros(n, n);
        let mut used: Vec<f64> = Vec::new();
        let mut k = 0;
        while k < n {
            let h = self.band.sample(&mut self.rng);
            if used.iter().any(|u| (u - h).abs() < MIN_GAP) {
                continue;
            }
            used.push(h);
            if k + 1 < n && self.rng.random_bool(self.complex_rate) {
                let w = self.rng.random_range(0.05..0.3);
                b[(k, k)] = h;
                b[(k + 1, k + 1)] = h;
                b[(k, k + 1)] = -w;
                b[(k + 1, k)] = w;
                k += 2;
            } else {
                b[(k, k)] = h;
                k += 1;
            }
        }
        b
    }

    fn basis(&mut self, n: usize) -> (RMat, RMat) {
        loop {
            let p = RMat::identity(n, n) + RMat::from_fn(n, n, |_, _| 0.4 * self.rng.random_range(-1.0..1.0));
            let sv = p.clone().singular_values();
            let (max, min) = (sv.max(), sv.min());
            if min > 0.0 && max / min < MAX_COND {
                let inv = p.clone().try_inverse().expect("well-conditioned basis");
                return (p, inv);
            }
        }
    }

    pub fn exponent(&mut self, n: usize) -> ExponentSpec {
        loop {
            let b = self.block_form(n);
            let (p, inv) = self.basis(n);
            if let Ok(e) = ExponentSpec::from_matrix(&p * b * inv) {
                return e;
            }
        }
    }

    pub fn matrix(&mut self, n: usize) -> RMat {
        RMat::from_fn(n, n, |_, _| self.rng.random_range(-1.0..1.0))
    }

    /// Exponent from the band and independent uniform `A₁`, `A₂`.
    pub fn model(&mut self, n: usize) -> OfbmModel {
        loop {
            let e = self.exponent(n);
            let a = SpectralParam::new(self.matrix(n), self.matrix(n));
            if let Ok(m) = OfbmModel::spectral(e, a) {
                return m;
            }
        }
    }

    /// Diagonal exponent and diagonal `A`.
    pub fn diagonal_model(&mut self, n: usize) -> OfbmModel {
        let h: Vec<f64> = (0..n).map(|_| self.band.sample(&mut self.rng)).collect();
        let a: Vec<f64> = (0..n).map(|_| self.rng.random_range(0.2..1.5)).collect();
        let e = ExponentSpec::from_matrix(RMat::from_diagonal(&nalgebra::DVector::from_vec(h))).expect("diagonal");
        let a1 = RMat::from_diagonal(&nalgebra::DVector::from_vec(a));
        OfbmModel::spectral(e, SpectralParam::real(a1)).expect("diagonal model")
    }

    pub fn dimension(&mut self, max: usize) -> usize {
        self.rng.random_range(1..=max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_stay_in_band() {
        let mut s = ModelSampler::new(7, RootBand::GENERAL);
        let mut complex = 0;
        for _ in 0..200 {
            let n = s.dimension(4);
            let m = s.model(n);
            for r in m.exponent().roots() {
                assert!(r.re > 0.05 && r.re < 0.95 && (r.re - 0.5).abs() > 0.01, "{r}");
                if r.im != 0.0 {
                    complex += 1;
                }
            }
            assert!(!m.exponent().half_root());
        }
        assert!(complex > 0);
    }

    #[test]
    fn lrd_band_and_determinism() {
        let mut a = ModelSampler::new(3, RootBand::LRD);
        let mut b = ModelSampler::new(3, RootBand::LRD);
        for _ in 0..20 {
            let (ma, mb) = (a.model(3), b.model(3));
            assert_eq!(ma.exponent().h(), mb.exponent().h());
            assert!(ma.exponent().roots().iter().all(|r| r.re > 0.55 && r.re < 0.95));
        }
        let d = a.diagonal_model(3);
        assert_eq!(d.gram_im().norm(), 0.0);
    }
}
