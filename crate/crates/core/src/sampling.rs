//! Seeded sampling of spectral parameters away from the poles of the model.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::om;
use crate::C64;

/// Default modulus range of sampled spectral parameters.
pub const DEFAULT_ANNULUS: (f64, f64) = (0.5, 2.0);

/// Default distance from any pole locus.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Smallest `|ω(·)|` over every factor that appears in a denominator (or a
/// guarded numerator) of the coefficient functions, for the given points.
///
/// Single points contribute `ω(x)`, `ω(x²)`, `ω(qx)`, `ω(qx²)`, `ω(q²x²)`;
/// pairs contribute `ω(xᵢ/xⱼ)`, `ω(xᵢxⱼ)`, `ω(qxᵢxⱼ)`, `ω(q²xᵢxⱼ)`.
pub fn min_guard(points: &[C64], q: C64) -> f64 {
    let mut g = f64::INFINITY;
    for (i, &x) in points.iter().enumerate() {
        let x2 = x * x;
        for v in [x, x2, q * x, q * x2, q * q * x2] {
            g = g.min(om(v).norm());
        }
        for &y in &points[i + 1..] {
            for v in [x / y, x * y, q * x * y, q * q * x * y] {
                g = g.min(om(v).norm());
            }
        }
    }
    g
}

/// Deterministic sampler over the annulus `lo ≤ |u| ≤ hi`: log-uniform
/// modulus, uniform argument.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
    margin: f64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self::with_annulus(seed, DEFAULT_ANNULUS.0, DEFAULT_ANNULUS.1)
    }

    pub fn with_annulus(seed: u64, lo: f64, hi: f64) -> Self {
        assert!(0.0 < lo && lo <= hi, "annulus must satisfy 0 < lo <= hi");
        Self { rng: ChaCha8Rng::seed_from_u64(seed), lo, hi, margin: DEFAULT_MARGIN }
    }

    pub fn margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn point(&mut self) -> C64 {
        let r = if self.lo == self.hi {
            self.lo
        } else {
            self.rng.random_range(self.lo.ln()..self.hi.ln()).exp()
        };
        let theta = self.rng.random_range(0.0..core::f64::consts::TAU);
        C64::from_polar(r, theta)
    }

    pub fn real(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// `count` points that are jointly regular with each other and with
    /// `fixed`, by rejection.
    pub fn regular_points(&mut self, count: usize, fixed: &[C64], q: C64) -> Vec<C64> {
        loop {
            let mut pts: Vec<C64> = fixed.to_vec();
            pts.extend((0..count).map(|_| self.point()));
            if min_guard(&pts, q) > self.margin {
                return pts.split_off(fixed.len());
            }
        }
    }

    /// A point jointly regular with `fixed`.
    pub fn regular_point(&mut self, fixed: &[C64], q: C64) -> C64 {
        self.regular_points(1, fixed, q)[0]
    }
}
