#![allow(dead_code)]

use helmholtz_core::{ComplexField, Grid2D, RealField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(g: Grid2D, seed: u64) -> ComplexField {
    let mut r = rng(seed);
    ComplexField::from_fn(g, |_, _| {
        Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal))
    })
    .unwrap()
}

pub fn random_real(g: Grid2D, seed: u64) -> RealField {
    let mut r = rng(seed);
    RealField::from_fn(g, |_, _| r.sample(StandardNormal)).unwrap()
}

/// Bump of height `amp` centered at `(cx, cy)` with radius `r`.
pub fn bump(g: Grid2D, amp: f64, cx: f64, cy: f64, r: f64) -> RealField {
    RealField::from_fn(g, |x, y| {
        let s = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
        if s < 1.0 {
            amp * (1.0 - 1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    })
    .unwrap()
}

pub fn gaussian_source(g: Grid2D, cx: f64, cy: f64, rate: f64) -> ComplexField {
    ComplexField::from_fn(g, |x, y| {
        Complex64::new((-rate * ((x - cx).powi(2) + (y - cy).powi(2))).exp(), 0.0)
    })
    .unwrap()
}

pub fn vec_rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
