//! Random scatterers `q` and sources `f` for training data and experiments.
//!
//! Every sampler is a pure function of its seed, parameters and grid. The
//! random stream is ChaCha8; dataset generation derives one seed per record
//! and role with [`derive_seed`], so records can be produced in any order.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid2D, RealField};

/// Lower/upper edge of the box holding T-shaped supports.
pub const T_LO: f64 = 0.05;
pub const T_HI: f64 = 0.95;

const DEGENERATE: f64 = 1e-12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent 64-bit seed for record `index`, role `lane` of a dataset
/// generated from `master`. Each record reads its own ChaCha stream.
pub fn derive_seed(master: u64, index: u64, lane: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(index);
    r.set_word_pos(u128::from(lane) * 2);
    r.random()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScattererKind {
    TShape,
    Circles,
    SmoothedCircles,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScattererSpec {
    pub kind: ScattererKind,
    /// Target `‖q‖∞`.
    pub amplitude: f64,
}

impl ScattererSpec {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude.is_finite() && self.amplitude > 0.0 {
            Ok(())
        } else {
            Err(Error::config("scatterer amplitude must be positive"))
        }
    }

    pub fn sample(&self, seed: u64, grid: &Grid2D) -> Result<RealField> {
        self.validate()?;
        match self.kind {
            ScattererKind::TShape => sample_q_tshape(seed, self.amplitude, grid),
            ScattererKind::Circles => sample_q_circles(seed, self.amplitude, false, grid).map(|s| s.field),
            ScattererKind::SmoothedCircles => sample_q_circles(seed, self.amplitude, true, grid).map(|s| s.field),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SourceSpec {
    /// Nine Gaussians with decay rates drawn from `[r, 2r]`.
    GaussianR {
        r: f64,
    },
    Grf,
    Waves,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::GaussianR { r } if !(r.is_finite() && r > 0.0) => {
                Err(Error::config("gaussian decay base R must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, seed: u64, grid: &Grid2D) -> Result<ComplexField> {
        self.validate()?;
        match *self {
            SourceSpec::GaussianR { r } => sample_f_gaussian(seed, r, grid),
            SourceSpec::Grf => sample_f_grf(seed, grid),
            SourceSpec::Waves => sample_f_waves(seed, grid),
        }
    }
}

/// T-shaped support `[x₂,x₃]×[y₁,y₂] ∪ [x₁,x₄]×[y₂,y₃]`, turned by
/// `quarter_turns` counter-clockwise quarter rotations about the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TShape {
    pub xs: [f64; 4],
    pub ys: [f64; 3],
    pub quarter_turns: u8,
}

impl TShape {
    pub fn draw(rng: &mut impl Rng) -> Self {
        let mut xs = [0.0; 4];
        let mut ys = [0.0; 3];
        xs.iter_mut().for_each(|x| *x = rng.random_range(T_LO..T_HI));
        ys.iter_mut().for_each(|y| *y = rng.random_range(T_LO..T_HI));
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let quarter_turns = rng.random_range(0..4u8);
        Self { xs, ys, quarter_turns }
    }

    /// Membership in the unrotated T.
    pub fn contains_unrotated(&self, x: f64, y: f64) -> bool {
        let [x1, x2, x3, x4] = self.xs;
        let [y1, y2, y3] = self.ys;
        (x2 <= x && x <= x3 && y1 <= y && y <= y2) || (x1 <= x && x <= x4 && y2 <= y && y <= y3)
    }

    pub fn contains(&self, mut x: f64, mut y: f64) -> bool {
        // undo each counter-clockwise turn: (x, y) -> (y, 1 - x)
        for _ in 0..self.quarter_turns {
            (x, y) = (y, 1.0 - x);
        }
        self.contains_unrotated(x, y)
    }
}

pub fn sample_q_tshape(seed: u64, amplitude: f64, grid: &Grid2D) -> Result<RealField> {
    ScattererSpec {
        kind: ScattererKind::TShape,
        amplitude,
    }
    .validate()?;
    let mut rng = rng(seed);
    loop {
        let t = TShape::draw(&mut rng);
        let q = RealField::from_fn(*grid, |x, y| if t.contains(x, y) { amplitude } else { 0.0 })?;
        // a sliver thinner than the grid spacing can miss every node
        if !q.is_zero() {
            return Ok(q);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub mu: f64,
}

impl Circle {
    /// Contribution at `(x, y)`: `μ` on the closed disk, or `μ` times the
    /// bump `exp(−1/(1 − ρ²/r²))` when smoothed.
    pub fn value(&self, x: f64, y: f64, smoothed: bool) -> f64 {
        let rho2 = ((x - self.x) * (x - self.x) + (y - self.y) * (y - self.y)) / (self.r * self.r);
        if smoothed {
            if rho2 < 1.0 {
                self.mu * libm::exp(-1.0 / (1.0 - rho2))
            } else {
                0.0
            }
        } else if rho2 <= 1.0 {
            self.mu
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleSample {
    pub field: RealField,
    pub circles: Vec<Circle>,
    /// Seed that produced the field; differs from the requested seed only
    /// when earlier draws were degenerate.
    pub seed_used: u64,
}

/// Sum of circle terms rescaled so that `‖q‖∞ = amplitude` on `grid`.
/// Fails with [`Error::DegenerateReference`] if the raw sum vanishes on the grid.
pub fn circles_field(circles: &[Circle], smoothed: bool, amplitude: f64, grid: &Grid2D) -> Result<RealField> {
    let raw = RealField::from_fn(*grid, |x, y| circles.iter().map(|c| c.value(x, y, smoothed)).sum())?;
    let peak = raw.max_abs();
    if peak < DEGENERATE {
        return Err(Error::DegenerateReference);
    }
    Ok(raw.scale(amplitude / peak))
}

pub fn draw_circles(rng: &mut impl Rng) -> Vec<Circle> {
    let count = rng.random_range(1..=3usize);
    (0..count)
        .map(|_| Circle {
            x: rng.random_range(0.2..0.8),
            y: rng.random_range(0.2..0.8),
            r: rng.random_range(0.05..0.2),
            mu: rng.random_range(-1.0..1.0),
        })
        .collect()
}

pub fn sample_q_circles(seed: u64, amplitude: f64, smoothed: bool, grid: &Grid2D) -> Result<CircleSample> {
    ScattererSpec {
        kind: ScattererKind::Circles,
        amplitude,
    }
    .validate()?;
    let mut seed_used = seed;
    loop {
        let circles = draw_circles(&mut rng(seed_used));
        match circles_field(&circles, smoothed, amplitude, grid) {
            Ok(field) => {
                return Ok(CircleSample {
                    field,
                    circles,
                    seed_used,
                })
            }
            Err(Error::DegenerateReference) => seed_used = seed_used.wrapping_add(1),
            Err(e) => return Err(e),
        }
    }
}

fn sup_normalized(raw: RealField) -> Result<ComplexField> {
    let peak = raw.max_abs();
    if peak == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(raw.scale(1.0 / peak).to_complex())
}

/// Centers of the nine Gaussians, `((3i−1)/10, (3j−1)/10)` for `i, j = 1..3`.
pub fn gaussian_centers() -> [(f64, f64); 9] {
    let mut out = [(0.0, 0.0); 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = ((3 * i + 2) as f64 / 10.0, (3 * j + 2) as f64 / 10.0);
        }
    }
    out
}

pub fn sample_f_gaussian(seed: u64, r: f64, grid: &Grid2D) -> Result<ComplexField> {
    SourceSpec::GaussianR { r }.validate()?;
    let mut rng = rng(seed);
    let terms: Vec<((f64, f64), f64)> = gaussian_centers()
        .into_iter()
        .map(|c| (c, rng.random_range(r..2.0 * r)))
        .collect();
    let raw = RealField::from_fn(*grid, |x, y| {
        terms
            .iter()
            .map(|&((cx, cy), rho)| libm::exp(-rho * ((x - cx) * (x - cx) + (y - cy) * (y - cy))))
            .sum()
    })?;
    sup_normalized(raw)
}

/// Cosine-series sample of the Gaussian random field with covariance
/// `(−Δ + 9)⁻²` under zero Neumann conditions on `[0,1]²`:
/// `f = Σ a_mn σ_mn cos(mπx) cos(nπy)` with `a_mn ~ N(0,1)` and
/// `σ_mn = ν_mn / (π²(m²+n²) + 9)`, `ν` the orthonormalization weight.
///
/// Coefficients are drawn shell by shell in `max(m, n)`, so a series with a
/// smaller truncation is a prefix of a larger one from the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfSeries {
    m_max: usize,
    coeffs: Vec<f64>,
}

impl GrfSeries {
    pub fn draw(seed: u64, m_max: usize) -> Self {
        let side = m_max + 1;
        let mut coeffs = vec![0.0; side * side];
        let mut rng = rng(seed);
        for s in 0..=m_max {
            let shell = (0..=s).map(|n| (s, n)).chain((0..s).map(|m| (m, s)));
            for (m, n) in shell {
                let a: f64 = rng.sample(StandardNormal);
                coeffs[m * side + n] = a * grf_std(m, n);
            }
        }
        Self { m_max, coeffs }
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Coefficient of `cos(mπx) cos(nπy)`.
    pub fn coefficient(&self, m: usize, n: usize) -> f64 {
        self.coeffs[m * (self.m_max + 1) + n]
    }

    pub fn evaluate(&self, grid: &Grid2D) -> Result<RealField> {
        let side = self.m_max + 1;
        let (nx, ny) = grid.shape();
        let basis = |count: usize, h: f64| -> Vec<f64> {
            let mut b = Vec::with_capacity(side * count);
            for m in 0..side {
                for i in 0..count {
                    b.push(libm::cos(m as f64 * PI * i as f64 * h));
                }
            }
            b
        };
        let cx = basis(nx, grid.hx());
        let cy = basis(ny, grid.hy());
        // partial[m][j] = Σ_n c_mn cos(nπ y_j)
        let mut partial = vec![0.0; side * ny];
        for m in 0..side {
            for n in 0..side {
                let c = self.coeffs[m * side + n];
                let row = &cy[n * ny..(n + 1) * ny];
                partial[m * ny..(m + 1) * ny]
                    .iter_mut()
                    .zip(row)
                    .for_each(|(p, &b)| *p += c * b);
            }
        }
        let mut values = vec![0.0; nx * ny];
        for m in 0..side {
            let bx = &cx[m * nx..(m + 1) * nx];
            for j in 0..ny {
                let pj = partial[m * ny + j];
                values[j * nx..(j + 1) * nx]
                    .iter_mut()
                    .zip(bx)
                    .for_each(|(v, &b)| *v += pj * b);
            }
        }
        RealField::new(*grid, values)
    }
}

/// Standard deviation of the `(m, n)` cosine coefficient.
pub fn grf_std(m: usize, n: usize) -> f64 {
    let nu = match (m, n) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => core::f64::consts::SQRT_2,
        _ => 2.0,
    };
    nu / (PI * PI * (m * m + n * n) as f64 + 9.0)
}

/// GRF truncation used on `grid`: every mode the grid can represent.
pub fn grf_truncation(grid: &Grid2D) -> usize {
    grid.nx().min(grid.ny()) - 1
}

/// The GRF sample before sup-normalization.
pub fn grf_raw(seed: u64, grid: &Grid2D) -> Result<RealField> {
    GrfSeries::draw(seed, grf_truncation(grid)).evaluate(grid)
}

pub fn sample_f_grf(seed: u64, grid: &Grid2D) -> Result<ComplexField> {
    sup_normalized(grf_raw(seed, grid)?)
}

/// The six plane waves `(1/μᵢ) cos(πμᵢ(x cos θᵢ + y sin θᵢ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSet {
    pub mu: [f64; 6],
    pub theta: [f64; 6],
}

impl WaveSet {
    pub fn draw(rng: &mut impl Rng) -> Self {
        let mut mu = [0.0; 6];
        let mut theta = [0.0; 6];
        for i in 0..6 {
            let lo = (1u32 << i) as f64;
            mu[i] = rng.random_range(lo..1.5 * lo);
            theta[i] = rng.random_range(0.0..2.0 * PI);
        }
        Self { mu, theta }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.mu
            .iter()
            .zip(&self.theta)
            .map(|(&m, &t)| libm::cos(PI * m * (x * libm::cos(t) + y * libm::sin(t))) / m)
            .sum()
    }
}

pub fn sample_f_waves(seed: u64, grid: &Grid2D) -> Result<ComplexField> {
    let waves = WaveSet::draw(&mut rng(seed));
    sup_normalized(RealField::from_fn(*grid, |x, y| waves.value(x, y))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::square(n).unwrap()
    }

    #[test]
    fn derived_seeds_differ_by_record_and_lane() {
        let a = derive_seed(7, 0, 0);
        assert_ne!(a, derive_seed(7, 1, 0));
        assert_ne!(a, derive_seed(7, 0, 1));
        assert_ne!(a, derive_seed(8, 0, 0));
        assert_eq!(a, derive_seed(7, 0, 0));
    }

    #[test]
    fn tshape_values_and_support() {
        let g = grid(64);
        for seed in 0..40 {
            let q = sample_q_tshape(seed, 0.1, &g).unwrap();
            assert!(q.values().iter().all(|&v| v == 0.0 || v == 0.1));
            assert!(!q.is_zero());
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let (x, y) = g.coords(i, j);
                    if q.at(i, j) != 0.0 {
                        assert!((T_LO..=T_HI).contains(&x) && (T_LO..=T_HI).contains(&y));
                    }
                }
            }
        }
    }

    #[test]
    fn tshape_unrotated_matches_set_formula() {
        let g = grid(50);
        let mut found = false;
        for seed in 0..64 {
            let t = TShape::draw(&mut rng(seed));
            if t.quarter_turns != 0 {
                continue;
            }
            found = true;
            let q = sample_q_tshape(seed, 0.3, &g).unwrap();
            let [x1, x2, x3, x4] = t.xs;
            let [y1, y2, y3] = t.ys;
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let (x, y) = g.coords(i, j);
                    let stem = x >= x2 && x <= x3 && y >= y1 && y <= y2;
                    let bar = x >= x1 && x <= x4 && y >= y2 && y <= y3;
                    assert_eq!(q.at(i, j) == 0.3, stem || bar);
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn tshape_rotation_maps_shape_onto_itself() {
        let t = TShape {
            xs: [0.1, 0.3, 0.4, 0.8],
            ys: [0.2, 0.5, 0.6],
            quarter_turns: 1,
        };
        // (0.35, 0.3) is in the stem; a CCW turn sends it to (0.7, 0.35)
        assert!(t.contains_unrotated(0.35, 0.3));
        assert!(t.contains(0.7, 0.35));
        assert!(!t.contains(0.35, 0.3));
    }

    #[test]
    fn circles_are_normalized_and_bumps_vanish_on_rims() {
        let g = grid(65);
        for seed in 0..20 {
            let sharp = sample_q_circles(seed, 0.1, false, &g).unwrap();
            assert!((sharp.field.max_abs() - 0.1).abs() < 1e-12);
            let smooth = sample_q_circles(seed, 0.1, true, &g).unwrap();
            assert!((smooth.field.max_abs() - 0.1).abs() < 1e-12);
            assert_eq!(sharp.circles, smooth.circles);
            for c in &smooth.circles {
                assert!((1..=3).contains(&smooth.circles.len()));
                for step in 0..32 {
                    let a = step as f64 * PI / 16.0;
                    let (x, y) = (c.x + c.r * libm::cos(a), c.y + c.r * libm::sin(a));
                    assert!(c.value(x, y, true).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_sharp_circle_area() {
        let g = grid(129);
        let h = g.hx();
        let mut checked = 0;
        for seed in 0..200 {
            let s = sample_q_circles(seed, 0.1, false, &g).unwrap();
            if s.circles.len() != 1 {
                continue;
            }
            let cells = s.field.values().iter().filter(|&&v| v != 0.0).count();
            let area = cells as f64 * g.cell_area();
            let r = s.circles[0].r;
            assert!((area - PI * r * r).abs() <= 2.0 * h, "seed {seed}");
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn degenerate_circles_are_rejected() {
        let c = [Circle {
            x: 0.5,
            y: 0.5,
            r: 0.1,
            mu: 0.0,
        }];
        assert_eq!(
            circles_field(&c, false, 0.1, &grid(17)),
            Err(Error::DegenerateReference)
        );
    }

    #[test]
    fn gaussian_source_properties() {
        let g = grid(65);
        let centers = gaussian_centers();
        assert_eq!(centers[0], (0.2, 0.2));
        assert_eq!(centers[4], (0.5, 0.5));
        assert_eq!(centers[8], (0.8, 0.8));
        let f = sample_f_gaussian(3, 30.0, &g).unwrap();
        assert!(f.values().iter().all(|v| v.re > 0.0 && v.im == 0.0));
        assert!((f.max_abs() - 1.0).abs() < 1e-12);
        assert!(sample_f_gaussian(3, 0.0, &g).is_err());
    }

    #[test]
    fn larger_decay_rate_is_more_compact() {
        let g = grid(65);
        let frac = |r: f64| -> f64 {
            (0..50)
                .map(|seed| {
                    let f = sample_f_gaussian(seed, r, &g).unwrap();
                    f.values().iter().filter(|v| v.re > 0.1).count() as f64 / g.len() as f64
                })
                .sum::<f64>()
                / 50.0
        };
        let (a, b, c) = (frac(10.0), frac(30.0), frac(50.0));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn waves_bounds() {
        let g = grid(129);
        for seed in 0..10 {
            let w = WaveSet::draw(&mut rng(seed));
            for (i, &m) in w.mu.iter().enumerate() {
                let lo = (1u32 << i) as f64;
                assert!(m >= lo && m < 1.5 * lo);
            }
            let bound: f64 = w.mu.iter().map(|m| 1.0 / m).sum();
            assert!(bound < 2.0);
            let raw = RealField::from_fn(g, |x, y| w.value(x, y)).unwrap();
            assert!(raw.max_abs() <= bound);
            let f = sample_f_waves(seed, &g).unwrap();
            assert!((f.max_abs() - 1.0).abs() < 1e-12);
            assert!(f.values().iter().any(|v| (v.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn grf_prefix_property() {
        let big = GrfSeries::draw(11, 16);
        let small = GrfSeries::draw(11, 8);
        for m in 0..=8 {
            for n in 0..=8 {
                assert_eq!(big.coefficient(m, n), small.coefficient(m, n));
            }
        }
    }

    #[test]
    fn grf_evaluation_matches_direct_sum() {
        let g = Grid2D::new(9, 7).unwrap();
        let s = GrfSeries::draw(5, 6);
        let f = s.evaluate(&g).unwrap();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let (x, y) = g.coords(i, j);
                let mut direct = 0.0;
                for m in 0..=6 {
                    for n in 0..=6 {
                        direct += s.coefficient(m, n) * (m as f64 * PI * x).cos() * (n as f64 * PI * y).cos();
                    }
                }
                assert!((f.at(i, j) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let g = grid(33);
        assert_eq!(
            sample_q_tshape(9, 0.1, &g).unwrap(),
            sample_q_tshape(9, 0.1, &g).unwrap()
        );
        assert_eq!(sample_f_grf(9, &g).unwrap(), sample_f_grf(9, &g).unwrap());
        assert_eq!(sample_f_waves(9, &g).unwrap(), sample_f_waves(9, &g).unwrap());
        assert_ne!(sample_f_grf(9, &g).unwrap(), sample_f_grf(10, &g).unwrap());
    }
}
