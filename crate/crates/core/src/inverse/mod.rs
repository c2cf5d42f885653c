//! Inverse medium scattering from boundary measurements.
//!
//! A plane wave `uⁱ = exp(ik x·d)` illuminates the medium; the scattered
//! field solves `Δuˢ + k²(1+q)uˢ = −k² q uⁱ` with the absorbing boundary
//! condition, and sensors record `uˢ` on every boundary node. The contrast
//! `q` is recovered by L-BFGS on the data misfit, with gradients from one
//! adjoint solve per direction.

pub mod lbfgs;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{trace_adjoint, ComplexField, Grid2D, RealField};
use crate::helmholtz::{assemble, factorize, field_hash, solve, Factorization};

pub use lbfgs::{LbfgsOptions, LbfgsOutcome, LbfgsStatus};

/// Tolerance on `|d| − 1` before a direction is renormalized.
const UNIT_TOL: f64 = 1e-12;

/// Plane wave `exp(ik x·d)` on `grid`. A direction that is not unit length
/// is normalized; the flag reports whether that happened.
pub fn plane_wave(k: f64, d: (f64, f64), grid: &Grid2D) -> Result<(ComplexField, bool)> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain(format!("wavenumber must be positive, got {k}")));
    }
    let len = libm::hypot(d.0, d.1);
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::domain("plane-wave direction must be a nonzero finite vector"));
    }
    let renormalized = libm::fabs(len - 1.0) > UNIT_TOL;
    let (dx, dy) = if renormalized { (d.0 / len, d.1 / len) } else { d };
    let field = ComplexField::from_fn(*grid, |x, y| {
        let phase = k * (x * dx + y * dy);
        Complex64::new(libm::cos(phase), libm::sin(phase))
    })?;
    Ok((field, renormalized))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidentSet {
    k: f64,
    directions: Vec<(f64, f64)>,
}

impl IncidentSet {
    /// `m` directions at angles `2πj/m`.
    pub fn uniform(k: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("need at least one incident direction"));
        }
        let directions = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                (libm::cos(t), libm::sin(t))
            })
            .collect();
        Self::new(k, directions)
    }

    pub fn new(k: f64, directions: Vec<(f64, f64)>) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::domain(format!("wavenumber must be positive, got {k}")));
        }
        if directions.is_empty() {
            return Err(Error::config("need at least one incident direction"));
        }
        for &(x, y) in &directions {
            if libm::fabs(libm::hypot(x, y) - 1.0) > UNIT_TOL {
                return Err(Error::domain("incident directions must be unit vectors"));
            }
        }
        Ok(Self { k, directions })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[(f64, f64)] {
        &self.directions
    }

    pub fn incident_field(&self, m: usize, grid: &Grid2D) -> Result<ComplexField> {
        plane_wave(self.k, self.directions[m], grid).map(|(f, _)| f)
    }
}

/// Boundary traces of the scattered field, one per incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub grid: Grid2D,
    pub traces: Vec<Vec<Complex64>>,
    /// Refinement factor of the grid the data were computed on.
    pub grid_factor: usize,
    pub noise_std: f64,
}

impl Measurement {
    pub fn validate(&self, inc: &IncidentSet) -> Result<()> {
        if self.traces.len() != inc.len() {
            return Err(Error::LengthMismatch {
                expected: inc.len(),
                found: self.traces.len(),
            });
        }
        let n = self.grid.boundary_len();
        for t in &self.traces {
            if t.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: t.len(),
                });
            }
            if let Some(index) = t.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite {
                    what: "measurement",
                    index,
                });
            }
        }
        Ok(())
    }

    /// `Σₘ ‖dₘ‖²`.
    pub fn energy(&self) -> f64 {
        self.traces.iter().flatten().map(|z| z.norm_sqr()).sum()
    }
}

/// Holds the factorization for the most recent `(k, grid, q)` and counts
/// how many factorizations were computed.
#[derive(Debug, Default)]
pub struct FactorizationCache {
    entry: Option<Factorization>,
    factorizations: usize,
}

impl FactorizationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn get(&mut self, k: f64, q: &RealField) -> Result<&Factorization> {
        let hash = field_hash(q);
        let hit = matches!(&self.entry,
            Some(f) if f.k() == k && f.grid() == q.grid() && f.q_hash() == hash);
        if !hit {
            self.entry = Some(factorize(&assemble(k, q)?)?);
            self.factorizations += 1;
        }
        Ok(self.entry.as_ref().expect("entry just filled"))
    }
}

fn per_direction<T>(m: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Direction {
        direction: m,
        source: alloc::boxed::Box::new(e),
    })
}

/// Incident fields and scattered fields for every direction.
fn scattered_fields(
    q: &RealField,
    inc: &IncidentSet,
    cache: &mut FactorizationCache,
) -> Result<Vec<(ComplexField, ComplexField)>> {
    let k = inc.k();
    let fact = cache.get(k, q)?;
    (0..inc.len())
        .map(|m| {
            per_direction(
                m,
                (|| {
                    let ui = inc.incident_field(m, q.grid())?;
                    let rhs = ui.mul_real(q)?.scale(-k * k);
                    let us = solve(fact, &rhs)?;
                    Ok((ui, us))
                })(),
            )
        })
        .collect()
}

/// Boundary traces of the scattered fields for contrast `q`. The
/// `q`-dependent matrix is factorized once and shared by all directions.
pub fn forward_map(q: &RealField, inc: &IncidentSet, cache: &mut FactorizationCache) -> Result<Measurement> {
    let traces = scattered_fields(q, inc, cache)?
        .into_iter()
        .map(|(_, us)| us.boundary_trace())
        .collect();
    Ok(Measurement {
        grid: *q.grid(),
        traces,
        grid_factor: 1,
        noise_std: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    /// Standard deviation of each real component.
    pub std: f64,
    pub seed: u64,
}

/// Data for `q_true` computed on a `factor`-times refined grid and sampled
/// back at the coarse boundary nodes, plus optional Gaussian noise.
pub fn synthesize_data(
    q_true: &RealField,
    inc: &IncidentSet,
    factor: usize,
    noise: Option<Noise>,
) -> Result<Measurement> {
    if factor == 0 {
        return Err(Error::config("data grid factor must be >= 1"));
    }
    let coarse = *q_true.grid();
    let q_fine = q_true.prolong(factor)?;
    let mut cache = FactorizationCache::new();
    let traces = scattered_fields(&q_fine, inc, &mut cache)?
        .into_iter()
        .map(|(_, us)| Ok(us.restrict(factor)?.boundary_trace()))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Measurement {
        grid: coarse,
        traces,
        grid_factor: factor,
        noise_std: 0.0,
    };
    if let Some(Noise { std, seed }) = noise {
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::config("noise std must be >= 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in data.traces.iter_mut().flatten() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(std * re, std * im);
        }
        data.noise_std = std;
    }
    Ok(data)
}

/// Misfit `J = Σₘ ½‖T uˢₘ − dₘ‖²` and its gradient with respect to the nodal
/// values of `q`. Entries outside `mask` (when given) are zeroed.
pub fn misfit_and_gradient(
    q: &RealField,
    inc: &IncidentSet,
    data: &Measurement,
    cache: &mut FactorizationCache,
    mask: Option<&[bool]>,
) -> Result<(f64, RealField)> {
    let grid = *q.grid();
    grid.ensure_same(&data.grid)?;
    data.validate(inc)?;
    if let Some(mask) = mask {
        if mask.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: mask.len(),
            });
        }
    }
    let k2 = inc.k() * inc.k();
    let fields = scattered_fields(q, inc, cache)?;
    let fact = cache.get(inc.k(), q)?;
    let scale = fact.system().row_scale();

    let mut j = 0.0;
    let mut grad = vec![0.0; grid.len()];
    for (m, (ui, us)) in fields.iter().enumerate() {
        let residual: Vec<Complex64> = us
            .boundary_trace()
            .iter()
            .zip(&data.traces[m])
            .map(|(a, b)| a - b)
            .collect();
        j += 0.5 * residual.iter().map(|r| r.norm_sqr()).sum::<f64>();
        let conj: Vec<Complex64> = residual.iter().map(|r| r.conj()).collect();
        let lambda = per_direction(m, fact.solve_vector(&trace_adjoint(&grid, &conj)?))?;
        for (p, g) in grad.iter_mut().enumerate() {
            let total = us.values()[p] + ui.values()[p];
            *g -= k2 * scale[p] * (lambda[p] * total).re;
        }
    }
    if let Some(mask) = mask {
        grad.iter_mut()
            .zip(mask)
            .filter(|(_, &keep)| !keep)
            .for_each(|(g, _)| *g = 0.0);
    }
    Ok((j, RealField::new(grid, grad)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseConfig {
    /// Reconstruction grid.
    pub grid: Grid2D,
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub data_grid_factor: usize,
    pub noise_std: Option<f64>,
    pub noise_seed: u64,
    /// Nodes where `q` may be nonzero; `None` means everywhere.
    pub support_mask: Option<Vec<bool>>,
}

impl InverseConfig {
    pub fn new(grid: Grid2D) -> Self {
        Self {
            grid,
            max_iters: 200,
            memory: 10,
            grad_tol: 1e-12,
            data_grid_factor: 2,
            noise_std: None,
            noise_seed: 0,
            support_mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 || self.memory < 1 || self.data_grid_factor < 1 {
            return Err(Error::config("max_iters, memory and data_grid_factor must be >= 1"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::config("grad_tol must be >= 0"));
        }
        if let Some(mask) = &self.support_mask {
            if mask.len() != self.grid.len() {
                return Err(Error::LengthMismatch {
                    expected: self.grid.len(),
                    found: mask.len(),
                });
            }
        }
        Ok(())
    }

    pub fn noise(&self) -> Option<Noise> {
        self.noise_std.map(|std| Noise {
            std,
            seed: self.noise_seed,
        })
    }

    fn lbfgs_options(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iters: self.max_iters,
            memory: self.memory,
            grad_tol: self.grad_tol,
            ..LbfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct InversionReport {
    pub q_est: RealField,
    /// `J` at `q₀ = 0` and after every accepted step.
    pub objective_history: Vec<f64>,
    pub gradient_norm_history: Vec<f64>,
    pub iterations_used: usize,
    pub evaluations: usize,
    pub factorizations: usize,
    pub status: LbfgsStatus,
    /// Seconds; zero without the `std` feature.
    pub wall_time: f64,
}

/// Reconstructs `q` from `data`, starting from `q = 0`.
pub fn lbfgs_invert(cfg: &InverseConfig, inc: &IncidentSet, data: &Measurement) -> Result<InversionReport> {
    cfg.validate()?;
    cfg.grid.ensure_same(&data.grid)?;
    data.validate(inc)?;
    #[cfg(feature = "std")]
    let start = std::time::Instant::now();

    let grid = cfg.grid;
    let mask = cfg.support_mask.as_deref();
    let mut cache = FactorizationCache::new();
    let outcome = lbfgs::minimize(vec![0.0; grid.len()], &cfg.lbfgs_options(), |x| {
        let q = RealField::new(grid, x.to_vec())?;
        let (j, g) = misfit_and_gradient(&q, inc, data, &mut cache, mask)?;
        Ok((j, g.into_values()))
    })?;

    #[cfg(feature = "std")]
    let wall_time = start.elapsed().as_secs_f64();
    #[cfg(not(feature = "std"))]
    let wall_time = 0.0;

    Ok(InversionReport {
        q_est: RealField::new(grid, outcome.x)?,
        objective_history: outcome.f_history,
        gradient_norm_history: outcome.grad_norm_history,
        iterations_used: outcome.iterations,
        evaluations: outcome.evaluations,
        factorizations: cache.factorizations(),
        status: outcome.status,
        wall_time,
    })
}
