//! Truncated Neumann (Born) series for the inhomogeneous problem.
//!
//! With `G` the homogeneous solution operator, the total field expands as
//! `u = Σₙ vₙ`, `v₀ = G f`, `vₙ₊₁ = G(−k² q vₙ)`. Every term reuses one
//! factorization of the `q = 0` operator.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};
use crate::helmholtz::{solve, Factorization, HelmholtzProblem};

/// Seed of the power-iteration start vector.
const CONTRACTION_SEED: u64 = 0x006e_6575_6d61_6e6e;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeumannConfig {
    /// Maximum number of series terms, `v₀` included.
    pub n_terms: usize,
    /// Stop once `‖vₙ‖ / ‖Σ v‖ ≤ tol`.
    pub tol: f64,
    /// Growth ratio that, held for two consecutive terms, flags divergence.
    pub divergence_factor: f64,
}

impl Default for NeumannConfig {
    fn default() -> Self {
        Self {
            n_terms: 3,
            tol: 1e-12,
            divergence_factor: 1.05,
        }
    }
}

impl NeumannConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms < 1 {
            return Err(Error::config("n_terms must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::config("tol must be >= 0"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::config("divergence_factor must be > 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NeumannStatus {
    Converged,
    Truncated,
    Diverging,
}

impl NeumannStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NeumannStatus::Converged => "converged",
            NeumannStatus::Truncated => "truncated",
            NeumannStatus::Diverging => "diverging",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeumannResult {
    pub partial_sum: ComplexField,
    pub term_norms: Vec<f64>,
    pub status: NeumannStatus,
    pub terms_used: usize,
}

fn check_homogeneous(fact: &Factorization, k: Option<f64>, grid: &crate::Grid2D) -> Result<()> {
    if !fact.is_homogeneous() {
        return Err(Error::config("factorization was not built with q = 0"));
    }
    if let Some(k) = k {
        if fact.k() != k {
            return Err(Error::config(format!(
                "factorization wavenumber {} does not match problem wavenumber {k}",
                fact.k()
            )));
        }
    }
    if fact.grid() != grid {
        return Err(Error::config(format!(
            "factorization grid {:?} does not match field grid {:?}",
            fact.grid().shape(),
            grid.shape()
        )));
    }
    Ok(())
}

/// Homogeneous-medium solve `g ↦ G g`.
pub fn apply_g(fact_homog: &Factorization, g: &ComplexField) -> Result<ComplexField> {
    check_homogeneous(fact_homog, None, g.grid())?;
    solve(fact_homog, g)
}

/// The map `v ↦ −k² q v` feeding the next series term.
fn scatter_source(k: f64, q: &RealField, v: &ComplexField) -> Result<ComplexField> {
    Ok(v.mul_real(q)?.scale(-k * k))
}

pub fn neumann_solve(p: &HelmholtzProblem, cfg: &NeumannConfig, fact_homog: &Factorization) -> Result<NeumannResult> {
    cfg.validate()?;
    check_homogeneous(fact_homog, Some(p.k), p.grid())?;

    let mut v = solve(fact_homog, &p.f)?;
    let mut sum = v.clone();
    let mut term_norms = Vec::with_capacity(cfg.n_terms);
    term_norms.push(v.l2_norm());
    let mut status = NeumannStatus::Truncated;
    let mut growth_streak = 0usize;

    while term_norms.len() < cfg.n_terms {
        v = solve(fact_homog, &scatter_source(p.k, &p.q, &v)?)?;
        sum = &sum + &v;
        let norm = v.l2_norm();
        let prev = term_norms[term_norms.len() - 1];
        term_norms.push(norm);

        if norm <= cfg.tol * sum.l2_norm() {
            status = NeumannStatus::Converged;
            break;
        }
        if norm >= cfg.divergence_factor * prev {
            growth_streak += 1;
            if growth_streak >= 2 {
                status = NeumannStatus::Diverging;
                break;
            }
        } else {
            growth_streak = 0;
        }
    }

    Ok(NeumannResult {
        partial_sum: sum,
        terms_used: term_norms.len(),
        term_norms,
        status,
    })
}

/// Power-iteration estimate of the spectral radius of `v ↦ −k² G(q v)`.
///
/// Returns the geometric mean of the growth ratios over the last half of
/// the iterations. A value below 1 predicts a convergent series.
pub fn estimate_contraction(k: f64, q: &RealField, fact_homog: &Factorization, iters: usize) -> Result<f64> {
    if iters < 5 {
        return Err(Error::config("estimate_contraction needs at least 5 iterations"));
    }
    check_homogeneous(fact_homog, Some(k), q.grid())?;
    if q.is_zero() {
        return Ok(0.0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(CONTRACTION_SEED);
    let start: Vec<Complex64> = (0..q.grid().len())
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let mut v = ComplexField::new(*q.grid(), start)?;
    v = v.scale(1.0 / v.l2_norm());

    let tail = iters - iters / 2;
    let mut log_growth = 0.0;
    for it in 0..iters {
        let w = solve(fact_homog, &scatter_source(k, q, &v)?)?;
        let norm = w.l2_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if it >= iters - tail {
            log_growth += libm::log(norm);
        }
        v = w.scale(1.0 / norm);
    }
    Ok(libm::exp(log_growth / tail as f64))
}
