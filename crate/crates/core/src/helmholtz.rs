//! Finite-difference discretization of `Δu + k²(1+q)u = f` on the unit
//! square with the first-order absorbing condition `∂u/∂n − iku = 0`.
//!
//! Interior rows carry the five-point stencil. On boundary nodes the ghost
//! value outside the domain is eliminated through the centered boundary
//! condition, `u_ghost = u_inner + 2h·ik·u_boundary`, once per outward normal
//! (twice at corners). Every row is then multiplied by `hx·hy·w`, where the
//! row weight `w` is 1 in the interior, 1/2 on edges and 1/4 at corners. The
//! weights make the matrix complex-symmetric (`A = Aᵀ`); the right-hand side
//! is scaled by the same per-row factor, see [`SystemMatrix::row_scale`].

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid2D, RealField};
use crate::ldl::{nested_dissection, LdlFactor};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzProblem {
    pub k: f64,
    pub q: RealField,
    pub f: ComplexField,
}

impl HelmholtzProblem {
    pub fn new(k: f64, q: RealField, f: ComplexField) -> Result<Self> {
        check_wavenumber(k)?;
        q.grid().ensure_same(f.grid())?;
        Ok(Self { k, q, f })
    }

    pub fn grid(&self) -> &Grid2D {
        self.q.grid()
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrix {
    grid: Grid2D,
    k: f64,
    q_hash: u64,
    homogeneous: bool,
    matrix: CsrMatrix,
    row_scale: Vec<f64>,
}

impl SystemMatrix {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn q_hash(&self) -> u64 {
        self.q_hash
    }

    /// True when assembled with `q ≡ 0`.
    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Per-row factor `hx·hy·w` applied to the PDE rows.
    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    /// The right-hand side vector `row_scale ⊙ f` matching this matrix.
    pub fn rhs_vector(&self, f: &ComplexField) -> Result<Vec<Complex64>> {
        self.grid.ensure_same(f.grid())?;
        Ok(f.values().iter().zip(&self.row_scale).map(|(&v, &s)| v * s).collect())
    }

    pub fn apply(&self, u: &ComplexField) -> Result<Vec<Complex64>> {
        self.grid.ensure_same(u.grid())?;
        Ok(self.matrix.matvec(u.values()))
    }

    /// `‖A·u − s⊙f‖₂ / ‖s⊙f‖₂` in the plain Euclidean vector norm.
    pub fn relative_residual(&self, u: &ComplexField, f: &ComplexField) -> Result<f64> {
        let b = self.rhs_vector(f)?;
        let au = self.apply(u)?;
        let r: Vec<Complex64> = au.iter().zip(&b).map(|(a, b)| a - b).collect();
        Ok(crate::ldl::norm2(&r) / crate::ldl::norm2(&b))
    }
}

fn check_wavenumber(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("wavenumber must be positive, got {k}")))
    }
}

/// FNV-1a over the bit patterns of `q`.
pub fn field_hash(q: &RealField) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in q.values() {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Row weight of node `(i, j)`: 1 inside, 1/2 on edges, 1/4 at corners.
pub fn row_weight(grid: &Grid2D, i: usize, j: usize) -> f64 {
    let ex = i == 0 || i == grid.nx() - 1;
    let ey = j == 0 || j == grid.ny() - 1;
    match (ex, ey) {
        (false, false) => 1.0,
        (true, true) => 0.25,
        _ => 0.5,
    }
}

pub fn assemble(k: f64, q: &RealField) -> Result<SystemMatrix> {
    check_wavenumber(k)?;
    if let Some(index) = q.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "q", index });
    }
    let grid = *q.grid();
    let (nx, ny) = grid.shape();
    let (hx, hy) = (grid.hx(), grid.hy());
    let (ax, ay) = (hy / hx, hx / hy);
    let ik = Complex64::new(0.0, k);
    let area = hx * hy;

    let mut row_scale = Vec::with_capacity(grid.len());
    let mut rows = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let p = grid.index(i, j);
            let w = row_weight(&grid, i, j);
            row_scale.push(w * area);

            let mut diag = Complex64::new(w * area * k * k * (1.0 + q.values()[p]), 0.0);
            let mut entries: [(usize, f64); 4] = [(usize::MAX, 0.0); 4];
            let mut push = |slot: usize, idx: usize, coef: f64| entries[slot] = (idx, coef);

            // x direction
            diag -= 2.0 * w * ax;
            if i == 0 || i == nx - 1 {
                let inner = if i == 0 { 1 } else { nx - 2 };
                push(0, grid.index(inner, j), 2.0 * w * ax);
                diag += ik * (2.0 * hx * w * ax);
            } else {
                push(0, grid.index(i - 1, j), w * ax);
                push(1, grid.index(i + 1, j), w * ax);
            }
            // y direction
            diag -= 2.0 * w * ay;
            if j == 0 || j == ny - 1 {
                let inner = if j == 0 { 1 } else { ny - 2 };
                push(2, grid.index(i, inner), 2.0 * w * ay);
                diag += ik * (2.0 * hy * w * ay);
            } else {
                push(2, grid.index(i, j - 1), w * ay);
                push(3, grid.index(i, j + 1), w * ay);
            }

            let mut row: Vec<(usize, Complex64)> = entries
                .iter()
                .filter(|(idx, _)| *idx != usize::MAX)
                .map(|&(idx, c)| (idx, Complex64::new(c, 0.0)))
                .collect();
            row.push((p, diag));
            row.sort_unstable_by_key(|&(c, _)| c);
            rows.push(row);
        }
    }

    Ok(SystemMatrix {
        grid,
        k,
        q_hash: field_hash(q),
        homogeneous: q.is_zero(),
        matrix: CsrMatrix::from_rows(rows, grid.len()),
        row_scale,
    })
}

/// Reusable factorization of an assembled [`SystemMatrix`].
#[derive(Debug, Clone)]
pub struct Factorization {
    system: SystemMatrix,
    ldl: LdlFactor,
}

impl Factorization {
    pub fn grid(&self) -> &Grid2D {
        self.system.grid()
    }

    pub fn k(&self) -> f64 {
        self.system.k()
    }

    pub fn q_hash(&self) -> u64 {
        self.system.q_hash()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.system.is_homogeneous()
    }

    pub fn system(&self) -> &SystemMatrix {
        &self.system
    }

    pub fn nnz_factor(&self) -> usize {
        self.ldl.nnz_l()
    }

    /// Solves `A x = b` for a right-hand side already in matrix units.
    pub fn solve_vector(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.system.grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.system.grid.len(),
                found: b.len(),
            });
        }
        Ok(self.ldl.solve_refined(&self.system.matrix, b))
    }
}

pub fn factorize(a: &SystemMatrix) -> Result<Factorization> {
    let perm = nested_dissection(a.grid());
    let ldl = LdlFactor::new(a.matrix(), perm)?;
    Ok(Factorization { system: a.clone(), ldl })
}

/// Solves the factored system for the PDE source `rhs`; with a homogeneous
/// factorization this is the discrete solution operator `G`.
pub fn solve(fact: &Factorization, rhs: &ComplexField) -> Result<ComplexField> {
    let b = fact.system.rhs_vector(rhs)?;
    let x = fact.solve_vector(&b)?;
    ComplexField::new(*rhs.grid(), x)
}

pub fn solve_direct(p: &HelmholtzProblem) -> Result<ComplexField> {
    let a = assemble(p.k, &p.q)?;
    let fact = factorize(&a)?;
    solve(&fact, &p.f)
}
