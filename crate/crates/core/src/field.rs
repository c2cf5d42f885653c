//! Grid-sampled functions on the unit square.
//!
//! A [`Grid2D`] places `nx * ny` nodes at `(i * hx, j * hy)` with
//! `hx = 1 / (nx - 1)` and `hy = 1 / (ny - 1)`. Field values are stored
//! row-major with `x` varying fastest: node `(i, j)` lives at `j * nx + i`.
//!
//! Norms are discrete L2 norms with the cell-area weight `hx * hy`, summed in
//! storage order so that every reduction is bit-reproducible.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "GridShape", into = "GridShape"))]
pub struct Grid2D {
    nx: usize,
    ny: usize,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct GridShape {
    nx: usize,
    ny: usize,
}

#[cfg(feature = "serde")]
impl TryFrom<GridShape> for Grid2D {
    type Error = Error;
    fn try_from(s: GridShape) -> Result<Self> {
        Grid2D::new(s.nx, s.ny)
    }
}

#[cfg(feature = "serde")]
impl From<Grid2D> for GridShape {
    fn from(g: Grid2D) -> Self {
        GridShape { nx: g.nx, ny: g.ny }
    }
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid { nx, ny });
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn hx(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_square(&self) -> bool {
        self.nx == self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    pub fn boundary_len(&self) -> usize {
        2 * (self.nx + self.ny) - 4
    }

    /// Storage indices of the boundary nodes in trace order: bottom row
    /// left to right, right column bottom to top, top row right to left,
    /// left column top to bottom.
    pub fn boundary_indices(&self) -> Vec<usize> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::with_capacity(self.boundary_len());
        out.extend((0..nx).map(|i| self.index(i, 0)));
        out.extend((1..ny - 1).map(|j| self.index(nx - 1, j)));
        out.extend((0..nx).rev().map(|i| self.index(i, ny - 1)));
        out.extend((1..ny - 1).rev().map(|j| self.index(0, j)));
        out
    }

    /// The grid whose every `factor`-th node coincides with this one.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::config("refinement factor must be >= 1"));
        }
        Self::new((self.nx - 1) * factor + 1, (self.ny - 1) * factor + 1)
    }

    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let err = Error::NotDivisible {
            nx: self.nx,
            ny: self.ny,
            factor,
        };
        if factor == 0 || (self.nx - 1) % factor != 0 || (self.ny - 1) % factor != 0 {
            return Err(err);
        }
        Self::new((self.nx - 1) / factor + 1, (self.ny - 1) / factor + 1).map_err(|_| err)
    }

    pub fn ensure_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            })
        }
    }
}

/// Value types a [`Field`] can carry.
pub trait Scalar:
    Copy + PartialEq + core::fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    const ZERO: Self;
    fn abs2(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid2D,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Scalar> Field<T> {
    pub fn new(grid: Grid2D, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "field", index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![T::ZERO; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node. Non-finite samples are rejected.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.grid.cell_area() * sum_abs2(&self.values))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| libm::sqrt(v.abs2())).fold(0.0, f64::max)
    }

    /// Boundary values in [`Grid2D::boundary_indices`] order.
    pub fn boundary_trace(&self) -> Vec<T> {
        self.grid
            .boundary_indices()
            .into_iter()
            .map(|p| self.values[p])
            .collect()
    }

    /// Pointwise injection at coincident nodes.
    pub fn restrict(&self, factor: usize) -> Result<Self> {
        let coarse = self.grid.coarsen(factor)?;
        let mut values = Vec::with_capacity(coarse.len());
        for j in 0..coarse.ny() {
            for i in 0..coarse.nx() {
                values.push(self.at(factor * i, factor * j));
            }
        }
        Ok(Self { grid: coarse, values })
    }

    /// Nodal injection onto the `factor`-refined grid with bilinear fill.
    pub fn prolong(&self, factor: usize) -> Result<Self> {
        let fine = self.grid.refine(factor)?;
        let (cnx, cny) = self.grid.shape();
        let mut values = Vec::with_capacity(fine.len());
        let inv = 1.0 / factor as f64;
        for j in 0..fine.ny() {
            let (cj, fj) = (j / factor, (j % factor) as f64 * inv);
            let cj1 = (cj + 1).min(cny - 1);
            for i in 0..fine.nx() {
                let (ci, fi) = (i / factor, (i % factor) as f64 * inv);
                let ci1 = (ci + 1).min(cnx - 1);
                let v = self.at(ci, cj) * ((1.0 - fi) * (1.0 - fj))
                    + self.at(ci1, cj) * (fi * (1.0 - fj))
                    + self.at(ci, cj1) * ((1.0 - fi) * fj)
                    + self.at(ci1, cj1) * (fi * fj);
                values.push(v);
            }
        }
        Ok(Self { grid: fine, values })
    }

    /// Rotation by a quarter turn about the domain center on a square grid:
    /// the result at node `(i, j)` is the input at `(j, n - 1 - i)`, so a
    /// plane wave along `d` maps to the plane wave along `d` rotated
    /// counter-clockwise.
    pub fn rotate90(&self) -> Result<Self> {
        if !self.grid.is_square() {
            return Err(Error::ShapeMismatch {
                expected: (self.grid.nx(), self.grid.nx()),
                found: self.grid.shape(),
            });
        }
        let n = self.grid.nx();
        let mut values = Vec::with_capacity(self.grid.len());
        for j in 0..n {
            for i in 0..n {
                values.push(self.at(j, n - 1 - i));
            }
        }
        Ok(Self {
            grid: self.grid,
            values,
        })
    }
}

impl<T: Scalar> Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: Self) -> Field<T> {
        assert_eq!(self.grid, rhs.grid, "field grids differ");
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        assert_eq!(self.grid, rhs.grid, "field grids differ");
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl RealField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

impl ComplexField {
    pub fn scale_complex(&self, s: Complex64) -> Self {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn real_part(&self) -> RealField {
        self.map(|v| v.re)
    }

    /// Pointwise product with a real field.
    pub fn mul_real(&self, q: &RealField) -> Result<Self> {
        self.grid.ensure_same(q.grid())?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(q.values()).map(|(&v, &w)| v * w).collect(),
        })
    }
}

pub(crate) fn sum_abs2<T: Scalar>(values: &[T]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v.abs2())
}

/// `‖a - b‖₂ / ‖b‖₂` in the area-weighted discrete L2 norm.
pub fn relative_l2_error<T: Scalar>(a: &Field<T>, b: &Field<T>) -> Result<f64> {
    b.grid.ensure_same(&a.grid)?;
    let den = sum_abs2(&b.values);
    if den == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let num = a
        .values
        .iter()
        .zip(&b.values)
        .fold(0.0, |acc, (&x, &y)| acc + (x - y).abs2());
    Ok(libm::sqrt(num / den))
}

/// Five-point Laplacian. Boundary nodes see mirror-reflected ghost values
/// (ghost = nearest interior neighbour across the boundary).
pub fn five_point_laplacian(u: &ComplexField) -> ComplexField {
    let g = *u.grid();
    let (nx, ny) = g.shape();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut out = Vec::with_capacity(g.len());
    for j in 0..ny {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
        for i in 0..nx {
            let im = if i == 0 { 1 } else { i - 1 };
            let ip = if i == nx - 1 { nx - 2 } else { i + 1 };
            let c = u.at(i, j);
            let lap = (u.at(ip, j) + u.at(im, j) - c * 2.0) * ihx2 + (u.at(i, jp) + u.at(i, jm) - c * 2.0) * ihy2;
            out.push(lap);
        }
    }
    Field { grid: g, values: out }
}

/// Area-weighted L2 norm of `Δₕu + k²(1+q)u − f` over interior nodes.
pub fn pde_residual(u: &ComplexField, k: f64, q: &RealField, f: &ComplexField) -> Result<f64> {
    let g = *u.grid();
    g.ensure_same(q.grid())?;
    g.ensure_same(f.grid())?;
    let lap = five_point_laplacian(u);
    let k2 = k * k;
    let mut acc = 0.0;
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            let p = g.index(i, j);
            let r = lap.values[p] + u.values[p] * (k2 * (1.0 + q.values[p])) - f.values[p];
            acc += r.norm_sqr();
        }
    }
    Ok(libm::sqrt(g.cell_area() * acc))
}

/// Adjoint of [`Field::boundary_trace`]: scatters trace entries back onto
/// their boundary nodes with unit weight, zero elsewhere.
pub fn trace_adjoint(grid: &Grid2D, trace: &[Complex64]) -> Result<Vec<Complex64>> {
    if trace.len() != grid.boundary_len() {
        return Err(Error::LengthMismatch {
            expected: grid.boundary_len(),
            found: trace.len(),
        });
    }
    let mut out = vec![Complex64::ZERO; grid.len()];
    for (&p, &t) in grid.boundary_indices().iter().zip(trace) {
        out[p] += t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::square(n).unwrap()
    }

    #[test]
    fn grid_rejects_tiny() {
        assert_eq!(Grid2D::new(2, 5), Err(Error::InvalidGrid { nx: 2, ny: 5 }));
        assert!(Grid2D::new(3, 3).is_ok());
    }

    #[test]
    fn trace_order_on_3x3() {
        let g = grid(3);
        let f = RealField::new(g, (1..=9).map(|v| v as f64).collect()).unwrap();
        assert_eq!(f.boundary_trace(), vec![1.0, 2.0, 3.0, 6.0, 9.0, 8.0, 7.0, 4.0]);
    }

    #[test]
    fn trace_of_constant() {
        let g = Grid2D::new(5, 7).unwrap();
        let c = Complex64::new(0.3, -1.2);
        let f = ComplexField::from_fn(g, |_, _| c).unwrap();
        let t = f.boundary_trace();
        assert_eq!(t.len(), 2 * (5 + 7) - 4);
        assert!(t.iter().all(|&v| v == c));
    }

    #[test]
    fn relative_error_basics() {
        let g = grid(6);
        let b = ComplexField::from_fn(g, |x, y| Complex64::new(x + 1.0, y)).unwrap();
        assert_eq!(relative_l2_error(&b, &b).unwrap(), 0.0);
        let a = b.scale(2.0);
        assert!((relative_l2_error(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let z = ComplexField::zeros(g);
        assert_eq!(relative_l2_error(&a, &z), Err(Error::DegenerateReference));
        let other = ComplexField::zeros(grid(7));
        assert!(matches!(
            relative_l2_error(&other, &b),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn laplacian_kills_constants_and_is_exact_on_quadratics() {
        let g = Grid2D::new(9, 13).unwrap();
        let c = ComplexField::from_fn(g, |_, _| Complex64::new(2.5, -1.0)).unwrap();
        assert!(five_point_laplacian(&c).max_abs() < 1e-9);
        let q = ComplexField::from_fn(g, |x, _| Complex64::new(x * x, 0.0)).unwrap();
        let lap = five_point_laplacian(&q);
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                assert!((lap.at(i, j) - Complex64::new(2.0, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_of_sine_product() {
        use core::f64::consts::PI;
        let g = grid(64);
        let u = ComplexField::from_fn(g, |x, y| Complex64::new(libm::sin(PI * x) * libm::sin(PI * y), 0.0)).unwrap();
        let lap = five_point_laplacian(&u);
        let mut worst: f64 = 0.0;
        for j in 1..63 {
            for i in 1..63 {
                let exact = u.at(i, j) * (-2.0 * PI * PI);
                worst = worst.max((lap.at(i, j) - exact).norm());
            }
        }
        assert!(worst < 0.01 * 2.0 * PI * PI, "{worst}");
    }

    #[test]
    fn residual_trivial_cases() {
        let g = grid(8);
        let q = RealField::zeros(g);
        let z = ComplexField::zeros(g);
        assert_eq!(pde_residual(&z, 3.0, &q, &z).unwrap(), 0.0);
        let f = ComplexField::from_fn(g, |x, y| Complex64::new(x - y, x * y)).unwrap();
        let interior: f64 = (1..7)
            .flat_map(|j| (1..7).map(move |i| (i, j)))
            .map(|(i, j)| f.at(i, j).norm_sqr())
            .sum();
        let expected = (g.cell_area() * interior).sqrt();
        assert!((pde_residual(&z, 3.0, &q, &f).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn restrict_linear_function_exactly() {
        let fine = grid(129);
        let f = ComplexField::from_fn(fine, |x, y| Complex64::new(x + y, 0.0)).unwrap();
        let c = f.restrict(2).unwrap();
        assert_eq!(c.grid().shape(), (65, 65));
        let expected = ComplexField::from_fn(*c.grid(), |x, y| Complex64::new(x + y, 0.0)).unwrap();
        for (a, b) in c.values().iter().zip(expected.values()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(f.restrict(1).unwrap(), f);
        assert!(matches!(grid(10).coarsen(2), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let g = grid(5);
        let f = RealField::new(g, (0..25).map(|v| v as f64).collect()).unwrap();
        let r = f.rotate90().unwrap();
        assert_eq!(r.at(0, 0), f.at(0, 4));
        let r4 = r.rotate90().unwrap().rotate90().unwrap().rotate90().unwrap();
        assert_eq!(r4, f);
    }

    #[test]
    fn trace_adjoint_is_transpose() {
        let g = Grid2D::new(5, 4).unwrap();
        let u = ComplexField::from_fn(g, |x, y| Complex64::new(x, 1.0 + y)).unwrap();
        let t: Vec<Complex64> = (0..g.boundary_len())
            .map(|m| Complex64::new(m as f64, -(m as f64) * 0.5))
            .collect();
        let lhs: Complex64 = u.boundary_trace().iter().zip(&t).map(|(a, b)| a * b).sum();
        let back = trace_adjoint(&g, &t).unwrap();
        let rhs: Complex64 = u.values().iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
