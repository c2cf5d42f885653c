//! Sparse `LDLᵀ` factorization of complex-symmetric matrices.
//!
//! The matrices assembled by [`crate::helmholtz`] satisfy `A = Aᵀ` (plain
//! transpose), so a symmetric factorization `PAPᵀ = LDLᵀ` exists without
//! conjugation whenever no pivot vanishes. The elimination order is a
//! geometric nested dissection of the tensor grid: each box is split by a
//! grid line along its longer side and the separator is numbered last.
//!
//! The numeric phase is the up-looking row-by-row algorithm driven by the
//! elimination tree. No pivoting is performed; a pivot whose magnitude falls
//! below `PIVOT_TOL * max|A|` is reported as singular. Solves apply iterative
//! refinement against the original matrix.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Grid2D;
use crate::sparse::CsrMatrix;

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-14;
const REFINE_STEPS: usize = 3;
const REFINE_TOL: f64 = 1e-15;
const LEAF: usize = 8;

/// Nested-dissection ordering of a tensor grid. Returns `perm` with
/// `perm[new] = old`.
pub fn nested_dissection(grid: &Grid2D) -> Vec<usize> {
    let mut perm = Vec::with_capacity(grid.len());
    dissect(grid, 0, grid.nx(), 0, grid.ny(), &mut perm);
    debug_assert_eq!(perm.len(), grid.len());
    perm
}

fn dissect(g: &Grid2D, i0: usize, i1: usize, j0: usize, j1: usize, out: &mut Vec<usize>) {
    let (w, h) = (i1 - i0, j1 - j0);
    if w == 0 || h == 0 {
        return;
    }
    if w <= LEAF && h <= LEAF {
        for j in j0..j1 {
            for i in i0..i1 {
                out.push(g.index(i, j));
            }
        }
        return;
    }
    if w >= h {
        let mid = i0 + w / 2;
        dissect(g, i0, mid, j0, j1, out);
        dissect(g, mid + 1, i1, j0, j1, out);
        out.extend((j0..j1).map(|j| g.index(mid, j)));
    } else {
        let mid = j0 + h / 2;
        dissect(g, i0, i1, j0, mid, out);
        dissect(g, i0, i1, mid + 1, j1, out);
        out.extend((i0..i1).map(|i| g.index(i, mid)));
    }
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<Complex64>,
    d: Vec<Complex64>,
}

impl LdlFactor {
    /// Factorizes the symmetric matrix `a` with elimination order `perm`
    /// (`perm[new] = old`).
    pub fn new(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        assert_eq!(perm.len(), n);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // Upper triangle of PAPᵀ by columns. Row `old` of a symmetric matrix
        // is also its column, so column k of the permuted upper part comes
        // straight from row perm[k].
        let mut c_ptr = Vec::with_capacity(n + 1);
        let mut c_idx = Vec::with_capacity(a.nnz() / 2 + n);
        let mut c_val = Vec::with_capacity(a.nnz() / 2 + n);
        c_ptr.push(0);
        for (k, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let i = inv[c];
                if i <= k {
                    c_idx.push(i);
                    c_val.push(v);
                }
            }
            c_ptr.push(c_idx.len());
        }

        // Symbolic: elimination tree and column counts of L.
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &start in &c_idx[c_ptr[k]..c_ptr[k + 1]] {
                let mut i = start;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_ptr = Vec::with_capacity(n + 1);
        l_ptr.push(0);
        for k in 0..n {
            l_ptr.push(l_ptr[k] + lnz[k]);
        }
        let total = l_ptr[n];

        // Numeric: row k of L by a sparse triangular solve over the
        // reach of column k in the elimination tree.
        let zero = Complex64::new(0.0, 0.0);
        let mut l_idx = vec![0usize; total];
        let mut l_val = vec![zero; total];
        let mut d = vec![zero; n];
        let mut y = vec![zero; n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|c| *c = 0);
        flag.iter_mut().for_each(|f| *f = NONE);
        let threshold = PIVOT_TOL * a.max_abs();

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in c_ptr[k]..c_ptr[k + 1] {
                let mut i = c_idx[p];
                y[i] += c_val[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = zero;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = zero;
                let (start, end) = (l_ptr[i], l_ptr[i] + lnz[i]);
                for p in start..end {
                    y[l_idx[p]] -= l_val[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                l_idx[end] = k;
                l_val[end] = lki;
                lnz[i] += 1;
            }
            if !(dk.norm() > threshold) {
                return Err(Error::SingularPivot { index: perm[k] });
            }
            d[k] = dk;
        }

        Ok(Self {
            n,
            perm,
            l_ptr,
            l_idx,
            l_val,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.l_val.len()
    }

    /// One triangular sweep pair, no refinement.
    pub fn solve_raw(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let xj = x[j];
            if xj.re == 0.0 && xj.im == 0.0 {
                continue;
            }
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                acc -= self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = acc;
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solves `a x = b` with iterative refinement against `a`, which must be
    /// the matrix this factor was built from.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[Complex64]) -> Vec<Complex64> {
        let bnorm = norm2(b);
        let mut x = self.solve_raw(b);
        if bnorm == 0.0 {
            return x;
        }
        for _ in 0..REFINE_STEPS {
            let ax = a.matvec(&x);
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if norm2(&r) <= REFINE_TOL * bnorm {
                break;
            }
            let dx = self.solve_raw(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        x
    }
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().fold(0.0, |acc, z| acc + z.norm_sqr()))
}
