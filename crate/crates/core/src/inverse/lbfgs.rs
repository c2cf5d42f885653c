//! Limited-memory BFGS with a strong-Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const MAX_BRACKET: usize = 25;
const MAX_ZOOM: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            memory: 10,
            grad_tol: 1e-10,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

impl LbfgsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 || self.memory < 1 {
            return Err(Error::config("max_iters and memory must be >= 1"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::config("grad_tol must be >= 0"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::config("line search needs 0 < c1 < c2 < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LbfgsStatus {
    GradTol,
    MaxIters,
    LineSearchFailed,
}

impl LbfgsStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LbfgsStatus::GradTol => "grad_tol",
            LbfgsStatus::MaxIters => "max_iters",
            LbfgsStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective at the start point and after every accepted step.
    pub f_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

struct Evaluator<F> {
    objective: F,
    count: usize,
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Evaluator<F> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.count += 1;
        (self.objective)(x)
    }
}

struct Point {
    a: f64,
    f: f64,
    d: f64,
}

struct Accepted {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize<F>(x0: Vec<f64>, opts: &LbfgsOptions, objective: F) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    opts.validate()?;
    let mut ev = Evaluator { objective, count: 0 };
    let mut x = x0;
    let (mut f, mut g) = ev.eval(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "objective at start point",
            index: 0,
        });
    }
    let mut f_history = alloc::vec![f];
    let mut grad_norm_history = alloc::vec![norm(&g)];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    let status = loop {
        let gnorm = norm(&g);
        if gnorm <= opts.grad_tol {
            break LbfgsStatus::GradTol;
        }
        if iterations >= opts.max_iters {
            break LbfgsStatus::MaxIters;
        }

        let mut step = line_search_step(&x, f, &g, &pairs, opts, &mut ev)?;
        if step.is_none() && !pairs.is_empty() {
            pairs.clear();
            step = line_search_step(&x, f, &g, &pairs, opts, &mut ev)?;
        }
        let Some(next) = step else {
            break LbfgsStatus::LineSearchFailed;
        };

        let s: Vec<f64> = next.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = next.x;
        f = next.f;
        g = next.g;
        iterations += 1;
        f_history.push(f);
        grad_norm_history.push(norm(&g));
    };

    Ok(LbfgsOutcome {
        x,
        f,
        f_history,
        grad_norm_history,
        iterations,
        evaluations: ev.count,
        status,
    })
}

/// Two-loop recursion for `−H g`. With no stored pairs this is steepest
/// descent scaled to unit length.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let Some((s_last, y_last, _)) = pairs.back() else {
        let n = norm(g);
        return g.iter().map(|v| -v / n).collect();
    };
    let mut alpha = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alpha.push(a);
    }
    let gamma = dot(s_last, y_last) / dot(y_last, y_last);
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in pairs.iter().zip(alpha.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn line_search_step<F>(
    x: &[f64],
    f0: f64,
    g0: &[f64],
    pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    opts: &LbfgsOptions,
    ev: &mut Evaluator<F>,
) -> Result<Option<Accepted>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut p = direction(g0, pairs);
    let mut d0 = dot(g0, &p);
    if !(d0 < 0.0) {
        p = direction(g0, &VecDeque::new());
        d0 = dot(g0, &p);
    }
    let mut trial = |a: f64| -> Result<(Point, Accepted)> {
        let xa: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + a * pi).collect();
        let (fa, ga) = ev.eval(&xa)?;
        let finite = fa.is_finite() && ga.iter().all(|v| v.is_finite());
        let fa = if finite { fa } else { f64::INFINITY };
        let da = if finite { dot(&ga, &p) } else { f64::NAN };
        Ok((Point { a, f: fa, d: da }, Accepted { x: xa, f: fa, g: ga }))
    };
    let sufficient = |pt: &Point| pt.f <= f0 + opts.c1 * pt.a * d0;
    let curvature = |pt: &Point| libm::fabs(pt.d) <= -opts.c2 * d0;

    let mut prev = Point { a: 0.0, f: f0, d: d0 };
    let mut a = 1.0;
    for i in 0..MAX_BRACKET {
        let (cur, acc) = trial(a)?;
        if !sufficient(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(prev, cur, &sufficient, &curvature, &mut trial);
        }
        if curvature(&cur) {
            return Ok(Some(acc));
        }
        if cur.d >= 0.0 {
            return zoom(cur, prev, &sufficient, &curvature, &mut trial);
        }
        prev = cur;
        a *= 2.0;
    }
    Ok(None)
}

fn zoom<T>(
    mut lo: Point,
    mut hi: Point,
    sufficient: &impl Fn(&Point) -> bool,
    curvature: &impl Fn(&Point) -> bool,
    trial: &mut T,
) -> Result<Option<Accepted>>
where
    T: FnMut(f64) -> Result<(Point, Accepted)>,
{
    for _ in 0..MAX_ZOOM {
        let a = interpolate(&lo, &hi);
        let (cur, acc) = trial(a)?;
        if !sufficient(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(Some(acc));
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if libm::fabs(hi.a - lo.a) <= 1e-14 * libm::fabs(lo.a).max(1e-300) {
            break;
        }
    }
    Ok(None)
}

/// Cubic interpolation between the bracket ends, kept away from both ends;
/// bisection when the cubic is unusable.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.a, hi.a);
    let width = b - a;
    let mid = 0.5 * (a + b);
    if !(hi.f.is_finite() && hi.d.is_finite()) {
        return mid;
    }
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.d * hi.d;
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = libm::copysign(libm::sqrt(disc), width);
    let c = b - width * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    let (l, h) = (a + 0.1 * width, b - 0.1 * width);
    let (l, h) = if l <= h { (l, h) } else { (h, l) };
    if c.is_finite() && c >= l && c <= h {
        c
    } else {
        mid
    }
}
