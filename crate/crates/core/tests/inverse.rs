mod common;

use common::*;
use helmholtz_core::helmholtz::{assemble, factorize, solve};
use helmholtz_core::inverse::{
    forward_map, misfit_and_gradient, synthesize_data, FactorizationCache, IncidentSet, Measurement,
};
use helmholtz_core::{ComplexField, Grid2D, RealField};
use num_complex::Complex64;

#[test]
fn small_contrast_matches_born_approximation() {
    let g = Grid2D::square(33).unwrap();
    let k = 10.0;
    let inc = IncidentSet::uniform(k, 4).unwrap();
    let q = bump(g, 1.0, 0.45, 0.55, 0.25);
    let g0 = factorize(&assemble(k, &RealField::zeros(g)).unwrap()).unwrap();
    let born: Vec<Vec<Complex64>> = (0..inc.len())
        .map(|m| {
            let ui = inc.incident_field(m, &g).unwrap();
            solve(&g0, &ui.mul_real(&q).unwrap().scale(-k * k))
                .unwrap()
                .boundary_trace()
        })
        .collect();
    let mismatch = |eps: f64| -> f64 {
        let d = forward_map(&q.scale(eps), &inc, &mut FactorizationCache::new()).unwrap();
        let a: Vec<Complex64> = d.traces.concat();
        let b: Vec<Complex64> = born.concat().iter().map(|z| z * eps).collect();
        vec_rel_diff(&a, &b)
    };
    let (e1, e2) = (mismatch(1e-3), mismatch(5e-4));
    // relative deviation is O(ε), so halving ε halves it
    assert!(e1 < 1e-2, "{e1}");
    assert!((e1 / e2 - 2.0).abs() < 0.05, "{e1} {e2}");
}

#[test]
fn rotation_symmetric_scatterer_gives_rotated_traces() {
    let n = 33;
    let g = Grid2D::square(n).unwrap();
    let c = (n - 1) as f64 / 2.0;
    // built from integer offsets so the field is exactly invariant under rotate90
    let q = RealField::from_fn(g, |x, y| {
        let (i, j) = ((x * (n - 1) as f64).round() - c, (y * (n - 1) as f64).round() - c);
        let s = (i * i + j * j) / 100.0;
        if s < 1.0 {
            0.1 * (1.0 - s)
        } else {
            0.0
        }
    })
    .unwrap();
    assert_eq!(q.rotate90().unwrap(), q);

    let inc = IncidentSet::uniform(12.0, 4).unwrap();
    let d = forward_map(&q, &inc, &mut FactorizationCache::new()).unwrap();
    // a counter-clockwise quarter turn shifts the trace by one side length
    let probe = ComplexField::from_fn(g, |x, y| Complex64::new(x, 10.0 * y)).unwrap();
    let (before, after) = (probe.boundary_trace(), probe.rotate90().unwrap().boundary_trace());
    let len = before.len();
    let shift = (0..len)
        .find(|&s| (0..len).all(|t| after[(t + s) % len] == before[t]))
        .unwrap();
    assert_eq!(shift % (n - 1), 0);
    // plane waves are referenced to the origin, so rotating about the center
    // multiplies the incident field by exp(ik c·(Rd − d)), c = (1/2, 1/2)
    for m in 0..4 {
        let (dx, dy) = inc.directions()[m];
        let (rx, ry) = (-dy, dx);
        let phase = Complex64::from_polar(1.0, 12.0 * 0.5 * (rx - dx + ry - dy));
        let rotated: Vec<Complex64> = (0..len).map(|t| d.traces[m][(t + len - shift) % len] * phase).collect();
        let next = &d.traces[(m + 1) % 4];
        assert!(vec_rel_diff(&rotated, next) < 1e-10, "direction {m}");
    }
}

#[test]
fn unit_factor_synthesis_is_the_forward_map() {
    let g = Grid2D::square(17).unwrap();
    let inc = IncidentSet::uniform(9.0, 3).unwrap();
    let q = bump(g, 0.2, 0.5, 0.4, 0.3);
    let a = synthesize_data(&q, &inc, 1, None).unwrap();
    let b = forward_map(&q, &inc, &mut FactorizationCache::new()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fine_grid_data_differ_by_a_bounded_gap() {
    let g = Grid2D::square(65).unwrap();
    let inc = IncidentSet::uniform(20.0, 8).unwrap();
    let q = bump(g, 0.1, 0.5, 0.5, 0.15);
    let coarse = synthesize_data(&q, &inc, 1, None).unwrap();
    let fine = synthesize_data(&q, &inc, 2, None).unwrap();
    assert_eq!(fine.grid_factor, 2);
    let gap = vec_rel_diff(&coarse.traces.concat(), &fine.traces.concat());
    assert!(gap > 1e-3 && gap < 0.15, "{gap}");
}

fn fd_setup() -> (Grid2D, IncidentSet, Measurement, RealField) {
    let g = Grid2D::square(33).unwrap();
    let inc = IncidentSet::uniform(10.0, 4).unwrap();
    let data = synthesize_data(&bump(g, 0.1, 0.5, 0.5, 0.25), &inc, 2, None).unwrap();
    let q = bump(g, 0.05, 0.45, 0.55, 0.3);
    (g, inc, data, q)
}

#[test]
fn adjoint_gradient_matches_central_differences() {
    let (g, inc, data, q) = fd_setup();
    let mut cache = FactorizationCache::new();
    let (_, grad) = misfit_and_gradient(&q, &inc, &data, &mut cache, None).unwrap();
    let mut j_at = |q: &RealField| misfit_and_gradient(q, &inc, &data, &mut cache, None).unwrap().0;
    for seed in 0..6 {
        let delta = random_real(g, 50 + seed);
        let adjoint: f64 = grad.values().iter().zip(delta.values()).map(|(a, b)| a * b).sum();
        for eps in [1e-5, 1e-6] {
            let fd = (j_at(&(&q + &delta.scale(eps))) - j_at(&(&q - &delta.scale(eps)))) / (2.0 * eps);
            let rel = (adjoint - fd).abs() / fd.abs();
            assert!(rel < 1e-4, "seed {seed}, eps {eps}: {rel:e}");
        }
    }
}

#[test]
fn misfit_is_deterministic_and_nonnegative() {
    let (_, inc, data, q) = fd_setup();
    let a = misfit_and_gradient(&q, &inc, &data, &mut FactorizationCache::new(), None).unwrap();
    let b = misfit_and_gradient(&q, &inc, &data, &mut FactorizationCache::new(), None).unwrap();
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1, b.1);
    assert!(a.0 > 0.0);
}

#[test]
fn misfit_rejects_mismatched_data() {
    let (_, inc, data, _) = fd_setup();
    let other = RealField::zeros(Grid2D::square(17).unwrap());
    assert!(misfit_and_gradient(&other, &inc, &data, &mut FactorizationCache::new(), None).is_err());
    let fewer = IncidentSet::uniform(10.0, 3).unwrap();
    let q = RealField::zeros(data.grid);
    assert!(misfit_and_gradient(&q, &fewer, &data, &mut FactorizationCache::new(), None).is_err());
}
