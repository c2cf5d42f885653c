//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails. All random draws use master seed 0.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use helmholtz_core::field::relative_l2_error;
use helmholtz_core::helmholtz::{assemble, factorize, solve_direct, HelmholtzProblem};
use helmholtz_core::neumann::{estimate_contraction, neumann_solve, NeumannConfig};
use helmholtz_core::scene::{
    circles_field, derive_seed, grf_raw, grf_std, Circle, GrfSeries, ScattererKind, ScattererSpec, SourceSpec,
};
use helmholtz_core::{Grid2D, RealField};
use helmholtz_io::dataset::{generate, read_dataset, write_dataset, DatasetError, ProblemConfig};
use helmholtz_io::hfd::{self, HfdError};
use serde_json::Value;

const MASTER: u64 = 0;

type Check = Result<String, String>;

/// Id, name, check and time budget in seconds.
type Criterion = (&'static str, &'static str, fn() -> Check, u64);

fn ok_if(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sq(n: usize) -> Grid2D {
    Grid2D::square(n).unwrap()
}

fn p1_solver_exactness() -> Check {
    let sizes = [33, 49, 65, 97, 129];
    let ks = [5.0, 10.0, 20.0];
    let kinds = [
        ScattererKind::TShape,
        ScattererKind::Circles,
        ScattererKind::SmoothedCircles,
    ];
    let sources = [SourceSpec::GaussianR { r: 30.0 }, SourceSpec::Grf, SourceSpec::Waves];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let cfg = ProblemConfig {
            grid: sq(sizes[i % 5]),
            k: ks[i % 3],
            q_spec: ScattererSpec {
                kind: kinds[(i / 3) % 3],
                amplitude: 0.2,
            },
            f_spec: sources[(i / 2) % 3],
        };
        let p = cfg.problem(MASTER, i as u64).map_err(|e| e.to_string())?;
        let u = solve_direct(&p).map_err(|e| e.to_string())?;
        let a = assemble(p.k, &p.q).map_err(|e| e.to_string())?;
        worst = worst.max(a.relative_residual(&u, &p.f).map_err(|e| e.to_string())?);
    }
    ok_if(
        worst < 1e-10,
        format!("max relative system residual {worst:.2e} (< 1e-10)"),
    )
}

fn p2_self_convergence() -> Check {
    let series = GrfSeries::draw(derive_seed(MASTER, 0, 1), 32);
    let circle = [Circle {
        x: 0.5,
        y: 0.5,
        r: 0.2,
        mu: 1.0,
    }];
    let solve_at = |n: usize| {
        let g = sq(n);
        let q = circles_field(&circle, true, 0.1, &g)?;
        let f = series.evaluate(&g)?.to_complex();
        solve_direct(&HelmholtzProblem::new(10.0, q, f)?)
    };
    let reference = solve_at(257).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for n in [33, 65, 129] {
        let u = solve_at(n).map_err(|e| e.to_string())?;
        let r = reference.restrict((257 - 1) / (n - 1)).map_err(|e| e.to_string())?;
        errors.push(relative_l2_error(&u, &r).map_err(|e| e.to_string())?);
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    ok_if(
        ratios.iter().all(|&r| r >= 1.5),
        format!(
            "errors {:.2e} {:.2e} {:.2e}, ratios {:.2} {:.2} (>= 1.5)",
            errors[0], errors[1], errors[2], ratios[0], ratios[1]
        ),
    )
}

fn p3_neumann_equivalence() -> Check {
    let cfg = ProblemConfig {
        grid: sq(129),
        k: 20.0,
        q_spec: ScattererSpec {
            kind: ScattererKind::SmoothedCircles,
            amplitude: 0.05,
        },
        f_spec: SourceSpec::Grf,
    };
    let fact = factorize(&assemble(cfg.k, &RealField::zeros(cfg.grid)).unwrap()).unwrap();
    let ncfg = NeumannConfig {
        n_terms: 10,
        tol: 0.0,
        divergence_factor: f64::INFINITY,
    };
    let (mut worst_err, mut worst_ratio) = (0.0f64, 1.0f64);
    for i in 0..10 {
        let p = cfg.problem(MASTER, i).map_err(|e| e.to_string())?;
        let s = neumann_solve(&p, &ncfg, &fact).map_err(|e| e.to_string())?;
        let direct = solve_direct(&p).map_err(|e| e.to_string())?;
        worst_err = worst_err.max(relative_l2_error(&s.partial_sum, &direct).unwrap());
        let rho = estimate_contraction(p.k, &p.q, &fact, 20).map_err(|e| e.to_string())?;
        let t = &s.term_norms;
        let decay = (t[9] / t[1]).powf(1.0 / 8.0);
        let off = (decay / rho).max(rho / decay);
        worst_ratio = worst_ratio.max(off);
    }
    ok_if(
        worst_err < 1e-3 && worst_ratio <= 3.0,
        format!("max 10-term error {worst_err:.2e} (< 1e-3), worst decay/rho factor {worst_ratio:.2} (<= 3)"),
    )
}

fn mean_errors(amplitude: f64) -> Result<(f64, f64), String> {
    let cfg = ProblemConfig {
        grid: sq(129),
        k: 20.0,
        q_spec: ScattererSpec {
            kind: ScattererKind::TShape,
            amplitude,
        },
        f_spec: SourceSpec::GaussianR { r: 30.0 },
    };
    let fact = factorize(&assemble(cfg.k, &RealField::zeros(cfg.grid)).unwrap()).unwrap();
    let ncfg = NeumannConfig {
        n_terms: 10,
        tol: 0.0,
        divergence_factor: f64::INFINITY,
    };
    let (mut e3, mut e10) = (0.0, 0.0);
    for i in 0..20 {
        let p = cfg.problem(MASTER, i).map_err(|e| e.to_string())?;
        let s = neumann_solve(&p, &NeumannConfig { n_terms: 3, ..ncfg }, &fact).map_err(|e| e.to_string())?;
        let l = neumann_solve(&p, &ncfg, &fact).map_err(|e| e.to_string())?;
        let direct = solve_direct(&p).map_err(|e| e.to_string())?;
        e3 += relative_l2_error(&s.partial_sum, &direct).unwrap() / 20.0;
        e10 += relative_l2_error(&l.partial_sum, &direct).unwrap() / 20.0;
    }
    Ok((e3, e10))
}

fn p4_series_trend() -> Check {
    let (a3, a10) = mean_errors(0.35)?;
    let (b3, b10) = mean_errors(0.4)?;
    let detail = format!(
        "0.35: 3-term {:.2} 10-term {:.2}; 0.4: 3-term {:.2} 10-term {:.2} (x1e-2; need 10<3 at 0.35, 10>3 and 10>30 at 0.4)",
        a3 * 100.0,
        a10 * 100.0,
        b3 * 100.0,
        b10 * 100.0
    );
    ok_if(a10 < a3 && b10 > b3 && b10 > 0.3, detail)
}

fn helmholtz(args: &[&str], out: &Path) -> i32 {
    let o = Command::new(env!("CARGO_BIN_EXE_helmholtz"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    o.status.code().unwrap_or(-1)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p5_adjoint_gradient() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let code = helmholtz(&["gradcheck", "--seed", "0", "--probes", "20"], dir.path());
    let worst = read_json(&dir.path().join("run.json"))["result"]["max_mismatch"]
        .as_f64()
        .unwrap_or(f64::NAN);
    ok_if(
        code == 0 && worst < 1e-4,
        format!("max relative mismatch {worst:.2e} over 20 directions (< 1e-4, target 1e-5)"),
    )
}

fn p6_inversion() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let code = helmholtz(
        &[
            "invert",
            "--grid",
            "65",
            "--k",
            "20",
            "--directions",
            "16",
            "--data-grid-factor",
            "2",
            "--max-iters",
            "200",
        ],
        dir.path(),
    );
    if code != 0 {
        return Err(format!("invert exited with {code}"));
    }
    let r = read_json(&dir.path().join("report.json"));
    let reduction = r["objective_initial"].as_f64().unwrap() / r["objective_final"].as_f64().unwrap();
    let error = r["relative_error"].as_f64().unwrap();
    ok_if(
        reduction >= 1e3 && error <= 0.35,
        format!(
            "J reduced {reduction:.2e}x (>= 1e3), relative error {error:.3} (<= 0.35), {} iterations, status {}",
            r["iterations"], r["status"]
        ),
    )
}

/// Projection of a nodal field onto `cos(mπx) cos(nπy)` by the trapezoidal rule.
fn cosine_coefficient(f: &RealField, m: usize, n: usize) -> f64 {
    let (nx, ny) = f.grid().shape();
    let w = |i: usize, len: usize| if i == 0 || i == len - 1 { 0.5 } else { 1.0 };
    let norm = |m: usize, len: usize| {
        if m == 0 || m == len - 1 {
            (len - 1) as f64
        } else {
            (len - 1) as f64 / 2.0
        }
    };
    let mut acc = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let cx = (m as f64 * PI * i as f64 / (nx - 1) as f64).cos();
            let cy = (n as f64 * PI * j as f64 / (ny - 1) as f64).cos();
            acc += w(i, nx) * w(j, ny) * f.at(i, j) * cx * cy;
        }
    }
    acc / (norm(m, nx) * norm(n, ny))
}

fn p7_grf_spectrum() -> Check {
    let g = sq(17);
    let modes = [(1, 0), (1, 1), (2, 2)];
    let mut sums = [0.0; 3];
    let count = 2000;
    for s in 0..count {
        let f = grf_raw(derive_seed(MASTER, s, 1), &g).map_err(|e| e.to_string())?;
        for (acc, &(m, n)) in sums.iter_mut().zip(&modes) {
            *acc += cosine_coefficient(&f, m, n).powi(2);
        }
    }
    let ratios: Vec<f64> = modes
        .iter()
        .zip(&sums)
        .map(|(&(m, n), s)| s / count as f64 / grf_std(m, n).powi(2))
        .collect();
    ok_if(
        ratios.iter().all(|r| (r - 1.0).abs() <= 0.2),
        format!(
            "variance / expected for (1,0) (1,1) (2,2): {:.3} {:.3} {:.3} (within 20%)",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn p8_determinism_and_format() -> Check {
    let cfg = ProblemConfig {
        grid: sq(33),
        k: 20.0,
        q_spec: ScattererSpec {
            kind: ScattererKind::TShape,
            amplitude: 0.4,
        },
        f_spec: SourceSpec::Waves,
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let records = generate(&cfg, MASTER, 6).map_err(|e| e.to_string())?;
    write_dataset(&a, &cfg, MASTER, &records).map_err(|e| e.to_string())?;
    let again = generate(&cfg, MASTER, 6).map_err(|e| e.to_string())?;
    write_dataset(&b, &cfg, MASTER, &again).map_err(|e| e.to_string())?;
    let identical = (0..6).all(|i| {
        let name = format!("rec_{i}.hfd");
        fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap()
    });
    let strip = |p: &Path| {
        let mut v = read_json(&p.join("manifest.json"));
        v.as_object_mut().unwrap().remove("created_unix");
        v
    };
    let manifests_match = strip(&a) == strip(&b);
    let round_trip = read_dataset(&a).map(|(_, r)| r == records).unwrap_or(false);
    let encoded = hfd::encode(&hfd::HfdRecord::full(
        records[0].q.clone(),
        records[0].f.clone(),
        records[0].u.clone(),
    ));
    let bitwise = hfd::encode(&hfd::decode(&encoded, "r").unwrap()) == encoded;

    let path = a.join("rec_3.hfd");
    let mut bytes = fs::read(&path).unwrap();
    bytes[hfd::HEADER_LEN + 17] ^= 0x10;
    fs::write(&path, bytes).unwrap();
    let detected = matches!(
        read_dataset(&a),
        Err(DatasetError::Record(HfdError::Checksum { ref record, .. })) if record == "rec_3.hfd"
    );
    ok_if(
        identical && manifests_match && round_trip && bitwise && detected,
        format!(
            "byte-identical {identical}, manifests equal {manifests_match}, round trip {round_trip}, bitwise {bitwise}, corruption named {detected}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("P1", "solver exactness", p1_solver_exactness, 10),
        ("P2", "self-convergence", p2_self_convergence, 60),
        ("P3", "Neumann equivalence", p3_neumann_equivalence, 60),
        ("P4", "series trend", p4_series_trend, 300),
        ("P5", "adjoint gradient", p5_adjoint_gradient, 30),
        ("P6", "inversion regression", p6_inversion, 300),
        ("P7", "GRF spectrum", p7_grf_spectrum, 60),
        ("P8", "determinism and format", p8_determinism_and_format, 10),
    ];
    let mut failures = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (passed, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{id} {} {name}: {detail}; {:.1} s (budget {budget} s{})",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    println!("acceptance: {} passed, {failures} failed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
