//! Command-line front end. Exit codes: 0 success, 1 usage error (bad
//! arguments or an unreadable config file), 2 failure while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use helmholtz_core::field::{pde_residual, relative_l2_error};
use helmholtz_core::helmholtz::{assemble, factorize, solve, solve_direct, HelmholtzProblem};
use helmholtz_core::inverse::{
    lbfgs_invert, misfit_and_gradient, synthesize_data, FactorizationCache, IncidentSet, InverseConfig,
};
use helmholtz_core::neumann::{estimate_contraction, neumann_solve, NeumannConfig};
use helmholtz_core::scene::{circles_field, derive_seed, sample_f_grf, Circle, ScattererKind, ScattererSpec};
use helmholtz_core::{ComplexField, Grid2D, RealField};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{self, now_unix, ProblemConfig};
use crate::hfd::{self, HfdRecord};
use crate::run::RunRecord;

#[derive(Debug, Parser)]
#[command(name = "helmholtz", version, about = "Helmholtz forward and inverse solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample and label a dataset of (q, f, u) records.
    GenDataset(GenDatasetArgs),
    /// Solve one problem directly and write solution.hfd.
    Solve(SolveArgs),
    /// Print the discrete PDE residual of a stored solution.
    PdeResidual(ResidualArgs),
    /// Sum the Neumann series and compare with the direct solve.
    Neumann(NeumannArgs),
    /// Estimate the contraction factor of the series.
    Contraction(ContractionArgs),
    /// Reconstruct q from synthetic boundary data.
    Invert(InvertArgs),
    /// Compare the adjoint gradient with central differences.
    Gradcheck(GradcheckArgs),
    /// Time assembly, factorization and solve.
    Bench(BenchArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenDataset(_) => "gen-dataset",
            Command::Solve(_) => "solve",
            Command::PdeResidual(_) => "pde-residual",
            Command::Neumann(_) => "neumann",
            Command::Contraction(_) => "contraction",
            Command::Invert(_) => "invert",
            Command::Gradcheck(_) => "gradcheck",
            Command::Bench(_) => "bench",
        }
    }

    fn out(&self) -> &Path {
        match self {
            Command::GenDataset(a) => &a.out,
            Command::Solve(a) => &a.out,
            Command::PdeResidual(a) => &a.out,
            Command::Neumann(a) => &a.out,
            Command::Contraction(a) => &a.out,
            Command::Invert(a) => &a.out,
            Command::Gradcheck(a) => &a.out,
            Command::Bench(a) => &a.out,
        }
    }

    fn args_json(&self) -> Value {
        let v = match self {
            Command::GenDataset(a) => serde_json::to_value(a),
            Command::Solve(a) => serde_json::to_value(a),
            Command::PdeResidual(a) => serde_json::to_value(a),
            Command::Neumann(a) => serde_json::to_value(a),
            Command::Contraction(a) => serde_json::to_value(a),
            Command::Invert(a) => serde_json::to_value(a),
            Command::Gradcheck(a) => serde_json::to_value(a),
            Command::Bench(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

/// Where a single problem comes from: a config plus seed, a stored record,
/// or one record of a dataset.
#[derive(Debug, Args, Serialize)]
struct ProblemArgs {
    /// Problem config (JSON); sample `--index` from master seed `--seed`.
    #[arg(long, value_name = "FILE", required_unless_present_any = ["record", "dataset"],
          conflicts_with_all = ["record", "dataset"], requires = "seed")]
    config: Option<PathBuf>,
    #[arg(long, requires = "config")]
    seed: Option<u64>,
    /// A `.hfd` record; needs `--k`.
    #[arg(long, value_name = "FILE", conflicts_with = "dataset", requires = "k")]
    record: Option<PathBuf>,
    #[arg(long, requires = "record")]
    k: Option<f64>,
    /// A dataset directory; picks record `--index`.
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: u64,
}

#[derive(Debug, Args, Serialize)]
struct GenDatasetArgs {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ResidualArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct NeumannArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 10)]
    terms: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1.05)]
    divergence_factor: f64,
    /// Power iterations for the contraction estimate.
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ContractionArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct InvertArgs {
    /// Sample the true scatterer from this config's `q_spec` instead of
    /// the built-in single circle; grid and wavenumber come from the config.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["grid", "k"], requires = "seed")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = 16)]
    directions: usize,
    #[arg(long, default_value_t = 2)]
    data_grid_factor: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 10)]
    memory: usize,
    #[arg(long, default_value_t = 1e-12)]
    grad_tol: f64,
    /// Standard deviation of additive Gaussian noise on each data component.
    #[arg(long, requires = "seed")]
    noise_std: Option<f64>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GradcheckArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 33)]
    grid: usize,
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    #[arg(long, default_value_t = 4)]
    directions: usize,
    #[arg(long, default_value_t = 20)]
    probes: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "33,65,129")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 20.0)]
    k: f64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.into())
    }
}

#[derive(Debug, Default)]
struct Outcome {
    config: Option<Value>,
    result: Value,
    /// Set when the command ran but its check did not pass.
    failed: Option<String>,
}

/// Parses `argv` (program name first), runs the command, writes `run.json`
/// and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cmd = cli.command;
    let mut record = RunRecord::new(cmd.name(), cmd.args_json(), now_unix());
    let outcome = dispatch(&cmd);
    record.finished_unix = now_unix();
    let code = match outcome {
        Ok(o) => {
            record.config = o.config;
            record.result = o.result;
            record.error = o.failed.clone();
            match o.failed {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    2
                }
                None => 0,
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            record.error = Some(format!("{e:#}"));
            2
        }
    };
    record.exit_code = code;
    if let Err(e) = record.write(cmd.out()) {
        eprintln!("error: cannot write run.json: {e}");
        return 2;
    }
    code
}

fn dispatch(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Solve(a) => solve_cmd(a),
        Command::PdeResidual(a) => residual_cmd(a),
        Command::Neumann(a) => neumann_cmd(a),
        Command::Contraction(a) => contraction_cmd(a),
        Command::Invert(a) => invert_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn load_config(path: &Path) -> Result<ProblemConfig, CliError> {
    ProblemConfig::from_json_file(path).map_err(|e| CliError::Usage(format!("{e:#}")))
}

fn json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("value serializes")
}

struct Loaded {
    k: f64,
    q: RealField,
    f: Option<ComplexField>,
    u: Option<ComplexField>,
    config: Option<Value>,
    name: String,
}

impl Loaded {
    fn f(&self) -> Result<&ComplexField, CliError> {
        self.f
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{} holds only q; a source f is needed", self.name)))
    }

    fn problem(&self) -> Result<HelmholtzProblem, CliError> {
        Ok(HelmholtzProblem::new(self.k, self.q.clone(), self.f()?.clone())?)
    }
}

fn load_problem(a: &ProblemArgs) -> Result<Loaded, CliError> {
    if let Some(path) = &a.config {
        let cfg = load_config(path)?;
        let seed = a.seed.expect("clap requires --seed with --config");
        let (q, f, _) = cfg.sample(seed, a.index)?;
        return Ok(Loaded {
            k: cfg.k,
            q,
            f: Some(f),
            u: None,
            config: Some(json(&cfg)),
            name: format!("{} #{}", path.display(), a.index),
        });
    }
    if let Some(path) = &a.record {
        let k = a.k.expect("clap requires --k with --record");
        if !(k.is_finite() && k > 0.0) {
            return Err(CliError::Usage(format!("--k must be positive, got {k}")));
        }
        let rec = hfd::read_file(path)?;
        let (f, u) = rec.fu.map_or((None, None), |(f, u)| (Some(f), Some(u)));
        return Ok(Loaded {
            k,
            q: rec.q,
            f,
            u,
            config: None,
            name: path.display().to_string(),
        });
    }
    let dir = a.dataset.as_ref().expect("clap requires one problem source");
    let m = dataset::read_manifest(dir)?;
    let entry = m
        .records
        .iter()
        .find(|e| e.index == a.index)
        .ok_or_else(|| CliError::Usage(format!("{} has no record {}", dir.display(), a.index)))?;
    let r = dataset::read_record(dir, &m, entry)?;
    let mut config = json(&m);
    config.as_object_mut().expect("manifest is an object").remove("records");
    Ok(Loaded {
        k: m.k,
        q: r.q,
        f: Some(r.f),
        u: Some(r.u),
        config: Some(config),
        name: entry.file.clone(),
    })
}

fn gen_dataset(a: &GenDatasetArgs) -> Result<Outcome, CliError> {
    let cfg = load_config(&a.config)?;
    let records = dataset::generate(&cfg, a.seed, a.count as usize)?;
    let manifest = dataset::write_dataset(&a.out, &cfg, a.seed, &records)?;
    println!("wrote {} records to {}", manifest.count, a.out.display());
    Ok(Outcome {
        config: Some(json(&cfg)),
        result: json!({
            "count": manifest.count,
            "files": manifest.records.iter().map(|e| e.file.clone()).collect::<Vec<_>>(),
        }),
        failed: None,
    })
}

fn solve_cmd(a: &SolveArgs) -> Result<Outcome, CliError> {
    let l = load_problem(&a.problem)?;
    let p = l.problem()?;
    let u = solve_direct(&p)?;
    let residual = pde_residual(&u, p.k, &p.q, &p.f)?;
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("solution.hfd");
    hfd::write_file(&path, &HfdRecord::full(p.q, p.f.clone(), u.clone()))?;
    println!("pde_residual {residual:.17e}");
    println!("u_l2_norm {:.17e}", u.l2_norm());
    println!("wrote {}", path.display());
    Ok(Outcome {
        config: l.config,
        result: json!({ "pde_residual": residual, "f_l2_norm": p.f.l2_norm(), "u_l2_norm": u.l2_norm(), "file": "solution.hfd" }),
        failed: None,
    })
}

fn residual_cmd(a: &ResidualArgs) -> Result<Outcome, CliError> {
    let l = load_problem(&a.problem)?;
    let u =
        l.u.as_ref()
            .ok_or_else(|| CliError::Usage(format!("{} holds no solution u", l.name)))?;
    let f = l.f()?;
    let residual = pde_residual(u, l.k, &l.q, f)?;
    let relative = residual / f.l2_norm();
    println!("pde_residual {residual:.17e}");
    println!("relative {relative:.17e}");
    Ok(Outcome {
        config: l.config,
        result: json!({ "pde_residual": residual, "relative": relative }),
        failed: None,
    })
}

fn homogeneous_factor(k: f64, grid: Grid2D) -> Result<helmholtz_core::helmholtz::Factorization, CliError> {
    Ok(factorize(&assemble(k, &RealField::zeros(grid))?)?)
}

fn neumann_cmd(a: &NeumannArgs) -> Result<Outcome, CliError> {
    let cfg = NeumannConfig {
        n_terms: a.terms,
        tol: a.tol,
        divergence_factor: a.divergence_factor,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let l = load_problem(&a.problem)?;
    let p = l.problem()?;
    let fact = homogeneous_factor(p.k, *p.grid())?;
    let series = neumann_solve(&p, &cfg, &fact)?;
    let direct = solve_direct(&p)?;
    let error = relative_l2_error(&series.partial_sum, &direct)?;
    let rho = estimate_contraction(p.k, &p.q, &fact, a.iters)?;
    for (n, norm) in series.term_norms.iter().enumerate() {
        println!("term {n} {norm:.6e}");
    }
    println!("status {}", series.status.as_str());
    println!("terms_used {}", series.terms_used);
    println!("relative_error {error:.6e}");
    println!("contraction {rho:.6}");
    Ok(Outcome {
        config: l.config,
        result: json!({
            "term_norms": series.term_norms,
            "status": series.status,
            "terms_used": series.terms_used,
            "relative_error": error,
            "contraction": rho,
        }),
        failed: None,
    })
}

fn contraction_cmd(a: &ContractionArgs) -> Result<Outcome, CliError> {
    if a.iters < 5 {
        return Err(CliError::Usage("--iters must be at least 5".into()));
    }
    let l = load_problem(&a.problem)?;
    let fact = homogeneous_factor(l.k, *l.q.grid())?;
    let rho = estimate_contraction(l.k, &l.q, &fact, a.iters)?;
    println!("contraction {rho:.6}");
    Ok(Outcome {
        config: l.config,
        result: json!({ "contraction": rho }),
        failed: None,
    })
}

/// The built-in inversion target: one smoothed circle of radius 0.15 at
/// the center with peak 0.1.
pub fn reference_scatterer(grid: &Grid2D) -> helmholtz_core::Result<RealField> {
    circles_field(
        &[Circle {
            x: 0.5,
            y: 0.5,
            r: 0.15,
            mu: 1.0,
        }],
        true,
        0.1,
        grid,
    )
}

fn invert_cmd(a: &InvertArgs) -> Result<Outcome, CliError> {
    let (q_true, k, config) = match &a.config {
        Some(path) => {
            let cfg = load_config(path)?;
            let seed = a.seed.expect("clap requires --seed with --config");
            let q = cfg.q_spec.sample(derive_seed(seed, a.index, 0), &cfg.grid)?;
            (q, cfg.k, Some(json(&cfg)))
        }
        None => {
            let n = a.grid.unwrap_or(65);
            let grid = Grid2D::square(n).map_err(|e| CliError::Usage(format!("--grid: {e}")))?;
            (reference_scatterer(&grid)?, a.k.unwrap_or(20.0), None)
        }
    };
    if !(k.is_finite() && k > 0.0) || a.directions == 0 {
        return Err(CliError::Usage(
            "--k must be positive and --directions at least 1".into(),
        ));
    }
    let grid = *q_true.grid();
    let mut cfg = InverseConfig::new(grid);
    cfg.max_iters = a.max_iters;
    cfg.memory = a.memory;
    cfg.grad_tol = a.grad_tol;
    cfg.data_grid_factor = a.data_grid_factor;
    cfg.noise_std = a.noise_std;
    cfg.noise_seed = a.seed.unwrap_or(0);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let inc = IncidentSet::uniform(k, a.directions)?;
    let data = synthesize_data(&q_true, &inc, cfg.data_grid_factor, cfg.noise())?;
    let report = lbfgs_invert(&cfg, &inc, &data)?;
    let error = relative_l2_error(&report.q_est, &q_true)?;
    let j0 = report.objective_history[0];
    let j = *report.objective_history.last().expect("history holds J(q0)");

    std::fs::create_dir_all(&a.out)?;
    hfd::write_file(&a.out.join("q_true.hfd"), &HfdRecord::q_only(q_true))?;
    hfd::write_file(&a.out.join("q_est.hfd"), &HfdRecord::q_only(report.q_est.clone()))?;
    let result = json!({
        "status": report.status,
        "iterations": report.iterations_used,
        "evaluations": report.evaluations,
        "factorizations": report.factorizations,
        "objective_initial": j0,
        "objective_final": j,
        "relative_error": error,
        "objective_history": report.objective_history,
        "gradient_norm_history": report.gradient_norm_history,
        "wall_time_s": report.wall_time,
    });
    std::fs::write(
        a.out.join("report.json"),
        serde_json::to_string_pretty(&result).expect("report serializes") + "\n",
    )?;
    println!("status {}", report.status.as_str());
    println!("iterations {}", report.iterations_used);
    println!("objective {j0:.6e} -> {j:.6e}");
    println!("relative_error {error:.6e}");
    Ok(Outcome {
        config,
        result,
        failed: None,
    })
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<Outcome, CliError> {
    let grid = Grid2D::square(a.grid).map_err(|e| CliError::Usage(format!("--grid: {e}")))?;
    if !(a.eps > 0.0) || a.probes == 0 || a.directions == 0 {
        return Err(CliError::Usage(
            "--eps must be positive, --probes and --directions at least 1".into(),
        ));
    }
    let spec = |amplitude| ScattererSpec {
        kind: ScattererKind::SmoothedCircles,
        amplitude,
    };
    let q_true = spec(0.1).sample(derive_seed(a.seed, 0, 0), &grid)?;
    let q = spec(0.05).sample(derive_seed(a.seed, 1, 0), &grid)?;
    let inc = IncidentSet::uniform(a.k, a.directions)?;
    let data = synthesize_data(&q_true, &inc, 2, None)?;
    let mut cache = FactorizationCache::new();
    let (_, grad) = misfit_and_gradient(&q, &inc, &data, &mut cache, None)?;

    let mut worst = 0.0f64;
    let mut mismatches = Vec::with_capacity(a.probes);
    for p in 0..a.probes {
        let delta = sample_f_grf(derive_seed(a.seed, p as u64, 2), &grid)?.real_part();
        let adjoint: f64 = grad.values().iter().zip(delta.values()).map(|(g, d)| g * d).sum();
        let plus = misfit_and_gradient(&(&q + &delta.scale(a.eps)), &inc, &data, &mut cache, None)?.0;
        let minus = misfit_and_gradient(&(&q - &delta.scale(a.eps)), &inc, &data, &mut cache, None)?.0;
        let fd = (plus - minus) / (2.0 * a.eps);
        let rel = (adjoint - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
        mismatches.push(rel);
        worst = worst.max(rel);
    }
    println!("max_mismatch {worst:.6e}");
    let failed = (!(worst < a.tol)).then(|| format!("gradient mismatch {worst:e} exceeds {:e}", a.tol));
    Ok(Outcome {
        config: None,
        result: json!({ "max_mismatch": worst, "mismatches": mismatches }),
        failed,
    })
}

fn bench_cmd(a: &BenchArgs) -> Result<Outcome, CliError> {
    if a.repeats == 0 || !(a.k > 0.0) {
        return Err(CliError::Usage("--repeats must be at least 1 and --k positive".into()));
    }
    let mut rows = Vec::new();
    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "n", "assemble_ms", "factor_ms", "solve_ms"
    );
    for &n in &a.sizes {
        let grid = Grid2D::square(n).map_err(|e| CliError::Usage(format!("--sizes: {e}")))?;
        let q = reference_scatterer(&grid)?;
        let f = ComplexField::from_fn(grid, |x, y| {
            let r2 = (x - 0.3) * (x - 0.3) + (y - 0.6) * (y - 0.6);
            (-100.0 * r2).exp().into()
        })?;
        let (mut t_asm, mut t_fact, mut t_solve) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for _ in 0..a.repeats {
            let t = Instant::now();
            let sys = assemble(a.k, &q)?;
            t_asm = t_asm.min(t.elapsed().as_secs_f64());
            let t = Instant::now();
            let fact = factorize(&sys)?;
            t_fact = t_fact.min(t.elapsed().as_secs_f64());
            let t = Instant::now();
            solve(&fact, &f)?;
            t_solve = t_solve.min(t.elapsed().as_secs_f64());
        }
        println!(
            "{n:>6} {:>12.3} {:>12.3} {:>12.3}",
            t_asm * 1e3,
            t_fact * 1e3,
            t_solve * 1e3
        );
        rows.push(json!({ "n": n, "assemble_s": t_asm, "factorize_s": t_fact, "solve_s": t_solve }));
    }
    Ok(Outcome {
        config: None,
        result: json!({ "timings": rows }),
        failed: None,
    })
}
