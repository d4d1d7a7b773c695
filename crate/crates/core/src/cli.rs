//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a numerical or verification failure, 2 a usage,
//! input or I/O error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::angle::{angle_to_unit_field, winding_class, AngleField, HomotopyClass};
use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::functionals::{bienergy, Formulation};
use crate::io::{
    angle_from_total, read_fields_csv, to_json, write_fields_csv, write_json, write_pgm, write_quiver, RunConfig,
    RunReport, Timing, USpec,
};
use crate::lie::{classify, compare_expected, ClassifyOptions, LeftInvariantModel, Problem};
use crate::solver::{solve_homotopy_class, Preconditioner};
use crate::stability::{hessian_form, hessian_order_check, hessian_vs_energy_check};
use crate::torus::{LatticeSpec, ScalarField};
use crate::verify::{random_smooth_field, run_identity_suite};

pub const OUT_ENV: &str = "TORUS_BIHARMONIC_OUT";

#[derive(Debug, Parser)]
#[command(name = "torus-biharmonic", version, about = "Biharmonic unit vector fields on flat-conformal 2-tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the critical angle in a homotopy class and write outputs.
    Solve(SolveArgs),
    /// Evaluate the bienergy of an angle stored in a field CSV.
    Energy(EnergyArgs),
    /// Run the identity suite on one (u, θ) pair.
    Verify(VerifyArgs),
    /// Check the second variation at a solved angle.
    Stability(StabilityArgs),
    /// Classify left-invariant critical unit fields on a Lie group.
    Lie(LieArgs),
}

#[derive(Debug, Args, Clone, Default)]
struct GeometryArgs {
    /// `key = value` configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `unit-square` or generators as `d1x,d1y;d2x,d2y`.
    #[arg(long)]
    lattice: Option<String>,
    /// Grid points along both generators.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Conformal factor, e.g. "0.2*sin(2pi*x) + 0.1*cos(2pi*y)".
    #[arg(long, allow_hyphen_values = true, conflicts_with = "u_file")]
    u: Option<String>,
    /// File of n1*n2 samples of u, row-major.
    #[arg(long)]
    u_file: Option<PathBuf>,
    /// Homotopy class as two integers.
    #[arg(long, num_args = 2, value_names = ["M", "N"], allow_negative_numbers = true)]
    class: Option<Vec<i64>>,
}

#[derive(Debug, Args, Clone, Default)]
struct SolverArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// spectral_biharmonic or none.
    #[arg(long)]
    preconditioner: Option<String>,
    /// curved or flat_weighted.
    #[arg(long)]
    formulation: Option<String>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory (default `out`, or the TORUS_BIHARMONIC_OUT variable).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    no_fields: bool,
    #[arg(long)]
    no_heatmaps: bool,
    #[arg(long)]
    no_quiver: bool,
    #[arg(long)]
    quiver_stride: Option<usize>,
}

#[derive(Debug, Args)]
struct EnergyArgs {
    /// Field CSV written by `solve`.
    #[arg(long)]
    angle: PathBuf,
    /// Lattice generators; the grid size comes from the CSV, and so does u
    /// unless `--u` or `--u-file` is given.
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Seeds the periodic part of θ and the adjointness test functions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Number of random directions.
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Step of the second difference.
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct LieArgs {
    /// su2, sol3 or hyperbolic.
    #[arg(long)]
    model: String,
    /// su2 structure constants λ1 ≥ λ2 ≥ λ3 > 0.
    #[arg(long, num_args = 3, value_names = ["L1", "L2", "L3"])]
    lambda: Option<Vec<f64>>,
    /// Dimension of the hyperbolic space.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Curvature scale of the hyperbolic space (curvature −c²).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// harmonic-section, biharmonic-section or biharmonic-vector-field.
    #[arg(long)]
    problem: String,
    /// Compare against the closed-form solution set.
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Energy(a) => energy(a),
        Command::Verify(a) => verify(a),
        Command::Stability(a) => stability(a),
        Command::Lie(a) => lie(a),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::Incompatible(_) | Error::NotCritical(_) => 1,
        _ => 2,
    }
}

fn out_dir(args: &OutArgs) -> Result<PathBuf> {
    let dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn parse_lattice_generators(s: &str) -> Result<([f64; 2], [f64; 2])> {
    if s == "unit-square" || s == "unit_square" {
        return Ok(([1.0, 0.0], [0.0, 1.0]));
    }
    let bad = || Error::Parse(format!("--lattice expects 'unit-square' or 'd1x,d1y;d2x,d2y', got '{s}'"));
    let (a, b) = s.split_once(';').ok_or_else(bad)?;
    let pair = |t: &str| -> Result<[f64; 2]> {
        let v: Vec<f64> = t.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        if v.len() != 2 {
            return Err(bad());
        }
        Ok([v[0], v[1]])
    };
    Ok((pair(a)?, pair(b)?))
}

/// Defaults, then the config file, then flags.
fn build_config(g: &GeometryArgs, s: &SolverArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let (mut d1, mut d2, mut n1, mut n2) = (cfg.lattice.d1, cfg.lattice.d2, cfg.lattice.n1, cfg.lattice.n2);
    if let Some(l) = &g.lattice {
        (d1, d2) = parse_lattice_generators(l)?;
    }
    if let Some(n) = g.grid {
        n1 = n;
        n2 = n;
    }
    n1 = g.n1.unwrap_or(n1);
    n2 = g.n2.unwrap_or(n2);
    cfg.lattice = LatticeSpec::new(d1, d2, n1, n2)?;
    if let Some(u) = &g.u {
        cfg.u = USpec::Expr(u.parse()?);
    }
    if let Some(p) = &g.u_file {
        cfg.u = USpec::File(p.clone());
    }
    if let Some(c) = &g.class {
        cfg.class = HomotopyClass::new(c[0], c[1]);
    }
    if let Some(t) = s.tol {
        cfg.solver.tolerance = t;
    }
    if let Some(m) = s.max_iter {
        cfg.solver.max_iterations = Some(m);
    }
    if let Some(p) = &s.preconditioner {
        cfg.solver.preconditioner = p.parse::<Preconditioner>()?;
    }
    if let Some(f) = &s.formulation {
        cfg.solver.formulation = f.parse::<Formulation>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn structure(cfg: &RunConfig) -> Result<ConformalStructure> {
    ConformalStructure::new(cfg.u_field()?)
}

fn solve(a: SolveArgs) -> Result<bool> {
    let mut cfg = build_config(&a.geometry, &a.solver)?;
    if a.no_fields {
        cfg.outputs.fields = false;
    }
    if a.no_heatmaps {
        cfg.outputs.heatmaps = false;
    }
    if a.no_quiver {
        cfg.outputs.quiver = false;
    }
    if let Some(k) = a.quiver_stride {
        cfg.outputs.quiver_stride = k;
    }
    cfg.validate()?;
    let dir = out_dir(&a.out)?;
    let cs = structure(&cfg)?;
    let start = Instant::now();
    let (theta, report) = solve_homotopy_class(&cs, cfg.class, &cfg.solver)?;
    let elapsed = start.elapsed().as_secs_f64();
    let output_class = winding_class(&angle_to_unit_field(&theta))?;
    let run = RunReport::new(&report, output_class, cs.resolution_fraction(), &cfg);
    write_json(&dir.join("report.json"), &run)?;
    write_json(&dir.join("timing.json"), &Timing { wall_time: elapsed })?;
    std::fs::write(dir.join("config.txt"), cfg.emit())
        .map_err(|e| Error::Io(format!("cannot write config echo: {e}")))?;
    if cfg.outputs.fields {
        write_fields_csv(&dir.join("fields.csv"), &cs, &theta)?;
    }
    if cfg.outputs.heatmaps {
        write_pgm(&dir.join("u.pgm"), cs.u())?;
        write_pgm(&dir.join("kg.pgm"), cs.kg())?;
        write_pgm(&dir.join("alpha.pgm"), &theta.periodic)?;
    }
    if cfg.outputs.quiver {
        write_quiver(&dir.join("quiver.csv"), &cs, &theta, cfg.outputs.quiver_stride)?;
    }
    println!(
        "class {} solved in {} iterations: relative residual {:.3e}, bienergy {:.12e}, output class {}",
        report.class, report.iterations, report.final_relative_residual, report.energy.bienergy, output_class
    );
    Ok(report.converged && output_class == cfg.class)
}

fn energy(a: EnergyArgs) -> Result<bool> {
    let table = read_fields_csv(&a.angle)?;
    let mut g = a.geometry.clone();
    let mismatch = g.grid.is_some_and(|n| n != table.n1 || n != table.n2)
        || g.n1.is_some_and(|n| n != table.n1)
        || g.n2.is_some_and(|n| n != table.n2);
    if mismatch {
        return Err(Error::InvalidArgument(format!(
            "grid flags disagree with the {}x{} grid in {}",
            table.n1,
            table.n2,
            a.angle.display()
        )));
    }
    g.grid = None;
    g.n1 = Some(table.n1);
    g.n2 = Some(table.n2);
    let explicit_u = g.u.is_some() || g.u_file.is_some();
    let cfg = build_config(&g, &SolverArgs::default())?;
    let u = if explicit_u { cfg.u_field()? } else { ScalarField::new(cfg.lattice, table.u.clone())? };
    let cs = ConformalStructure::new(u)?;
    let theta = angle_from_total(cfg.lattice, &table.theta)?;
    let e = bienergy(&cs, &theta)?;
    #[derive(Serialize)]
    struct EnergyOut {
        class: HomotopyClass,
        energy: crate::functionals::EnergyBreakdown,
    }
    print!("{}", to_json(&EnergyOut { class: theta.cls, energy: e })?);
    Ok(true)
}

fn verify(a: VerifyArgs) -> Result<bool> {
    let cfg = build_config(&a.geometry, &SolverArgs::default())?;
    let dir = out_dir(&a.out)?;
    let cs = structure(&cfg)?;
    let theta = AngleField::new(cfg.class, random_smooth_field(cfg.lattice, a.seed, 3, 0.5));
    let report = run_identity_suite(&cs, &theta, a.seed)?;
    for c in &report.checks {
        println!(
            "{} {:<20} {:.3e} (tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    write_json(&dir.join("verify.json"), &report)?;
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
struct StabilitySample {
    quadratic_value: f64,
    second_difference: f64,
    gap: f64,
}

#[derive(Debug, Serialize)]
struct StabilityReport {
    class: HomotopyClass,
    h: f64,
    samples: Vec<StabilitySample>,
    min_quadratic_value: f64,
    max_relative_gap: f64,
    order_ratio: f64,
    passed: bool,
}

fn stability(a: StabilityArgs) -> Result<bool> {
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Error::InvalidArgument(format!("--h must be positive, got {}", a.h)));
    }
    if a.samples == 0 {
        return Err(Error::InvalidArgument("--samples must be at least 1".into()));
    }
    let cfg = build_config(&a.geometry, &a.solver)?;
    let dir = out_dir(&a.out)?;
    let cs = structure(&cfg)?;
    let (theta, _) = solve_homotopy_class(&cs, cfg.class, &cfg.solver)?;
    let mut samples = Vec::new();
    let mut min_q = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    for k in 0..a.samples {
        let beta = random_smooth_field(cfg.lattice, a.seed.wrapping_add(k as u64), 3, 1.0);
        let s = hessian_vs_energy_check(&cs, &theta, &beta, a.h)?;
        min_q = min_q.min(hessian_form(&cs, &beta)?);
        max_gap = max_gap.max(s.gap / s.quadratic_value.abs().max(f64::MIN_POSITIVE));
        samples.push(StabilitySample {
            quadratic_value: s.quadratic_value,
            second_difference: s.second_difference,
            gap: s.gap,
        });
    }
    let beta = random_smooth_field(cfg.lattice, a.seed, 3, 1.0);
    let order = hessian_order_check(&cs, &theta, &beta, 1e-2)?;
    let passed = min_q >= 0.0 && max_gap <= 1e-4 && (3.5..=4.5).contains(&order.ratio);
    let report = StabilityReport {
        class: cfg.class,
        h: a.h,
        samples,
        min_quadratic_value: min_q,
        max_relative_gap: max_gap,
        order_ratio: order.ratio,
        passed,
    };
    println!(
        "{} min Hessian {:.6e}, max relative gap {:.3e} at h = {:.1e}, halving ratio {:.4}",
        if passed { "PASS" } else { "FAIL" },
        min_q,
        max_gap,
        a.h,
        order.ratio
    );
    write_json(&dir.join("stability.json"), &report)?;
    Ok(passed)
}

fn lie(a: LieArgs) -> Result<bool> {
    let model = match a.model.as_str() {
        "su2" => {
            let l = a.lambda.clone().unwrap_or_else(|| vec![1.0, 1.0, 1.0]);
            LeftInvariantModel::su2([l[0], l[1], l[2]])?
        }
        "sol3" => LeftInvariantModel::sol3(),
        "hyperbolic" => LeftInvariantModel::hyperbolic(a.n, a.c)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected su2, sol3 or hyperbolic)"
            )))
        }
    };
    let problem: Problem = a.problem.parse()?;
    let opts = ClassifyOptions { resolution: a.resolution, seed: a.seed, ..ClassifyOptions::default() };
    let dir = out_dir(&a.out)?;
    let (set, passed) = if a.compare {
        let r = compare_expected(&model, problem, &opts)?;
        for m in &r.matched {
            println!("matched  {} (deviation {:.1e})", m.expected, m.deviation);
        }
        for m in &r.missing {
            println!("missing  {m}");
        }
        for &i in &r.extra {
            let c = &r.set.components[i];
            println!("extra    {:?} dim {} center {:?}", c.kind, c.dim, c.center);
        }
        if r.exploratory {
            println!("no closed form for this case; classification reported as is");
        }
        println!("{}", if r.passed { "PASS" } else { "FAIL" });
        write_json(&dir.join("lie.json"), &r)?;
        (r.set, r.passed)
    } else {
        let set = classify(&model, problem, &opts)?;
        write_json(&dir.join("lie.json"), &set)?;
        (set, true)
    };
    for (i, c) in set.components.iter().enumerate() {
        println!(
            "component {i}: {:?} dim {} center {:?} radius {:.9} ({} points){}",
            c.kind,
            c.dim,
            c.center,
            c.radius,
            c.size,
            if c.degenerate { ", degenerate" } else { "" }
        );
    }
    for f in &set.flags {
        println!("flag: {f}");
    }
    Ok(passed && !set.flagged)
}
