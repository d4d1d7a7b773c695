//! Linear Euler–Lagrange solves for the periodic part of the angle, the
//! rigidity check for biharmonic sections, and a descent cross-check.

use std::time::Instant;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::{AngleField, HomotopyClass};
use crate::conformal::{frame_connection, ConformalStructure};
use crate::error::{Error, Result};
use crate::functionals::{
    el_residual_curved, el_residual_flat, energy_with, EnergyBreakdown, Formulation,
};
use crate::torus::{
    divergence, forward, gradient, integrate, inverse, laplacian, laplacian_table, symbol_table,
    LatticeSpec, ScalarField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    SpectralBiharmonic,
    None,
}

impl std::str::FromStr for Preconditioner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral_biharmonic" | "spectral-biharmonic" | "spectral" => Ok(Self::SpectralBiharmonic),
            "none" => Ok(Self::None),
            _ => Err(Error::Parse(format!(
                "unknown preconditioner '{s}' (expected spectral_biharmonic or none)"
            ))),
        }
    }
}

impl std::fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SpectralBiharmonic => "spectral_biharmonic",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative residual target.
    pub tolerance: f64,
    /// Iteration cap; `None` means `10·n1·n2`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
    pub formulation: Formulation,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: None,
            preconditioner: Preconditioner::SpectralBiharmonic,
            formulation: Formulation::Curved,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn cap(&self, lattice: &LatticeSpec) -> usize {
        self.max_iterations.unwrap_or(10 * lattice.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub class: HomotopyClass,
    pub iterations: usize,
    pub final_relative_residual: f64,
    /// `max|R| / max|f|` for the returned angle.
    pub el_residual_maxnorm: f64,
    pub converged: bool,
    pub energy: EnergyBreakdown,
    pub residual_history: Vec<f64>,
    pub wall_time: f64,
}

/// `P h` in the chosen formulation.
///
/// * curved: `Δ̂Δ̂h − div̂(k² grad̂h)`, symmetric for `∫ · dA_g`
/// * flat-weighted: `Δ₀(e^{2u}Δ₀h) − div₀(k²∇₀h)`, symmetric for `∫ · dA₀`
///
/// Both are positive semidefinite with the constants as kernel.
pub fn apply_operator(
    cs: &ConformalStructure,
    h: &ScalarField,
    formulation: Formulation,
) -> Result<ScalarField> {
    if h.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    Ok(apply(cs, h, formulation))
}

fn apply(cs: &ConformalStructure, h: &ScalarField, formulation: Formulation) -> ScalarField {
    let k2 = cs.kg_squared();
    match formulation {
        Formulation::Curved => {
            let lap = cs.laplacian_g(h).expect("same lattice");
            let flux = cs.grad_g(h).expect("same lattice").scale_by(&k2);
            &cs.laplacian_g(&lap).expect("same lattice") - &cs.div_g(&flux).expect("same lattice")
        }
        Formulation::FlatWeighted => {
            &laplacian(&(cs.e2u() * &laplacian(h))) - &divergence(&gradient(h).scale_by(&k2))
        }
    }
}

/// Constant-coefficient model `ē Δ₀² − κ̄ div₀∇₀` of `P` with `ē = mean e^{2u}`,
/// `κ̄ = mean k²`, inverted in Fourier space on the mean-zero modes.
struct SpectralInverse {
    lattice: LatticeSpec,
    inv: Vec<f64>,
}

impl SpectralInverse {
    fn new(lattice: &LatticeSpec, e: f64, kappa: f64) -> Self {
        let lap = laplacian_table(lattice);
        let d1 = symbol_table(lattice, |k| Complex64::new(0.0, k[0]));
        let d2 = symbol_table(lattice, |k| Complex64::new(0.0, k[1]));
        let inv = lap
            .iter()
            .zip(d1.iter().zip(&d2))
            .map(|(l, (a, b))| {
                let sym = e * l.re * l.re + kappa * (a.norm_sqr() + b.norm_sqr());
                if sym > 0.0 {
                    1.0 / sym
                } else {
                    0.0
                }
            })
            .collect();
        Self { lattice: *lattice, inv }
    }

    fn apply(&self, r: &ScalarField) -> ScalarField {
        let mut hat = forward(r);
        for (c, m) in hat.iter_mut().zip(&self.inv) {
            *c *= m;
        }
        inverse(&self.lattice, hat)
    }
}

struct PcgOutcome {
    x: ScalarField,
    iterations: usize,
    relative_residual: f64,
    history: Vec<f64>,
    converged: bool,
}

/// Preconditioned conjugate gradients for `A x = f` on the complement of the
/// constants, in the inner product `Σ x y w`.
fn pcg(
    f: &ScalarField,
    weight: &ScalarField,
    apply_a: impl Fn(&ScalarField) -> ScalarField,
    precond: impl Fn(&ScalarField) -> ScalarField,
    tol: f64,
    max_iter: usize,
) -> PcgOutcome {
    let dot = |a: &ScalarField, b: &ScalarField| -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .zip(weight.samples())
            .map(|((x, y), w)| x * y * w)
            .sum()
    };
    let wsum: f64 = weight.samples().iter().sum();
    let project_range = |r: &ScalarField| {
        let c = dot(r, &ScalarField::constant(*r.lattice(), 1.0)) / wsum;
        r.map(|v| v - c)
    };
    let fnorm = dot(f, f).sqrt();
    let lattice = *f.lattice();
    let mut x = ScalarField::zeros(lattice);
    let mut history = vec![1.0];
    if fnorm == 0.0 {
        return PcgOutcome { x, iterations: 0, relative_residual: 0.0, history: vec![0.0], converged: true };
    }
    let mut r = project_range(f);
    let mut iterations = 0;
    let mut rel = dot(&r, &r).sqrt() / fnorm;
    // Restart from the true residual whenever the recurrence claims convergence.
    for _restart in 0..5 {
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while rel > tol && iterations < max_iter {
            let ap = apply_a(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let step = rz / pap;
            x = x.zip_map(&p, |a, b| a + step * b);
            r = project_range(&r.zip_map(&ap, |a, b| a - step * b));
            iterations += 1;
            rel = dot(&r, &r).sqrt() / fnorm;
            history.push(rel);
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p = z.zip_map(&p, |a, b| a + beta * b);
        }
        let mean = x.mean();
        x = x.map(|v| v - mean);
        r = project_range(&(f - &apply_a(&x)));
        rel = dot(&r, &r).sqrt() / fnorm;
        if rel <= tol || iterations >= max_iter {
            break;
        }
    }
    PcgOutcome { x, iterations, relative_residual: rel, history, converged: rel <= tol }
}

/// Right-hand side `f` with `R(θ_lin + α) = Pα − f`.
fn rhs(cs: &ConformalStructure, cls: HomotopyClass, formulation: Formulation) -> ScalarField {
    let lin = AngleField::linear(cls, *cs.lattice());
    let r = match formulation {
        Formulation::Curved => el_residual_curved(cs, &frame_connection(cs), &lin),
        Formulation::FlatWeighted => el_residual_flat(cs, &lin),
    };
    -r
}

fn is_constant(u: &ScalarField) -> bool {
    u.max() - u.min() <= 1e-14 * (1.0 + u.max_abs())
}

/// Solves `Pα = f` for the biharmonic unit field in class `cls`.
///
/// On success the returned angle is `θ_lin + α` with `α` of zero flat mean.
/// A constant conformal factor gives `α = 0` directly.
pub fn solve_homotopy_class(
    cs: &ConformalStructure,
    cls: HomotopyClass,
    opts: &SolveOptions,
) -> Result<(AngleField, SolveReport)> {
    opts.validate()?;
    let start = Instant::now();
    let lattice = *cs.lattice();
    let weight = match opts.formulation {
        Formulation::Curved => cs.volume_density().clone(),
        Formulation::FlatWeighted => ScalarField::constant(lattice, 1.0),
    };
    let mut f = rhs(cs, cls, opts.formulation);
    if is_constant(cs.u()) {
        f = ScalarField::zeros(lattice);
    }
    let frms = (integrate(&(&(&f * &f) * &weight)) / integrate(&weight)).sqrt();
    if frms > 0.0 {
        let mean = integrate(&(&f * &weight)) / integrate(&weight);
        if mean.abs() / frms > 1e-9 {
            return Err(Error::Incompatible(mean.abs() / frms));
        }
    }
    let model = SpectralInverse::new(&lattice, cs.e2u().mean(), cs.kg_squared().mean());
    let outcome = pcg(
        &f,
        &weight,
        |h| apply(cs, h, opts.formulation),
        |r| match opts.preconditioner {
            Preconditioner::SpectralBiharmonic => model.apply(&(r * &weight)),
            Preconditioner::None => r.clone(),
        },
        opts.tolerance,
        opts.cap(&lattice),
    );
    if !outcome.converged {
        return Err(Error::NotConverged {
            iterations: outcome.iterations,
            residual: outcome.relative_residual,
            history: outcome.history,
        });
    }
    let theta = AngleField::new(cls, outcome.x);
    let fc = frame_connection(cs);
    let residual = el_residual_curved(cs, &fc, &theta);
    let scale = rhs(cs, cls, Formulation::Curved).max_abs();
    let el_residual_maxnorm = if scale > 0.0 { residual.max_abs() / scale } else { residual.max_abs() };
    let report = SolveReport {
        class: cls,
        iterations: outcome.iterations,
        final_relative_residual: outcome.relative_residual,
        el_residual_maxnorm,
        converged: true,
        energy: energy_with(cs, &fc, &theta),
        residual_history: outcome.history,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((theta, report))
}

/// Operator `h ↦ Δ₀(e^{2u}Δ₀h)` whose kernel decides whether a biharmonic
/// unit section must be harmonic.
fn section_operator(cs: &ConformalStructure, h: &ScalarField) -> ScalarField {
    laplacian(&(cs.e2u() * &laplacian(h)))
}

/// `⟨Qh, h⟩ / ⟨h, h⟩` for `Q h = Δ₀(e^{2u}Δ₀h)`; zero for constants.
pub fn rayleigh_quotient(cs: &ConformalStructure, h: &ScalarField) -> Result<f64> {
    if h.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let hh = integrate(&(h * h));
    if hh == 0.0 {
        return Err(Error::InvalidArgument("Rayleigh quotient of the zero field".into()));
    }
    Ok(integrate(&(&section_operator(cs, h) * h)) / hh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub smallest_rayleigh: f64,
    /// Smallest mean-zero eigenvalue of `Δ₀²` on the same lattice.
    pub flat_value: f64,
    pub verdict: bool,
    pub iterations: usize,
}

/// Smallest mean-zero Rayleigh quotient of `Δ₀(e^{2u}Δ₀ ·)` by inverse
/// iteration. A positive value means the only angles with
/// `Δ₀(e^{2u}Δ₀α) = 0` are constants.
pub fn section_rigidity_check(cs: &ConformalStructure) -> Result<RigidityReport> {
    let lattice = *cs.lattice();
    let flat_value = laplacian_table(&lattice)
        .iter()
        .map(|l| l.re * l.re)
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let model = SpectralInverse::new(&lattice, cs.e2u().mean(), 0.0);
    let ones = ScalarField::constant(lattice, 1.0);
    let mut x = ScalarField::from_lattice_fn(lattice, |a, b| {
        use std::f64::consts::TAU;
        (TAU * a).cos() + 0.7 * (TAU * b).sin() + 0.3 * (TAU * (a + b)).cos()
    });
    let mut quotient = rayleigh_quotient(cs, &x)?;
    let mut iterations = 0;
    for it in 1..=200 {
        iterations = it;
        // The quotient is evaluated directly, so the inner solve only has to
        // be accurate enough to keep the iteration contracting.
        let out = pcg(&x, &ones, |h| section_operator(cs, h), |r| model.apply(r), 1e-12, 10 * lattice.len());
        if out.relative_residual > 1e-6 {
            return Err(Error::NotConverged {
                iterations: out.iterations,
                residual: out.relative_residual,
                history: out.history,
            });
        }
        let norm = out.x.rms();
        x = out.x.scale(1.0 / norm);
        let q = rayleigh_quotient(cs, &x)?;
        let done = (q - quotient).abs() <= 1e-12 * q.abs();
        quotient = q;
        if done {
            break;
        }
    }
    Ok(RigidityReport {
        smallest_rayleigh: quotient,
        flat_value,
        verdict: quotient > 1e-6 * flat_value,
        iterations,
    })
}

/// Backtracking rule for [`descent_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub initial_step: f64,
    pub shrink: f64,
    /// Steps below this abort the search.
    pub min_step: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self { armijo: 1e-4, initial_step: 1.0, shrink: 0.5, min_step: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub theta: AngleField,
    pub energy_trace: Vec<f64>,
    pub stalled: bool,
    pub converged: bool,
}

/// Gradient descent on `G` over the periodic part, with the gradient `2R`
/// measured in the Sobolev metric of the constant-coefficient model and
/// Armijo backtracking. Stops once the predicted decrease falls below
/// `1e−13·max(1, G)`.
pub fn descent_oracle(
    cs: &ConformalStructure,
    cls: HomotopyClass,
    steps: usize,
    rule: StepRule,
) -> Result<DescentResult> {
    if !(rule.armijo > 0.0 && rule.armijo < 1.0 && rule.shrink > 0.0 && rule.shrink < 1.0) {
        return Err(Error::InvalidArgument("step rule constants must lie in (0, 1)".into()));
    }
    let lattice = *cs.lattice();
    let fc = frame_connection(cs);
    let model = SpectralInverse::new(&lattice, cs.e2u().mean(), cs.kg_squared().mean());
    let mut theta = AngleField::linear(cls, lattice);
    let mut energy = energy_with(cs, &fc, &theta).bienergy;
    let mut trace = vec![energy];
    let (mut stalled, mut converged) = (false, false);
    for _ in 0..steps {
        let grad = el_residual_curved(cs, &fc, &theta).scale(2.0);
        let dir = model.apply(&(&grad * cs.volume_density())).scale(0.5);
        let slope = cs.integrate_g(&(&grad * &dir));
        if slope <= 1e-13 * energy.max(1.0) {
            converged = true;
            break;
        }
        let mut t = rule.initial_step;
        loop {
            let trial = theta.perturbed(&dir, -t);
            let e = energy_with(cs, &fc, &trial).bienergy;
            if e <= energy - rule.armijo * t * slope {
                theta = trial;
                energy = e;
                trace.push(e);
                break;
            }
            t *= rule.shrink;
            if t < rule.min_step {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
    }
    let mean = theta.periodic.mean();
    theta.periodic = theta.periodic.map(|v| v - mean);
    Ok(DescentResult { theta, energy_trace: trace, stalled, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::{angle_to_unit_field, winding_class};
    use crate::functionals::bienergy;
    use crate::verify::random_smooth_field;
    use std::f64::consts::TAU;

    fn cs_from(l: LatticeSpec, f: impl Fn(f64, f64) -> f64) -> ConformalStructure {
        ConformalStructure::new(ScalarField::from_lattice_fn(l, f)).unwrap()
    }

    #[test]
    fn operator_kills_constants_and_is_bilaplacian_when_flat() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = cs_from(l, |a, b| 0.2 * (TAU * a).sin() + 0.1 * (TAU * b).cos());
        for f in [Formulation::Curved, Formulation::FlatWeighted] {
            assert!(apply_operator(&cs, &ScalarField::constant(l, 2.0), f).unwrap().max_abs() < 1e-9);
        }
        let flat = ConformalStructure::flat(l);
        let h = ScalarField::from_fn(l, |x, _| (TAU * x).sin());
        let ph = apply_operator(&flat, &h, Formulation::Curved).unwrap();
        assert!((&ph - &h.scale(TAU.powi(4))).max_abs() <= 1e-9 * TAU.powi(4));
    }

    #[test]
    fn operator_symmetric_in_its_measure() {
        let l = LatticeSpec::new([1.0, 0.0], [0.3, 0.8], 32, 32).unwrap();
        let cs = cs_from(l, |a, b| 0.25 * (TAU * a).cos() * (TAU * b).sin());
        let h1 = ScalarField::from_lattice_fn(l, |a, b| (TAU * a).sin() + (TAU * (a - b)).cos());
        let h2 = ScalarField::from_lattice_fn(l, |a, b| (TAU * b).sin() * (TAU * a).sin().exp());
        for f in [Formulation::Curved, Formulation::FlatWeighted] {
            let w = match f {
                Formulation::Curved => cs.volume_density().clone(),
                Formulation::FlatWeighted => ScalarField::constant(l, 1.0),
            };
            let lhs = integrate(&(&(&apply(&cs, &h1, f) * &h2) * &w));
            let rhs = integrate(&(&(&h1 * &apply(&cs, &h2, f)) * &w));
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs());
        }
    }

    #[test]
    fn operator_symmetric_and_nonnegative_on_random_fields() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = ConformalStructure::new(random_smooth_field(l, 9, 3, 0.3)).unwrap();
        for f in [Formulation::Curved, Formulation::FlatWeighted] {
            let w = match f {
                Formulation::Curved => cs.volume_density().clone(),
                Formulation::FlatWeighted => ScalarField::constant(l, 1.0),
            };
            let ip = |x: &ScalarField, y: &ScalarField| integrate(&(&(x * y) * &w));
            for k in 0..10 {
                let h1 = random_smooth_field(l, 100 + k, 4, 1.0);
                let h2 = random_smooth_field(l, 200 + k, 4, 1.0);
                let (p1, p2) = (apply(&cs, &h1, f), apply(&cs, &h2, f));
                let scale = ip(&p1, &p1).sqrt() * ip(&h2, &h2).sqrt();
                assert!((ip(&p1, &h2) - ip(&h1, &p2)).abs() <= 1e-9 * scale);
            }
            for k in 0..50 {
                let h = random_smooth_field(l, 300 + k, 4, 1.0);
                assert!(ip(&apply(&cs, &h, f), &h) >= 0.0);
            }
        }
    }

    #[test]
    fn flat_torus_solution_is_linear() {
        let l = LatticeSpec::unit_square(16).unwrap();
        let (th, rep) = solve_homotopy_class(
            &ConformalStructure::flat(l),
            HomotopyClass::new(2, -1),
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(th.periodic.max_abs(), 0.0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn solve_lowers_energy_and_keeps_class() {
        let l = LatticeSpec::unit_square(64).unwrap();
        let cs = cs_from(l, |a, _| 0.2 * (TAU * a).sin());
        let cls = HomotopyClass::new(1, 0);
        let (th, rep) = solve_homotopy_class(&cs, cls, &SolveOptions::default()).unwrap();
        assert!(rep.final_relative_residual <= 1e-10);
        assert!(rep.el_residual_maxnorm <= 1e-9, "{}", rep.el_residual_maxnorm);
        let lin = bienergy(&cs, &AngleField::linear(cls, l)).unwrap().bienergy;
        assert!(rep.energy.bienergy <= lin);
        assert_eq!(winding_class(&angle_to_unit_field(&th)).unwrap(), cls);
    }

    #[test]
    fn formulations_give_the_same_field() {
        let l = LatticeSpec::unit_square(48).unwrap();
        let cs = cs_from(l, |a, b| 0.15 * (TAU * a).sin() * (TAU * b).cos() + 0.1 * (TAU * b).sin());
        let cls = HomotopyClass::new(-1, 1);
        let (a, _) = solve_homotopy_class(&cs, cls, &SolveOptions::default()).unwrap();
        let opts = SolveOptions { formulation: Formulation::FlatWeighted, ..Default::default() };
        let (b, _) = solve_homotopy_class(&cs, cls, &opts).unwrap();
        let (va, vb) = (angle_to_unit_field(&a), angle_to_unit_field(&b));
        assert!(va.sub(&vb).max_abs() < 1e-6);
    }

    #[test]
    fn unpreconditioned_solve_reaches_same_answer() {
        let l = LatticeSpec::unit_square(16).unwrap();
        let cs = cs_from(l, |a, b| 0.1 * (TAU * a).cos() * (TAU * b).sin());
        let cls = HomotopyClass::new(0, 1);
        let (a, ra) = solve_homotopy_class(&cs, cls, &SolveOptions::default()).unwrap();
        let opts = SolveOptions { preconditioner: Preconditioner::None, ..Default::default() };
        let (b, rb) = solve_homotopy_class(&cs, cls, &opts).unwrap();
        assert!(rb.iterations > ra.iterations);
        let diff = (&a.periodic - &b.periodic).max_abs();
        assert!(diff < 1e-7, "{diff} {} {}", ra.iterations, rb.iterations);
    }

    #[test]
    fn iteration_cap_reports_history() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = cs_from(l, |a, b| 0.3 * (TAU * a).cos() * (TAU * b).cos());
        let opts = SolveOptions {
            max_iterations: Some(2),
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        match solve_homotopy_class(&cs, HomotopyClass::new(1, 1), &opts) {
            Err(Error::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rigidity_flat_value_and_kernel() {
        let l = LatticeSpec::unit_square(16).unwrap();
        let flat = ConformalStructure::flat(l);
        let rep = section_rigidity_check(&flat).unwrap();
        assert!((rep.smallest_rayleigh - TAU.powi(4)).abs() <= 1e-8 * TAU.powi(4));
        assert!((rep.flat_value - TAU.powi(4)).abs() <= 1e-9 * TAU.powi(4));
        assert!(rep.verdict);
        assert_eq!(rayleigh_quotient(&flat, &ScalarField::constant(l, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn rigidity_with_curvature() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let rep = section_rigidity_check(&cs_from(l, |_, b| 0.3 * (TAU * b).cos())).unwrap();
        assert!(rep.smallest_rayleigh > 0.0 && rep.verdict);
    }

    #[test]
    fn descent_matches_linear_solve() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = cs_from(l, |a, b| 0.2 * (TAU * a).sin() * (TAU * b).cos());
        let cls = HomotopyClass::new(0, 1);
        let d = descent_oracle(&cs, cls, 2000, StepRule::default()).unwrap();
        assert!(d.converged && !d.stalled);
        assert!(d.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        let (th, rep) = solve_homotopy_class(&cs, cls, &SolveOptions::default()).unwrap();
        let e = *d.energy_trace.last().unwrap();
        assert!((e - rep.energy.bienergy).abs() <= 1e-6 * rep.energy.bienergy);
        assert!((&d.theta.periodic - &th.periodic).max_abs() < 1e-5);
    }

    #[test]
    fn descent_on_flat_torus_stays_put() {
        let l = LatticeSpec::unit_square(16).unwrap();
        let d = descent_oracle(&ConformalStructure::flat(l), HomotopyClass::new(1, 2), 10, StepRule::default()).unwrap();
        assert!(d.converged);
        assert_eq!(d.energy_trace, vec![0.0]);
        assert_eq!(d.theta.periodic.max_abs(), 0.0);
    }
}
