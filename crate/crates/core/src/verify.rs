//! Pointwise and integral identities that tie the conformal, flat and frame
//! descriptions of a unit field together, packaged as pass/fail checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::angle::AngleField;
use crate::conformal::{
    flat_commutator_form, frame_connection, geodesic_defect, section_residual_pair, ConformalStructure,
};
use crate::error::{Error, Result};
use crate::functionals::Formulation;
use crate::solver::{apply_operator, section_rigidity_check};
use crate::torus::{derivative, rotate_j, LatticeSpec, ScalarField, VectorFieldFlat};

/// Pointwise identities are checked in max-norm against this bound.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

/// Random trigonometric polynomial with frequencies `|p|, |q| ≤ max_freq`
/// in lattice coordinates, amplitudes decaying like `1/(1+p²+q²)`, scaled to
/// max-norm `amplitude`.
pub fn random_smooth_field(lattice: LatticeSpec, seed: u64, max_freq: i32, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for p in -max_freq..=max_freq {
        for q in 0..=max_freq {
            if q == 0 && p <= 0 {
                continue;
            }
            let w = 1.0 / (1.0 + (p * p + q * q) as f64);
            terms.push((p as f64, q as f64, w * rng.gen_range(-1.0..1.0), w * rng.gen_range(-1.0..1.0)));
        }
    }
    let f = ScalarField::from_lattice_fn(lattice, |a, b| {
        terms
            .iter()
            .map(|(p, q, c, s)| {
                let ph = TAU * (p * a + q * b);
                c * ph.cos() + s * ph.sin()
            })
            .sum()
    });
    let m = f.max_abs();
    if m == 0.0 {
        f
    } else {
        f.scale(amplitude / m)
    }
}

fn max_diff(a: &VectorFieldFlat, b: &VectorFieldFlat) -> f64 {
    a.sub(b).max_abs()
}

/// `max |flat − e^{−3u}·curved|` over both components.
pub fn residual_scaling_defect(cs: &ConformalStructure, theta: &AngleField) -> Result<f64> {
    let (flat, curved) = section_residual_pair(cs, theta)?;
    let em3u = cs.u().map(|u| (-3.0 * u).exp());
    Ok(max_diff(&flat, &curved.scale_by(&em3u)))
}

/// Frame derivatives `S(f) = e^u ∂₁f`, `W(f) = e^u ∂₂f`.
fn frame_derivatives(cs: &ConformalStructure, f: &ScalarField) -> (ScalarField, ScalarField) {
    let eu = cs.u().map(f64::exp);
    (&eu * &derivative(f, 0, 1), &eu * &derivative(f, 1, 1))
}

/// Distance between the curved harmonic-section residual and
/// `(Δ_gθ − S(a) − W(b))·JV`.
pub fn tangential_formula_defect(cs: &ConformalStructure, theta: &AngleField) -> Result<f64> {
    let (_, curved) = section_residual_pair(cs, theta)?;
    let fc = frame_connection(cs);
    let (sa, _) = frame_derivatives(cs, &fc.a);
    let (_, wb) = frame_derivatives(cs, &fc.b);
    let coeff = &(&cs.laplacian_g_angle(theta) - &sa) - &wb;
    let jv = rotate_j(&cs.unit_field(theta));
    Ok(max_diff(&curved, &jv.scale_by(&coeff)))
}

/// Distance between `∇_V V − (div V)V` and `(−W(θ) − b)S + (a + S(θ))W`.
pub fn geodesic_formula_defect(cs: &ConformalStructure, theta: &AngleField) -> Result<f64> {
    if theta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let fc = frame_connection(cs);
    let eu = cs.u().map(f64::exp);
    let grad = theta.gradient();
    let s_theta = &eu * &grad.comp1;
    let w_theta = &eu * &grad.comp2;
    let (s, w) = cs.frame();
    let expected = s
        .scale_by(&(&(-&w_theta) - &fc.b))
        .add(&w.scale_by(&(&fc.a + &s_theta)));
    Ok(max_diff(&geodesic_defect(cs, theta), &expected))
}

/// `max |Ṽ(div JṼ) − JṼ(div Ṽ) − Δ₀θ|`.
pub fn flat_commutator_defect(theta: &AngleField) -> f64 {
    (&flat_commutator_form(theta) - &theta.laplacian()).max_abs()
}

/// `|⟨Pf, h⟩ − ⟨f, Ph⟩| / (‖Pf‖‖h‖ + ‖f‖‖Ph‖)` in `L²(dA_g)`.
pub fn adjointness_defect(cs: &ConformalStructure, f: &ScalarField, h: &ScalarField) -> Result<f64> {
    let pf = apply_operator(cs, f, Formulation::Curved)?;
    let ph = apply_operator(cs, h, Formulation::Curved)?;
    let ip = |x: &ScalarField, y: &ScalarField| cs.integrate_g(&(x * y));
    let norm = |x: &ScalarField| ip(x, x).sqrt();
    let scale = norm(&pf) * norm(h) + norm(f) * norm(&ph);
    Ok(if scale > 0.0 { (ip(&pf, h) - ip(f, &ph)).abs() / scale } else { 0.0 })
}

/// `|∫ k dA_g|`.
pub fn gauss_bonnet_defect(cs: &ConformalStructure) -> f64 {
    cs.integrate_g(cs.kg()).abs()
}

/// Runs every identity on one `(u, θ)` pair. Adjointness uses two seeded
/// random test functions.
pub fn run_identity_suite(cs: &ConformalStructure, theta: &AngleField, seed: u64) -> Result<VerifyReport> {
    let lattice = *cs.lattice();
    let f = random_smooth_field(lattice, seed.wrapping_mul(2).wrapping_add(1), 3, 1.0);
    let h = random_smooth_field(lattice, seed.wrapping_mul(2).wrapping_add(2), 3, 1.0);
    let rigidity = section_rigidity_check(cs)?;
    let checks = vec![
        IdentityCheck::at_most("residual-scaling", residual_scaling_defect(cs, theta)?, IDENTITY_TOLERANCE),
        IdentityCheck::at_most("tangential-formula", tangential_formula_defect(cs, theta)?, IDENTITY_TOLERANCE),
        IdentityCheck::at_most("geodesic-formula", geodesic_formula_defect(cs, theta)?, IDENTITY_TOLERANCE),
        IdentityCheck::at_most("flat-commutator", flat_commutator_defect(theta), IDENTITY_TOLERANCE),
        IdentityCheck::at_most("adjointness", adjointness_defect(cs, &f, &h)?, 1e-10),
        IdentityCheck::at_most("gauss-bonnet", gauss_bonnet_defect(cs), IDENTITY_TOLERANCE),
        IdentityCheck {
            name: "rigidity".into(),
            value: rigidity.smallest_rayleigh / rigidity.flat_value,
            tolerance: 1e-6,
            passed: rigidity.verdict,
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::HomotopyClass;

    #[test]
    fn random_field_is_seeded_and_scaled() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let a = random_smooth_field(l, 4, 3, 0.3);
        assert_eq!(a, random_smooth_field(l, 4, 3, 0.3));
        assert!((a.max_abs() - 0.3).abs() < 1e-15);
        assert!(a.mean().abs() < 1e-14);
    }

    #[test]
    fn flat_metric_passes_trivially() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = ConformalStructure::flat(l);
        let theta = AngleField::linear(HomotopyClass::new(1, -1), l);
        let r = run_identity_suite(&cs, &theta, 0).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(tangential_formula_defect(&cs, &theta).unwrap() < 1e-10);
    }

    #[test]
    fn curved_pair_passes() {
        let l = LatticeSpec::unit_square(64).unwrap();
        let cs = ConformalStructure::new(random_smooth_field(l, 9, 3, 0.3)).unwrap();
        let theta = AngleField::new(HomotopyClass::new(2, 1), random_smooth_field(l, 10, 3, 0.5));
        let r = run_identity_suite(&cs, &theta, 1).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn wrong_formula_is_detected() {
        // The geodesic formula with b's sign flipped must fail.
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = ConformalStructure::new(random_smooth_field(l, 2, 2, 0.3)).unwrap();
        let theta = AngleField::new(HomotopyClass::new(1, 0), random_smooth_field(l, 3, 2, 0.4));
        let fc = frame_connection(&cs);
        let (s, w) = cs.frame();
        let eu = cs.u().map(f64::exp);
        let grad = theta.gradient();
        let wrong = s
            .scale_by(&(&(-&(&eu * &grad.comp2)) + &fc.b))
            .add(&w.scale_by(&(&fc.a + &(&eu * &grad.comp1))));
        assert!(max_diff(&geodesic_defect(&cs, &theta), &wrong) > 1e-3);
        assert!(geodesic_formula_defect(&cs, &theta).unwrap() < 1e-9);
    }
}
