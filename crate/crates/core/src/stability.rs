//! Second variation of the bienergy at critical angles.

use serde::{Deserialize, Serialize};

use crate::angle::AngleField;
use crate::conformal::{frame_connection, ConformalStructure};
use crate::error::{Error, Result};
use crate::functionals::{energy_with, unit_variation};
use crate::torus::ScalarField;

/// Relative Euler–Lagrange residual above which an angle is not treated as
/// critical.
pub const CRITICALITY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSample {
    pub beta: ScalarField,
    pub quadratic_value: f64,
    pub second_difference: f64,
    pub gap: f64,
}

/// `2∫(Δ̂β)² dA_g + 2∫k²‖grad̂β‖²_g dA_g`, the second derivative of `G`
/// along `θ + tβ`.
pub fn hessian_form(cs: &ConformalStructure, beta: &ScalarField) -> Result<f64> {
    let lap = cs.laplacian_g(beta)?;
    let grad = cs.grad_g(beta)?;
    let bend = cs.metric_inner(&grad, &grad);
    Ok(2.0 * cs.integrate_g(&(&lap * &lap)) + 2.0 * cs.integrate_g(&(&cs.kg_squared() * &bend)))
}

/// `‖R‖ / (‖Δ̂(Δ̂θ − div̂Z)‖ + ‖div̂(k²(grad̂θ + Z))‖ + (2π/ℓ)⁴‖1‖)` in
/// `L²(dA_g)`, with `ℓ²` the flat area: the residual against the two terms
/// that cancel in it, floored by the lowest bi-Laplacian eigenvalue for
/// angles at which both terms vanish.
pub fn criticality(cs: &ConformalStructure, theta: &AngleField) -> Result<f64> {
    if theta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let fc = frame_connection(cs);
    let inner = &cs.laplacian_g_angle(theta) - &cs.div_g(&fc.z)?;
    let bending = cs.laplacian_g(&inner)?;
    let flux = cs.div_g(&cs.grad_g_angle(theta).add(&fc.z).scale_by(&cs.kg_squared()))?;
    let r = &bending - &flux;
    let norm = |f: &ScalarField| cs.integrate_g(&(f * f)).sqrt();
    let area = cs.lattice().area();
    let lowest = std::f64::consts::TAU.powi(4) / (area * area);
    let floor = lowest * cs.integrate_g(&ScalarField::constant(*cs.lattice(), 1.0)).sqrt();
    let scale = norm(&bending) + norm(&flux) + floor;
    Ok(if scale > 0.0 { norm(&r) / scale } else { 0.0 })
}

/// Compares [`hessian_form`] with the central second difference of `G`
/// along the unit-field variation `θ + arctan(tβ)`. The velocity of that
/// path is `β` and its acceleration vanishes, so at a critical point the two
/// agree up to `(2h²/3)·|H(β, β³)|`.
pub fn hessian_vs_energy_check(
    cs: &ConformalStructure,
    theta_star: &AngleField,
    beta: &ScalarField,
    h: f64,
) -> Result<HessianSample> {
    if beta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let c = criticality(cs, theta_star)?;
    if c > CRITICALITY_THRESHOLD {
        return Err(Error::NotCritical(c));
    }
    let fc = frame_connection(cs);
    let g = |t: f64| energy_with(cs, &fc, &unit_variation(theta_star, beta, t)).bienergy;
    let second_difference = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
    let quadratic_value = hessian_form(cs, beta)?;
    Ok(HessianSample {
        beta: beta.clone(),
        quadratic_value,
        second_difference,
        gap: (quadratic_value - second_difference).abs(),
    })
}

/// Gaps at `h` and `h/2` and their ratio, which tends to 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianOrder {
    pub gap_h: f64,
    pub gap_half: f64,
    pub ratio: f64,
}

pub fn hessian_order_check(
    cs: &ConformalStructure,
    theta_star: &AngleField,
    beta: &ScalarField,
    h: f64,
) -> Result<HessianOrder> {
    let a = hessian_vs_energy_check(cs, theta_star, beta, h)?.gap;
    let b = hessian_vs_energy_check(cs, theta_star, beta, h / 2.0)?.gap;
    Ok(HessianOrder { gap_h: a, gap_half: b, ratio: a / b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::HomotopyClass;
    use crate::solver::{solve_homotopy_class, SolveOptions};
    use crate::torus::LatticeSpec;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn solved(n: usize) -> (ConformalStructure, AngleField) {
        let l = LatticeSpec::unit_square(n).unwrap();
        let cs = ConformalStructure::new(ScalarField::from_fn(l, |x, _| 0.2 * (TAU * x).sin())).unwrap();
        let (th, _) = solve_homotopy_class(&cs, HomotopyClass::new(1, 0), &SolveOptions::default()).unwrap();
        (cs, th)
    }

    #[test]
    fn constants_are_null_directions() {
        let (cs, _) = solved(32);
        let v = hessian_form(&cs, &ScalarField::constant(*cs.lattice(), 0.7)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn flat_single_mode_value() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let beta = ScalarField::from_fn(l, |x, _| (TAU * x).sin());
        let v = hessian_form(&ConformalStructure::flat(l), &beta).unwrap();
        assert!((v - TAU.powi(4)).abs() <= 1e-10 * TAU.powi(4));
    }

    #[test]
    fn zero_direction_has_zero_gap() {
        let (cs, th) = solved(32);
        let s = hessian_vs_energy_check(&cs, &th, &ScalarField::zeros(*cs.lattice()), 1e-3).unwrap();
        assert_eq!(s.gap, 0.0);
    }

    #[test]
    fn second_difference_matches_at_solution() {
        let (cs, th) = solved(64);
        let beta = ScalarField::from_fn(*cs.lattice(), |x, y| (TAU * y).sin() + 0.4 * (TAU * (x + y)).cos());
        let s = hessian_vs_energy_check(&cs, &th, &beta, 1e-3).unwrap();
        assert!(s.gap / s.quadratic_value <= 1e-4, "{s:?}");
        let o = hessian_order_check(&cs, &th, &beta, 1e-2).unwrap();
        assert!((3.5..=4.5).contains(&o.ratio), "{o:?}");
    }

    #[test]
    fn refuses_non_critical_angles() {
        let (cs, th) = solved(32);
        let off = th.perturbed(&ScalarField::from_fn(*cs.lattice(), |x, _| (TAU * x).cos()), 0.1);
        let beta = ScalarField::constant(*cs.lattice(), 1.0);
        assert!(matches!(
            hessian_vs_energy_check(&cs, &off, &beta, 1e-3),
            Err(Error::NotCritical(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn hessian_is_nonnegative(c in proptest::collection::vec(-1.0f64..1.0, 6), amp in 0.0f64..0.4) {
            let l = LatticeSpec::unit_square(16).unwrap();
            let cs = ConformalStructure::new(ScalarField::from_fn(l, |x, y| amp * (TAU * x).cos() * (TAU * y).sin())).unwrap();
            let beta = ScalarField::from_fn(l, |x, y| {
                c[0] * (TAU * x).sin() + c[1] * (TAU * y).cos() + c[2] * (TAU * (x + y)).sin()
                    + c[3] * (2.0 * TAU * x).cos() + c[4] * (TAU * (x - 2.0 * y)).sin() + c[5]
            });
            prop_assert!(hessian_form(&cs, &beta).unwrap() >= -1e-14);
        }
    }
}
