//! Bienergy of unit vector fields on the torus and its first variation.
//!
//! With `Δ̂`, `grad̂`, `div̂` the operators of `g` and `Z` from the canonical
//! frame,
//!
//! ```text
//! G(θ) = ∫ (Δ̂θ − div̂Z)² dA_g + ∫ k² ‖grad̂θ + Z‖²_g dA_g
//! ```
//!
//! measured with the plain area element of `g`. Every energy reported by this
//! crate is on that scale.

use serde::{Deserialize, Serialize};

use crate::angle::AngleField;
use crate::conformal::{
    frame_connection, geodesic_defect, section_residual_pair, ConformalStructure, FrameConnection,
};
use crate::error::{Error, Result};
use crate::torus::{divergence, gradient, integrate, laplacian, rotate_j, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bienergy: f64,
    pub vertical_bienergy: f64,
    pub horizontal_part: f64,
    pub total_bending: f64,
    /// Area of the torus in the metric `g`.
    pub area: f64,
}

/// Which coordinate picture the Euler–Lagrange operator is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Operators of `g`; residuals pair with `β` against `dA_g`.
    #[default]
    Curved,
    /// Flat operators with weight `e^{2u}`; residuals pair against `dA₀`.
    FlatWeighted,
}

impl std::str::FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curved" => Ok(Self::Curved),
            "flat_weighted" | "flat-weighted" | "flat" => Ok(Self::FlatWeighted),
            _ => Err(Error::Parse(format!(
                "unknown formulation '{s}' (expected curved or flat_weighted)"
            ))),
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Curved => "curved",
            Self::FlatWeighted => "flat_weighted",
        })
    }
}

fn check(cs: &ConformalStructure, theta: &AngleField) -> Result<()> {
    if theta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    Ok(())
}

pub(crate) fn energy_with(
    cs: &ConformalStructure,
    fc: &FrameConnection,
    theta: &AngleField,
) -> EnergyBreakdown {
    let div_z = cs.div_g(&fc.z).expect("same lattice");
    let vert = &cs.laplacian_g_angle(theta) - &div_z;
    let bend = cs.metric_inner(&cs.grad_g_angle(theta).add(&fc.z), &cs.grad_g_angle(theta).add(&fc.z));
    let vertical_bienergy = cs.integrate_g(&(&vert * &vert));
    let horizontal_part = cs.integrate_g(&(&cs.kg_squared() * &bend));
    EnergyBreakdown {
        bienergy: vertical_bienergy + horizontal_part,
        vertical_bienergy,
        horizontal_part,
        total_bending: 0.5 * cs.integrate_g(&bend),
        area: cs.integrate_g(&ScalarField::constant(*cs.lattice(), 1.0)),
    }
}

pub fn bienergy(cs: &ConformalStructure, theta: &AngleField) -> Result<EnergyBreakdown> {
    check(cs, theta)?;
    if !cs.is_resolved() {
        log::warn!("evaluating bienergy on an under-resolved metric");
    }
    Ok(energy_with(cs, &frame_connection(cs), theta))
}

/// `G` assembled from the tension components themselves: the squared
/// harmonic-section residual plus `‖S(V)‖²` with `S(V) = k(∇_V V − div V·V)`.
pub fn bienergy_from_tension(cs: &ConformalStructure, theta: &AngleField) -> Result<f64> {
    check(cs, theta)?;
    let (_, curved) = section_residual_pair(cs, theta)?;
    let sv = geodesic_defect(cs, theta).scale_by(cs.kg());
    Ok(cs.integrate_g(&(&cs.metric_inner(&curved, &curved) + &cs.metric_inner(&sv, &sv))))
}

/// Bienergy in flat coordinates:
/// `∫ e^{2u}(Δ₀α)² + k²|∇₀θ − J∇₀u|² dA₀`.
pub fn bienergy_flat(cs: &ConformalStructure, theta: &AngleField) -> Result<f64> {
    check(cs, theta)?;
    let lap = theta.laplacian();
    let shifted = theta.gradient().sub(&rotate_j(&gradient(cs.u())));
    let dens = &(&(cs.e2u() * &lap) * &lap) + &(&cs.kg_squared() * &shifted.norm_squared());
    Ok(integrate(&dens))
}

/// Euler–Lagrange residual of `G`; `dG(θ)[β] = 2 ⟨β, R⟩` with the pairing
/// of the chosen formulation.
///
/// * curved: `Δ̂(Δ̂θ − div̂Z) − div̂(k²(grad̂θ + Z))`
/// * flat-weighted: `Δ₀(e^{2u}Δ₀α) − div₀(k²∇₀θ) + div₀(k² J∇₀u)`
///
/// The two are related by `R_curved = e^{2u} R_flat`.
pub fn el_residual(
    cs: &ConformalStructure,
    theta: &AngleField,
    formulation: Formulation,
) -> Result<ScalarField> {
    check(cs, theta)?;
    Ok(match formulation {
        Formulation::Curved => el_residual_curved(cs, &frame_connection(cs), theta),
        Formulation::FlatWeighted => el_residual_flat(cs, theta),
    })
}

pub(crate) fn el_residual_curved(
    cs: &ConformalStructure,
    fc: &FrameConnection,
    theta: &AngleField,
) -> ScalarField {
    let div_z = cs.div_g(&fc.z).expect("same lattice");
    let inner = &cs.laplacian_g_angle(theta) - &div_z;
    let flux = cs.grad_g_angle(theta).add(&fc.z).scale_by(&cs.kg_squared());
    &cs.laplacian_g(&inner).expect("same lattice") - &cs.div_g(&flux).expect("same lattice")
}

pub(crate) fn el_residual_flat(cs: &ConformalStructure, theta: &AngleField) -> ScalarField {
    let k2 = cs.kg_squared();
    let bi = laplacian(&(cs.e2u() * &theta.laplacian()));
    let shifted = theta.gradient().sub(&rotate_j(&gradient(cs.u())));
    &bi - &divergence(&shifted.scale_by(&k2))
}

/// `∫ β R` in the measure that turns `R` into the gradient of `G`.
pub fn residual_pairing(
    cs: &ConformalStructure,
    beta: &ScalarField,
    residual: &ScalarField,
    formulation: Formulation,
) -> f64 {
    match formulation {
        Formulation::Curved => cs.integrate_g(&(beta * residual)),
        Formulation::FlatWeighted => integrate(&(beta * residual)),
    }
}

/// The unit-field variation `V_t = (V + tβ JV)/|V + tβ JV|`, whose angle is
/// `θ + arctan(tβ)`. Its velocity at `t = 0` is `β JV`.
pub fn unit_variation(theta: &AngleField, beta: &ScalarField, t: f64) -> AngleField {
    AngleField::new(
        theta.cls,
        theta.periodic.zip_map(beta, |a, b| a + (t * b).atan()),
    )
}

/// First variation of `G` along `β`: the pairing `2⟨β, R⟩` against the
/// central difference `[G(θ_h) − G(θ_{−h})]/(2h)` along [`unit_variation`].
/// The gap is `O(h²)`.
pub fn directional_derivative_check(
    cs: &ConformalStructure,
    theta: &AngleField,
    beta: &ScalarField,
    h: f64,
) -> Result<(f64, f64)> {
    check(cs, theta)?;
    if beta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let fc = frame_connection(cs);
    let r = el_residual_curved(cs, &fc, theta);
    let analytic = 2.0 * cs.integrate_g(&(beta * &r));
    let gp = energy_with(cs, &fc, &unit_variation(theta, beta, h)).bienergy;
    let gm = energy_with(cs, &fc, &unit_variation(theta, beta, -h)).bienergy;
    Ok((analytic, (gp - gm) / (2.0 * h)))
}
