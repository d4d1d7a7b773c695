//! The curved metric `g = e^{−2u}·δ` on the torus and its calculus.
//!
//! `u` is the exponent that makes `e^{2u} g` flat. Vector fields are always
//! stored by their components in the flat Cartesian frame; `g`-norms carry the
//! factor `e^{−2u}`. Conventions, all with the geometer's sign:
//!
//! * `grad_g f = e^{2u} ∇₀f`
//! * `div_g X = e^{2u} div₀(e^{−2u} X)`
//! * `Δ_g f = −div_g grad_g f = e^{2u} Δ₀ f`
//! * `k_g = −e^{2u} Δ₀u = e^{2u}(∂₁²u + ∂₂²u)`, i.e. `k_g = −Δ_g u`.
//!
//! The canonical orthonormal frame is `S = e^{u} e₁`, `W = J S = e^{u} e₂`,
//! with `∇_S S = aW`, `∇_W S = bW`; this gives `a = e^{u} ∂₂u`,
//! `b = −e^{u} ∂₁u` and `Z = aS + bW = −J grad_g u`.

use crate::angle::{angle_to_unit_field, AngleField};
use crate::error::{Error, Result};
use crate::torus::{
    directional, directional_vector, divergence, gradient, high_mode_fraction, integrate,
    laplacian, rotate_j, LatticeSpec, ScalarField, VectorFieldFlat,
};

/// Spectral energy fraction above which a field counts as under-resolved.
pub const RESOLUTION_THRESHOLD: f64 = 1e-8;

/// Gaussian curvature of `e^{−2u}·δ`.
pub fn gaussian_curvature(u: &ScalarField) -> ScalarField {
    let lap = laplacian(u);
    u.zip_map(&lap, |u, l| -(2.0 * u).exp() * l)
}

#[derive(Debug, Clone)]
pub struct ConformalStructure {
    u: ScalarField,
    e2u: ScalarField,
    em2u: ScalarField,
    kg: ScalarField,
    resolution: f64,
}

impl ConformalStructure {
    pub fn new(u: ScalarField) -> Result<Self> {
        if !u.is_finite() {
            return Err(Error::InvalidField("conformal factor has non-finite samples".into()));
        }
        let resolution = high_mode_fraction(&u);
        if resolution > RESOLUTION_THRESHOLD {
            log::warn!(
                "conformal factor is under-resolved: {resolution:.2e} of its spectral energy lies in the top third"
            );
        }
        Ok(Self {
            e2u: u.map(|v| (2.0 * v).exp()),
            em2u: u.map(|v| (-2.0 * v).exp()),
            kg: gaussian_curvature(&u),
            u,
            resolution,
        })
    }

    /// The flat torus (`u ≡ 0`).
    pub fn flat(lattice: LatticeSpec) -> Self {
        Self::new(ScalarField::zeros(lattice)).expect("zero field is valid")
    }

    pub fn lattice(&self) -> &LatticeSpec {
        self.u.lattice()
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn e2u(&self) -> &ScalarField {
        &self.e2u
    }

    /// Density of the curved area element against the flat one, `e^{−2u}`.
    pub fn volume_density(&self) -> &ScalarField {
        &self.em2u
    }

    pub fn kg(&self) -> &ScalarField {
        &self.kg
    }

    pub fn kg_squared(&self) -> ScalarField {
        self.kg.map(|k| k * k)
    }

    /// Top-third spectral energy fraction of `u`.
    pub fn resolution_fraction(&self) -> f64 {
        self.resolution
    }

    pub fn is_resolved(&self) -> bool {
        self.resolution <= RESOLUTION_THRESHOLD
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.lattice() != self.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    /// `∫ f dA_g`.
    pub fn integrate_g(&self, f: &ScalarField) -> f64 {
        integrate(&(f * &self.em2u))
    }

    /// Pointwise `g(X, Y)`.
    pub fn metric_inner(&self, x: &VectorFieldFlat, y: &VectorFieldFlat) -> ScalarField {
        &x.dot(y) * &self.em2u
    }

    pub fn grad_g(&self, f: &ScalarField) -> Result<VectorFieldFlat> {
        self.check(f)?;
        Ok(gradient(f).scale_by(&self.e2u))
    }

    pub fn div_g(&self, x: &VectorFieldFlat) -> Result<ScalarField> {
        self.check(&x.comp1)?;
        Ok(&self.e2u * &divergence(&x.scale_by(&self.em2u)))
    }

    pub fn laplacian_g(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(&self.e2u * &laplacian(f))
    }

    /// `grad_g θ = e^{2u}(Y₀ + ∇α)`.
    pub fn grad_g_angle(&self, theta: &AngleField) -> VectorFieldFlat {
        theta.gradient().scale_by(&self.e2u)
    }

    /// `Δ_g θ = e^{2u} Δ₀α`.
    pub fn laplacian_g_angle(&self, theta: &AngleField) -> ScalarField {
        &self.e2u * &theta.laplacian()
    }

    /// The orthonormal frame `(S, W)`.
    pub fn frame(&self) -> (VectorFieldFlat, VectorFieldFlat) {
        let eu = self.u.map(f64::exp);
        let z = ScalarField::zeros(*self.lattice());
        (
            VectorFieldFlat { comp1: eu.clone(), comp2: z.clone() },
            VectorFieldFlat { comp1: z, comp2: eu },
        )
    }

    /// Levi-Civita derivative `∇_Y Z` of `g`, from the conformal-change formula
    /// `∇_Y Z = D_Y Z − Y(u) Z − Z(u) Y + (Y·Z) ∇₀u`.
    pub fn covariant_derivative(&self, y: &VectorFieldFlat, z: &VectorFieldFlat) -> VectorFieldFlat {
        let gu = gradient(&self.u);
        let yu = y.dot(&gu);
        let zu = z.dot(&gu);
        directional_vector(y, z)
            .sub(&z.scale_by(&yu))
            .sub(&y.scale_by(&zu))
            .add(&gu.scale_by(&y.dot(z)))
    }

    /// Rough Laplacian `Σ_E (∇_{∇_E E} V − ∇_E ∇_E V)` over the frame.
    pub fn rough_laplacian(&self, v: &VectorFieldFlat) -> VectorFieldFlat {
        let (s, w) = self.frame();
        let mut out = VectorFieldFlat::zeros(*self.lattice());
        for e in [s, w] {
            let nee = self.covariant_derivative(&e, &e);
            let nev = self.covariant_derivative(&e, v);
            out = out
                .add(&self.covariant_derivative(&nee, v))
                .sub(&self.covariant_derivative(&e, &nev));
        }
        out
    }

    /// Unit field `V = e^{u}(cos θ, sin θ)` of `g`.
    pub fn unit_field(&self, theta: &AngleField) -> VectorFieldFlat {
        angle_to_unit_field(theta).scale_by(&self.u.map(f64::exp))
    }
}

/// Connection functions of the canonical frame.
#[derive(Debug, Clone)]
pub struct FrameConnection {
    pub a: ScalarField,
    pub b: ScalarField,
    /// `Z = aS + bW` in flat components.
    pub z: VectorFieldFlat,
}

pub fn frame_connection(cs: &ConformalStructure) -> FrameConnection {
    let (s, w) = cs.frame();
    let a = cs.metric_inner(&cs.covariant_derivative(&s, &s), &w);
    let b = cs.metric_inner(&cs.covariant_derivative(&w, &s), &w);
    let z = s.scale_by(&a).add(&w.scale_by(&b));
    FrameConnection { a, b, z }
}

/// Harmonic-section residuals `Δ̄V − g(Δ̄V, V)V` of the same unit field seen
/// in the flat metric (`Ṽ = (cos θ, sin θ)`) and in `g` (`V = e^{u}Ṽ`).
///
/// The flat one comes from `Δ₀θ` and `|∇θ|²`; the curved one from the
/// Levi-Civita connection of `g`. Componentwise, `flat = e^{−3u}·curved`.
pub fn section_residual_pair(
    cs: &ConformalStructure,
    theta: &AngleField,
) -> Result<(VectorFieldFlat, VectorFieldFlat)> {
    if theta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let vt = angle_to_unit_field(theta);
    let lap = theta.laplacian();
    let q = theta.gradient().norm_squared();
    let (c, s) = (&vt.comp1, &vt.comp2);
    let rough_flat = VectorFieldFlat {
        comp1: &(c * &q) - &(s * &lap),
        comp2: &(s * &q) + &(c * &lap),
    };
    let flat = rough_flat.sub(&vt.scale_by(&rough_flat.dot(&vt)));

    let v = cs.unit_field(theta);
    let rough = cs.rough_laplacian(&v);
    let curved = rough.sub(&v.scale_by(&cs.metric_inner(&rough, &v)));
    Ok((flat, curved))
}

/// `∇_V V − (div_g V) V` for the `g`-unit field of angle `θ`.
pub fn geodesic_defect(cs: &ConformalStructure, theta: &AngleField) -> VectorFieldFlat {
    let v = cs.unit_field(theta);
    let div = cs.div_g(&v).expect("same lattice");
    cs.covariant_derivative(&v, &v).sub(&v.scale_by(&div))
}

/// `Ṽ(div JṼ) − JṼ(div Ṽ)` for the flat unit field of angle `θ`.
pub fn flat_commutator_form(theta: &AngleField) -> ScalarField {
    let v = angle_to_unit_field(theta);
    let jv = rotate_j(&v);
    &directional(&v, &divergence(&jv)) - &directional(&jv, &divergence(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::HomotopyClass;
    use crate::torus::integrate_inner;
    use std::f64::consts::TAU;

    fn sample_u(l: LatticeSpec) -> ScalarField {
        ScalarField::from_fn(l, |x, y| 0.3 * (TAU * x).sin() * (TAU * y).cos())
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let cs = ConformalStructure::flat(LatticeSpec::unit_square(16).unwrap());
        assert_eq!(cs.kg().max_abs(), 0.0);
        let fc = frame_connection(&cs);
        assert!(fc.a.max_abs() == 0.0 && fc.b.max_abs() == 0.0 && fc.z.max_abs() == 0.0);
    }

    #[test]
    fn gauss_bonnet() {
        let cs = ConformalStructure::new(sample_u(LatticeSpec::unit_square(64).unwrap())).unwrap();
        assert!(cs.kg().max_abs() > 1.0);
        assert!(cs.integrate_g(cs.kg()).abs() < 1e-12);
    }

    /// Curvature of the orthogonal metric `E = G = λ`, `F = 0` by the
    /// Brioschi formula, with fourth-order centered differences:
    /// `K = −(1/2λ)[∂ₓ(λₓ/λ) + ∂ᵧ(λᵧ/λ)]`.
    fn brioschi_fd(lam: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
        let d = |f: &dyn Fn(f64) -> f64| {
            (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
        };
        let ratio_x = |xx: f64, yy: f64| d(&|t| lam(xx + t, yy)) / lam(xx, yy);
        let ratio_y = |xx: f64, yy: f64| d(&|t| lam(xx, yy + t)) / lam(xx, yy);
        let dx = d(&|t| ratio_x(x + t, y));
        let dy = d(&|t| ratio_y(x, y + t));
        -(dx + dy) / (2.0 * lam(x, y))
    }

    #[test]
    fn curvature_matches_brioschi_oracle() {
        let n = 256;
        let l = LatticeSpec::unit_square(n).unwrap();
        let u = |x: f64, y: f64| 0.3 * (TAU * x).sin() * (TAU * y).cos();
        let kg = gaussian_curvature(&ScalarField::from_fn(l, u));
        let h = 1.0 / n as f64;
        let lam = |x: f64, y: f64| (-2.0 * u(x, y)).exp();
        let mut err: f64 = 0.0;
        for s in (0..n).step_by(5) {
            for t in (0..n).step_by(3) {
                let p = l.point(s, t);
                err = err.max((kg.at(s, t) - brioschi_fd(lam, p[0], p[1], h)).abs());
            }
        }
        assert!(err < 1e-5, "max error {err}");
    }

    #[test]
    fn curved_operators_reduce_when_flat() {
        let l = LatticeSpec::unit_square(16).unwrap();
        let cs = ConformalStructure::flat(l);
        let f = sample_u(l);
        assert_eq!(cs.laplacian_g(&f).unwrap(), laplacian(&f));
        assert_eq!(cs.grad_g(&f).unwrap(), gradient(&f));
    }

    #[test]
    fn curved_laplacian_is_self_adjoint_and_conformal() {
        let l = LatticeSpec::new([1.0, 0.1], [0.4, 0.9], 48, 48).unwrap();
        let cs = ConformalStructure::new(ScalarField::from_lattice_fn(l, |a, b| {
            0.25 * (TAU * a).cos() + 0.1 * (TAU * (a - b)).sin()
        }))
        .unwrap();
        let f = ScalarField::from_lattice_fn(l, |a, b| (TAU * a).sin() * (TAU * b).sin());
        let h = ScalarField::from_lattice_fn(l, |a, b| {
            (TAU * a).sin().exp() * (TAU * b).sin() + 0.3 * (TAU * (a + 2.0 * b)).cos()
        });
        // definition-chained Δ_g = −div_g grad_g
        let chained = -cs.div_g(&cs.grad_g(&f).unwrap()).unwrap();
        let direct = cs.laplacian_g(&f).unwrap();
        assert!((&chained - &direct).max_abs() <= 1e-10 * direct.max_abs());
        let w = cs.volume_density();
        let lhs = integrate_inner(&cs.laplacian_g(&f).unwrap(), Some(&h), Some(w)).unwrap();
        let rhs = integrate_inner(&f, Some(&cs.laplacian_g(&h).unwrap()), Some(w)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn z_is_minus_j_grad_u() {
        let l = LatticeSpec::unit_square(48).unwrap();
        let cs = ConformalStructure::new(ScalarField::from_fn(l, |x, y| {
            0.2 * (TAU * x).sin() + 0.15 * (TAU * (x + y)).cos()
        }))
        .unwrap();
        let fc = frame_connection(&cs);
        let minus_jgrad = rotate_j(&cs.grad_g(cs.u()).unwrap()).scale(-1.0);
        assert!(fc.z.sub(&minus_jgrad).max_abs() < 1e-10);
        // a = e^u ∂₂u, b = −e^u ∂₁u
        let g = gradient(cs.u());
        let eu = cs.u().map(f64::exp);
        assert!((&fc.a - &(&eu * &g.comp2)).max_abs() < 1e-12);
        assert!((&fc.b + &(&eu * &g.comp1)).max_abs() < 1e-12);
    }

    #[test]
    fn x_only_factor_gives_x_only_connection() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let cs = ConformalStructure::new(ScalarField::from_fn(l, |x, _| 0.3 * (TAU * x).sin())).unwrap();
        let fc = frame_connection(&cs);
        for f in [&fc.a, &fc.b] {
            for s in 0..32 {
                for t in 1..32 {
                    assert!((f.at(s, t) - f.at(s, 0)).abs() <= 1e-12);
                }
            }
        }
        assert!(fc.a.max_abs() < 1e-12);
    }

    #[test]
    fn residuals_vanish_for_parallel_fields() {
        let l = LatticeSpec::unit_square(16).unwrap();
        let cs = ConformalStructure::flat(l);
        let (f, c) = section_residual_pair(&cs, &AngleField::linear(HomotopyClass::new(1, -1), l)).unwrap();
        assert!(f.max_abs() < 1e-12 && c.max_abs() < 1e-11);
    }

    #[test]
    fn flat_tangential_residual_is_laplacian_of_angle() {
        let l = LatticeSpec::unit_square(32).unwrap();
        let eps = 0.3;
        let th = AngleField::new(
            HomotopyClass::new(1, 0),
            ScalarField::from_fn(l, |_, y| eps * (TAU * y).sin()),
        );
        let (flat, _) = section_residual_pair(&ConformalStructure::flat(l), &th).unwrap();
        let tang = flat.dot(&rotate_j(&angle_to_unit_field(&th)));
        let expect = ScalarField::from_fn(l, |_, y| eps * TAU * TAU * (TAU * y).sin());
        assert!((&tang - &expect).max_abs() < 1e-10);
    }

    #[test]
    fn conformal_residual_identity() {
        let l = LatticeSpec::unit_square(48).unwrap();
        let cs = ConformalStructure::new(sample_u(l)).unwrap();
        let th = AngleField::new(
            HomotopyClass::new(1, 2),
            ScalarField::from_fn(l, |x, y| 0.2 * (TAU * (x - y)).cos()),
        );
        let (flat, curved) = section_residual_pair(&cs, &th).unwrap();
        let scaled = curved.scale_by(&cs.u().map(|u| (-3.0 * u).exp()));
        assert!(flat.sub(&scaled).max_abs() < 1e-9);
    }
}
