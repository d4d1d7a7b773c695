//! Unit vector fields on the torus stored as semiperiodic angle functions.
//!
//! An angle `θ` in class `(m, n)` increases by `2πm` along `d1` and by `2πn`
//! along `d2`. It is stored as the linear representative
//! `θ_lin = 2π(m λ₁ + n λ₂)` plus a periodic part `α`, so nothing
//! non-periodic ever passes through the FFT.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{gradient, laplacian, LatticeSpec, ScalarField, VectorFieldFlat};

/// Winding numbers of a unit field along the two lattice generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HomotopyClass {
    pub m: i64,
    pub n: i64,
}

impl HomotopyClass {
    pub const fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }
}

impl std::fmt::Display for HomotopyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.m, self.n)
    }
}

/// The harmonic representative `θ_lin` of a class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRepresentative {
    pub cls: HomotopyClass,
    /// Constant gradient `Y₀ = 2π(m δ¹ + n δ²)`.
    pub gradient: [f64; 2],
    lattice: LatticeSpec,
}

impl LinearRepresentative {
    /// `θ_lin` at a Cartesian point of the universal cover.
    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        let (a, b) = self.lattice.coords_of(xi);
        self.eval_coords(a, b)
    }

    /// `θ_lin` at lattice coordinates `(λ₁, λ₂)`.
    pub fn eval_coords(&self, l1: f64, l2: f64) -> f64 {
        TAU * (self.cls.m as f64 * l1 + self.cls.n as f64 * l2)
    }

    /// `θ_lin` sampled on the grid of the fundamental domain.
    pub fn samples(&self) -> ScalarField {
        ScalarField::from_lattice_fn(self.lattice, |a, b| self.eval_coords(a, b))
    }
}

pub fn linear_representative(cls: HomotopyClass, lattice: LatticeSpec) -> LinearRepresentative {
    let (e1, e2) = lattice.dual_basis();
    let (m, n) = (cls.m as f64, cls.n as f64);
    LinearRepresentative {
        cls,
        gradient: [TAU * (m * e1[0] + n * e2[0]), TAU * (m * e1[1] + n * e2[1])],
        lattice,
    }
}

/// A semiperiodic angle `θ = θ_lin + α`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleField {
    pub cls: HomotopyClass,
    pub periodic: ScalarField,
}

impl AngleField {
    pub fn new(cls: HomotopyClass, periodic: ScalarField) -> Self {
        Self { cls, periodic }
    }

    /// The linear representative of `cls` (zero periodic part).
    pub fn linear(cls: HomotopyClass, lattice: LatticeSpec) -> Self {
        Self::new(cls, ScalarField::zeros(lattice))
    }

    pub fn lattice(&self) -> &LatticeSpec {
        self.periodic.lattice()
    }

    pub fn representative(&self) -> LinearRepresentative {
        linear_representative(self.cls, *self.lattice())
    }

    /// Total angle on the fundamental-domain grid.
    pub fn total(&self) -> ScalarField {
        &self.representative().samples() + &self.periodic
    }

    /// Flat gradient `Y₀ + ∇α`.
    pub fn gradient(&self) -> VectorFieldFlat {
        let y0 = self.representative().gradient;
        let g = gradient(&self.periodic);
        VectorFieldFlat {
            comp1: g.comp1.map(|v| v + y0[0]),
            comp2: g.comp2.map(|v| v + y0[1]),
        }
    }

    /// Flat Laplacian `Δ₀θ = Δ₀α`.
    pub fn laplacian(&self) -> ScalarField {
        laplacian(&self.periodic)
    }

    /// Same class, periodic part shifted by `beta`.
    pub fn perturbed(&self, beta: &ScalarField, t: f64) -> Self {
        Self::new(self.cls, self.periodic.zip_map(beta, |a, b| a + t * b))
    }

    /// `self − other` as a class difference and a periodic remainder.
    pub fn difference(&self, other: &Self) -> Result<(HomotopyClass, ScalarField)> {
        if self.lattice() != other.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok((
            HomotopyClass::new(self.cls.m - other.cls.m, self.cls.n - other.cls.n),
            &self.periodic - &other.periodic,
        ))
    }
}

/// The flat-unit field `(cos θ, sin θ)`.
pub fn angle_to_unit_field(theta: &AngleField) -> VectorFieldFlat {
    let total = theta.total();
    VectorFieldFlat {
        comp1: total.map(f64::cos),
        comp2: total.map(f64::sin),
    }
}

fn principal(d: f64) -> f64 {
    let mut r = d.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

fn loop_winding(angles: &[f64], label: &str) -> Result<i64> {
    let mut acc = 0.0;
    for i in 0..angles.len() {
        let inc = principal(angles[(i + 1) % angles.len()] - angles[i]);
        if inc.abs() >= PI - 1e-9 {
            return Err(Error::Winding(format!(
                "angle increment {inc:.3} along {label} reaches π; field is under-resolved"
            )));
        }
        acc += inc;
    }
    let w = acc / TAU;
    let r = w.round();
    if (w - r).abs() > 1e-6 {
        return Err(Error::Winding(format!("non-integer winding {w} along {label}")));
    }
    Ok(r as i64)
}

/// Homotopy class of a nowhere-vanishing field, by counting turns along each
/// generator. Every grid line is checked and must agree.
pub fn winding_class(v: &VectorFieldFlat) -> Result<HomotopyClass> {
    let l = *v.lattice();
    let mut angle = Vec::with_capacity(l.len());
    for (i, (&x, &y)) in v.comp1.samples().iter().zip(v.comp2.samples()).enumerate() {
        if x.hypot(y) <= f64::EPSILON {
            return Err(Error::Winding(format!(
                "zero vector at grid point ({}, {})",
                i / l.n2,
                i % l.n2
            )));
        }
        angle.push(y.atan2(x));
    }
    let mut m = None;
    for t in 0..l.n2 {
        let line: Vec<f64> = (0..l.n1).map(|s| angle[l.index(s, t)]).collect();
        let w = loop_winding(&line, "d1")?;
        if *m.get_or_insert(w) != w {
            return Err(Error::Winding("inconsistent winding along d1".into()));
        }
    }
    let mut n = None;
    for s in 0..l.n1 {
        let w = loop_winding(&angle[l.index(s, 0)..l.index(s, 0) + l.n2], "d2")?;
        if *n.get_or_insert(w) != w {
            return Err(Error::Winding("inconsistent winding along d2".into()));
        }
    }
    Ok(HomotopyClass::new(m.unwrap(), n.unwrap()))
}
