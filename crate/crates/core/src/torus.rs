//! Periodic lattice fields on the flat torus `R^2 / Γ` and their spectral calculus.
//!
//! A [`ScalarField`] stores samples at the grid points `s·d1/n1 + t·d2/n2`,
//! row-major in `(s, t)`. Derivatives are exact derivatives of the
//! trigonometric interpolant, with wavevectors taken from the dual lattice
//! `2π·(p δ¹ + q δ²)`. Nyquist modes are treated as the real cosine mode, so
//! odd derivatives vanish on them and even derivatives keep them.
//!
//! Sign convention: [`laplacian`] is the geometer's Laplacian
//! `Δ₀ = −(∂₁² + ∂₂²)`, positive semidefinite.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generators and grid resolution of a lattice torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d1: [f64; 2],
    pub d2: [f64; 2],
    pub n1: usize,
    pub n2: usize,
}

impl LatticeSpec {
    pub fn new(d1: [f64; 2], d2: [f64; 2], n1: usize, n2: usize) -> Result<Self> {
        if !(d1.iter().chain(d2.iter()).all(|v| v.is_finite())) {
            return Err(Error::InvalidLattice("non-finite generator".into()));
        }
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        let scale = (d1[0].hypot(d1[1])) * (d2[0].hypot(d2[1]));
        if det == 0.0 || scale == 0.0 || det.abs() <= 1e-12 * scale {
            return Err(Error::InvalidLattice(
                "generators are linearly dependent".into(),
            ));
        }
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidLattice(format!(
                    "{name} = {n}; grid counts must be even and at least 4"
                )));
            }
        }
        Ok(Self { d1, d2, n1, n2 })
    }

    /// Unit square lattice `d1 = (1,0)`, `d2 = (0,1)` with an `n × n` grid.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new([1.0, 0.0], [0.0, 1.0], n, n)
    }

    pub fn det(&self) -> f64 {
        self.d1[0] * self.d2[1] - self.d1[1] * self.d2[0]
    }

    /// Area of the fundamental domain.
    pub fn area(&self) -> f64 {
        self.det().abs()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.area() / self.len() as f64
    }

    /// Dual basis `(δ¹, δ²)` with `δⁱ · d_j = δᵢⱼ`.
    pub fn dual_basis(&self) -> ([f64; 2], [f64; 2]) {
        let det = self.det();
        (
            [self.d2[1] / det, -self.d2[0] / det],
            [-self.d1[1] / det, self.d1[0] / det],
        )
    }

    /// Cartesian position of grid point `(s, t)`.
    pub fn point(&self, s: usize, t: usize) -> [f64; 2] {
        let (a, b) = self.lattice_coords(s, t);
        [
            a * self.d1[0] + b * self.d2[0],
            a * self.d1[1] + b * self.d2[1],
        ]
    }

    /// Lattice coordinates `(λ₁, λ₂) = (s/n1, t/n2)` of grid point `(s, t)`.
    pub fn lattice_coords(&self, s: usize, t: usize) -> (f64, f64) {
        (s as f64 / self.n1 as f64, t as f64 / self.n2 as f64)
    }

    /// Lattice coordinates of an arbitrary Cartesian point.
    pub fn coords_of(&self, xi: [f64; 2]) -> (f64, f64) {
        let (e1, e2) = self.dual_basis();
        (
            e1[0] * xi[0] + e1[1] * xi[1],
            e2[0] * xi[0] + e2[1] * xi[1],
        )
    }

    pub(crate) fn index(&self, s: usize, t: usize) -> usize {
        s * self.n2 + t
    }
}

/// Samples of a smooth doubly periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    lattice: LatticeSpec,
    samples: Vec<f64>,
}

impl ScalarField {
    pub fn new(lattice: LatticeSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != lattice.len() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                lattice.len(),
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at index {i}")));
        }
        Ok(Self { lattice, samples })
    }

    pub(crate) fn from_vec(lattice: LatticeSpec, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), lattice.len());
        Self { lattice, samples }
    }

    pub fn zeros(lattice: LatticeSpec) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: LatticeSpec, value: f64) -> Self {
        Self::from_vec(lattice, vec![value; lattice.len()])
    }

    /// Samples `f(x, y)` at the Cartesian grid positions.
    pub fn from_fn(lattice: LatticeSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut samples = Vec::with_capacity(lattice.len());
        for s in 0..lattice.n1 {
            for t in 0..lattice.n2 {
                let p = lattice.point(s, t);
                samples.push(f(p[0], p[1]));
            }
        }
        Self::from_vec(lattice, samples)
    }

    /// Samples `f(λ₁, λ₂)` at the lattice coordinates of the grid.
    pub fn from_lattice_fn(lattice: LatticeSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut samples = Vec::with_capacity(lattice.len());
        for s in 0..lattice.n1 {
            for t in 0..lattice.n2 {
                let (a, b) = lattice.lattice_coords(s, t);
                samples.push(f(a, b));
            }
        }
        Self::from_vec(lattice, samples)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn at(&self, s: usize, t: usize) -> f64 {
        self.samples[self.lattice.index(s, t)]
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.lattice, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.lattice, other.lattice, "lattice mismatch");
        Self::from_vec(
            self.lattice,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arithmetic mean of the samples (equal to the flat average over the torus).
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Root-mean-square of the samples.
    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

macro_rules! field_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
        impl $tr<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                (&self).$method(rhs)
            }
        }
    };
}

field_binop!(Add, add, +);
field_binop!(Sub, sub, -);
field_binop!(Mul, mul, *);

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        (&self).neg()
    }
}

/// A vector field given by its components in the fixed Cartesian frame of the
/// universal cover.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldFlat {
    pub comp1: ScalarField,
    pub comp2: ScalarField,
}

impl VectorFieldFlat {
    pub fn new(comp1: ScalarField, comp2: ScalarField) -> Result<Self> {
        if comp1.lattice() != comp2.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self { comp1, comp2 })
    }

    pub fn constant(lattice: LatticeSpec, v: [f64; 2]) -> Self {
        Self {
            comp1: ScalarField::constant(lattice, v[0]),
            comp2: ScalarField::constant(lattice, v[1]),
        }
    }

    pub fn zeros(lattice: LatticeSpec) -> Self {
        Self::constant(lattice, [0.0, 0.0])
    }

    pub fn lattice(&self) -> &LatticeSpec {
        self.comp1.lattice()
    }

    /// Pointwise Euclidean inner product.
    pub fn dot(&self, other: &Self) -> ScalarField {
        &(&self.comp1 * &other.comp1) + &(&self.comp2 * &other.comp2)
    }

    pub fn norm_squared(&self) -> ScalarField {
        self.dot(self)
    }

    pub fn scale_by(&self, f: &ScalarField) -> Self {
        Self {
            comp1: f * &self.comp1,
            comp2: f * &self.comp2,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            comp1: self.comp1.scale(c),
            comp2: self.comp2.scale(c),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            comp1: &self.comp1 + &other.comp1,
            comp2: &self.comp2 + &other.comp2,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            comp1: &self.comp1 - &other.comp1,
            comp2: &self.comp2 - &other.comp2,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comp1.max_abs().max(self.comp2.max_abs())
    }
}

/// The complex structure `J(x, y) = (−y, x)`.
pub fn rotate_j(x: &VectorFieldFlat) -> VectorFieldFlat {
    VectorFieldFlat {
        comp1: -&x.comp2,
        comp2: x.comp1.clone(),
    }
}

// ---------------------------------------------------------------------------
// FFT machinery

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut p = planner().lock().expect("fft planner poisoned");
    (p.plan_fft_forward(n), p.plan_fft_inverse(n))
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

fn fft2(buf: &mut Vec<Complex64>, n1: usize, n2: usize, inverse: bool) {
    let (f2, i2) = plans(n2);
    let (f1, i1) = plans(n1);
    if inverse {
        i2.process(buf);
    } else {
        f2.process(buf);
    }
    let mut tr = transpose(buf, n1, n2);
    if inverse {
        i1.process(&mut tr);
    } else {
        f1.process(&mut tr);
    }
    *buf = transpose(&tr, n2, n1);
    if inverse {
        let scale = 1.0 / (n1 * n2) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Discrete Fourier coefficients of a real field (unnormalized forward DFT).
pub(crate) fn forward(f: &ScalarField) -> Vec<Complex64> {
    let l = f.lattice();
    let mut buf: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, l.n1, l.n2, false);
    buf
}

/// Real part of the inverse DFT.
pub(crate) fn inverse(lattice: &LatticeSpec, mut hat: Vec<Complex64>) -> ScalarField {
    fft2(&mut hat, lattice.n1, lattice.n2, true);
    ScalarField::from_vec(*lattice, hat.into_iter().map(|c| c.re).collect())
}

/// Signed mode index and whether it is the Nyquist mode.
fn mode(i: usize, n: usize) -> (i64, bool) {
    let half = n / 2;
    if i == half {
        (half as i64, true)
    } else if i < half {
        (i as i64, false)
    } else {
        (i as i64 - n as i64, false)
    }
}

/// Wavevector `2π(p δ¹ + q δ²)`.
fn wavevector(dual: &([f64; 2], [f64; 2]), p: f64, q: f64) -> [f64; 2] {
    let tau = 2.0 * std::f64::consts::PI;
    [
        tau * (p * dual.0[0] + q * dual.1[0]),
        tau * (p * dual.0[1] + q * dual.1[1]),
    ]
}

/// Fourier multiplier of a constant-coefficient operator given by its symbol
/// `k ↦ σ(k)`, averaged over the sign ambiguity of Nyquist indices.
pub(crate) fn symbol_table(
    lattice: &LatticeSpec,
    symbol: impl Fn([f64; 2]) -> Complex64,
) -> Vec<Complex64> {
    let dual = lattice.dual_basis();
    let mut out = Vec::with_capacity(lattice.len());
    for s in 0..lattice.n1 {
        let (p, pn) = mode(s, lattice.n1);
        let ps: &[f64] = if pn { &[1.0, -1.0] } else { &[1.0] };
        for t in 0..lattice.n2 {
            let (q, qn) = mode(t, lattice.n2);
            let qs: &[f64] = if qn { &[1.0, -1.0] } else { &[1.0] };
            let mut acc = Complex64::new(0.0, 0.0);
            for &sp in ps {
                for &sq in qs {
                    acc += symbol(wavevector(&dual, sp * p as f64, sq * q as f64));
                }
            }
            out.push(acc / (ps.len() * qs.len()) as f64);
        }
    }
    out
}

fn apply_symbol(f: &ScalarField, table: &[Complex64]) -> ScalarField {
    let mut hat = forward(f);
    for (c, m) in hat.iter_mut().zip(table) {
        *c *= m;
    }
    inverse(f.lattice(), hat)
}

fn derivative_symbol(direction: usize, order: u32) -> impl Fn([f64; 2]) -> Complex64 {
    move |k: [f64; 2]| Complex64::new(0.0, k[direction]).powu(order)
}

/// Exact derivative `∂_direction^order` of the trigonometric interpolant.
///
/// `direction` is 1 or 2 (Cartesian axes of the universal cover).
pub fn spectral_derivative(f: &ScalarField, direction: usize, order: u32) -> Result<ScalarField> {
    if !f.is_finite() {
        return Err(Error::InvalidField("non-finite samples".into()));
    }
    if !(direction == 1 || direction == 2) {
        return Err(Error::InvalidArgument(format!(
            "direction must be 1 or 2, got {direction}"
        )));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("order must be positive".into()));
    }
    Ok(derivative(f, direction - 1, order))
}

/// Zero-based infallible variant used internally.
pub(crate) fn derivative(f: &ScalarField, axis: usize, order: u32) -> ScalarField {
    let table = symbol_table(f.lattice(), derivative_symbol(axis, order));
    apply_symbol(f, &table)
}

/// Flat gradient `(∂₁f, ∂₂f)`.
pub fn gradient(f: &ScalarField) -> VectorFieldFlat {
    let hat = forward(f);
    let l = f.lattice();
    let mut parts = (0..2).map(|axis| {
        let table = symbol_table(l, derivative_symbol(axis, 1));
        let s: Vec<Complex64> = hat.iter().zip(&table).map(|(c, m)| c * m).collect();
        inverse(l, s)
    });
    let comp1 = parts.next().unwrap();
    let comp2 = parts.next().unwrap();
    VectorFieldFlat { comp1, comp2 }
}

/// Flat divergence `∂₁X¹ + ∂₂X²`.
pub fn divergence(x: &VectorFieldFlat) -> ScalarField {
    let l = x.lattice();
    let a = forward(&x.comp1);
    let b = forward(&x.comp2);
    let t1 = symbol_table(l, derivative_symbol(0, 1));
    let t2 = symbol_table(l, derivative_symbol(1, 1));
    let hat = a
        .iter()
        .zip(&b)
        .zip(t1.iter().zip(&t2))
        .map(|((a, b), (m1, m2))| a * m1 + b * m2)
        .collect();
    inverse(l, hat)
}

pub(crate) fn laplacian_table(lattice: &LatticeSpec) -> Vec<Complex64> {
    symbol_table(lattice, |k| Complex64::new(k[0] * k[0] + k[1] * k[1], 0.0))
}

/// Geometer's flat Laplacian `Δ₀ = −(∂₁² + ∂₂²)`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    apply_symbol(f, &laplacian_table(f.lattice()))
}

/// Directional derivative `X(f) = X · ∇f`.
pub fn directional(x: &VectorFieldFlat, f: &ScalarField) -> ScalarField {
    x.dot(&gradient(f))
}

/// Flat directional derivative `D_X Y` of a vector field.
pub fn directional_vector(x: &VectorFieldFlat, y: &VectorFieldFlat) -> VectorFieldFlat {
    VectorFieldFlat {
        comp1: directional(x, &y.comp1),
        comp2: directional(x, &y.comp2),
    }
}

/// Periodic quadrature `A/(n1·n2) · Σ f·g·w`; absent factors count as 1.
pub fn integrate_inner(
    f: &ScalarField,
    g: Option<&ScalarField>,
    weight: Option<&ScalarField>,
) -> Result<f64> {
    for other in [g, weight].into_iter().flatten() {
        if other.lattice() != f.lattice() {
            return Err(Error::LatticeMismatch);
        }
    }
    let ones = |o: Option<&ScalarField>, i: usize| o.map_or(1.0, |x| x.samples()[i]);
    let mut acc = 0.0;
    for (i, v) in f.samples().iter().enumerate() {
        acc += v * ones(g, i) * ones(weight, i);
    }
    Ok(acc * f.lattice().cell_area())
}

/// Infallible quadrature for fields known to share a lattice.
pub(crate) fn integrate(f: &ScalarField) -> f64 {
    f.samples().iter().sum::<f64>() * f.lattice().cell_area()
}

/// Fraction of spectral energy carried by modes in the top third of either
/// index range. Small values mean the field is resolved on its grid.
pub fn high_mode_fraction(f: &ScalarField) -> f64 {
    let l = f.lattice();
    let hat = forward(f);
    let (mut total, mut high) = (0.0, 0.0);
    for s in 0..l.n1 {
        let (p, _) = mode(s, l.n1);
        for t in 0..l.n2 {
            let (q, _) = mode(t, l.n2);
            let e = hat[l.index(s, t)].norm_sqr();
            total += e;
            if 3 * p.unsigned_abs() as usize > l.n1 || 3 * q.unsigned_abs() as usize > l.n2 {
                high += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::random_smooth_field;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sq(n: usize) -> LatticeSpec {
        LatticeSpec::unit_square(n).unwrap()
    }

    #[test]
    fn rejects_bad_lattices() {
        assert!(LatticeSpec::new([1.0, 0.0], [2.0, 0.0], 8, 8).is_err());
        assert!(LatticeSpec::new([1.0, 0.0], [0.0, 1.0], 7, 8).is_err());
        assert!(LatticeSpec::new([1.0, 0.0], [0.0, 1.0], 2, 8).is_err());
        assert!(ScalarField::new(sq(4), vec![f64::NAN; 16]).is_err());
    }

    #[test]
    fn dual_basis_is_dual() {
        let l = LatticeSpec::new([1.0, 0.2], [0.5, 1.3], 8, 8).unwrap();
        let (e1, e2) = l.dual_basis();
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        assert!((dot(e1, l.d1) - 1.0).abs() < 1e-15);
        assert!(dot(e1, l.d2).abs() < 1e-15);
        assert!(dot(e2, l.d1).abs() < 1e-15);
        assert!((dot(e2, l.d2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let f = ScalarField::constant(sq(16), 3.5);
        for dir in [1, 2] {
            for order in 1..4 {
                assert!(spectral_derivative(&f, dir, order).unwrap().max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_of_resolved_mode() {
        let l = sq(32);
        let f = ScalarField::from_fn(l, |x, _| (2.0 * PI * x).sin());
        let d = spectral_derivative(&f, 1, 1).unwrap();
        let expect = ScalarField::from_fn(l, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
        assert!((&d - &expect).max_abs() <= 1e-12);
        assert!(spectral_derivative(&f, 2, 1).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn derivative_rejects_non_finite() {
        let mut v = vec![0.0; 64];
        v[3] = f64::INFINITY;
        let f = ScalarField::from_vec(sq(8), v);
        assert!(matches!(
            spectral_derivative(&f, 1, 1),
            Err(Error::InvalidField(_))
        ));
    }

    #[test]
    fn odd_derivative_kills_nyquist() {
        let l = sq(8);
        let f = ScalarField::from_lattice_fn(l, |a, _| (8.0 * PI * a).cos());
        assert!(spectral_derivative(&f, 1, 1).unwrap().max_abs() < 1e-12);
        let d2 = spectral_derivative(&f, 1, 2).unwrap();
        assert!((&d2 + &f.scale((8.0 * PI).powi(2))).max_abs() < 1e-9);
    }

    #[test]
    fn oblique_lattice_mode_derivative() {
        // f = sin(2π λ₁) on an oblique lattice; ∇f = 2π cos(2π λ₁) δ¹.
        let l = LatticeSpec::new([1.0, 0.0], [0.5, 1.0], 16, 16).unwrap();
        let f = ScalarField::from_lattice_fn(l, |a, _| (2.0 * PI * a).sin());
        let g = gradient(&f);
        let (e1, _) = l.dual_basis();
        let c = ScalarField::from_lattice_fn(l, |a, _| 2.0 * PI * (2.0 * PI * a).cos());
        assert!((&g.comp1 - &c.scale(e1[0])).max_abs() < 1e-12);
        assert!((&g.comp2 - &c.scale(e1[1])).max_abs() < 1e-12);
    }

    #[test]
    fn quadrature_values() {
        let l = sq(32);
        let one = ScalarField::constant(l, 1.0);
        assert!((integrate_inner(&one, None, None).unwrap() - 1.0).abs() < 1e-15);
        let s = ScalarField::from_fn(l, |x, _| (2.0 * PI * x).sin());
        assert!((integrate_inner(&s, Some(&s), None).unwrap() - 0.5).abs() < 1e-15);
        let other = ScalarField::zeros(sq(16));
        assert_eq!(
            integrate_inner(&s, Some(&other), None),
            Err(Error::LatticeMismatch)
        );
    }

    #[test]
    fn rotation_properties() {
        let l = sq(8);
        let x = VectorFieldFlat::constant(l, [1.0, 0.0]);
        let jx = rotate_j(&x);
        assert!((jx.comp1.max_abs()) < 1e-15);
        assert!((&jx.comp2 - &ScalarField::constant(l, 1.0)).max_abs() < 1e-15);
    }

    #[test]
    fn high_mode_fraction_detects_roughness() {
        let l = sq(32);
        let smooth = ScalarField::from_fn(l, |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        assert!(high_mode_fraction(&smooth) < 1e-20);
        let rough = ScalarField::from_lattice_fn(l, |a, _| (2.0 * PI * 14.0 * a).cos());
        assert!(high_mode_fraction(&rough) > 0.99);
    }

    /// I₀(1) = Σ (1/4)ᵏ / (k!)².
    fn bessel_i0_at_one() -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            term *= 0.25 / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn quadrature_matches_bessel_series() {
        let f = ScalarField::from_fn(sq(128), |x, _| (2.0 * PI * x).cos().exp());
        let q = integrate_inner(&f, None, None).unwrap();
        assert!((q - bessel_i0_at_one()).abs() <= 1e-12, "{q}");
    }

    /// Periodic 8th-order centred difference along the first axis.
    fn fd8_x(f: &ScalarField) -> ScalarField {
        let l = *f.lattice();
        let h = 1.0 / l.n1 as f64;
        let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let mut out = vec![0.0; l.len()];
        for s in 0..l.n1 {
            for t in 0..l.n2 {
                out[l.index(s, t)] = c
                    .iter()
                    .enumerate()
                    .map(|(k, ck)| {
                        let k = k + 1;
                        ck * (f.at((s + k) % l.n1, t) - f.at((s + l.n1 - k) % l.n1, t))
                    })
                    .sum::<f64>()
                    / h;
            }
        }
        ScalarField::new(l, out).unwrap()
    }

    #[test]
    fn finite_difference_oracle_converges_at_eighth_order() {
        let err = |n: usize| {
            let f = ScalarField::from_fn(sq(n), |x, y| ((2.0 * PI * x).sin() * (2.0 * PI * y).cos()).exp());
            (&spectral_derivative(&f, 1, 1).unwrap() - &fd8_x(&f)).max_abs()
        };
        let (coarse, fine) = (err(32), err(64));
        let order = (coarse / fine).log2();
        assert!(fine < 1e-6, "{fine}");
        assert!((7.5..9.0).contains(&order), "observed order {order}");
    }

    #[test]
    fn spectral_error_decays_faster_than_any_power() {
        let exact = |x: f64, y: f64| {
            let (sx, cy) = ((2.0 * PI * x).sin(), (2.0 * PI * y).cos());
            2.0 * PI * (2.0 * PI * x).cos() * cy * (sx * cy).exp()
        };
        let err = |n: usize| {
            let f = ScalarField::from_fn(sq(n), |x, y| ((2.0 * PI * x).sin() * (2.0 * PI * y).cos()).exp());
            (&spectral_derivative(&f, 1, 1).unwrap() - &ScalarField::from_fn(sq(n), exact)).max_abs()
        };
        let (e8, e16, e32) = (err(8), err(16), err(32));
        assert!((e8 / e16).log2() > 8.0 && e32 < 1e-11, "{e8} {e16} {e32}");
    }

    fn oblique(n: usize) -> LatticeSpec {
        LatticeSpec::new([1.0, 0.1], [0.4, 0.9], n, n).unwrap()
    }

    fn rel(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(f64::MIN_POSITIVE)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fourier_round_trip(seed in any::<u64>()) {
            let f = random_smooth_field(oblique(16), seed, 4, 1.0);
            let back = inverse(f.lattice(), forward(&f));
            prop_assert!((&back - &f).max_abs() <= 1e-13 * f.max_abs());
        }

        #[test]
        fn derivatives_are_skew_adjoint(seed in any::<u64>(), dir in 1usize..=2) {
            let l = oblique(32);
            let f = random_smooth_field(l, seed, 4, 1.0);
            let g = random_smooth_field(l, seed ^ 0x5a5a, 4, 1.0);
            let df = spectral_derivative(&f, dir, 1).unwrap();
            let dg = spectral_derivative(&g, dir, 1).unwrap();
            let a = integrate_inner(&df, Some(&g), None).unwrap();
            let b = -integrate_inner(&f, Some(&dg), None).unwrap();
            let scale = integrate_inner(&df, Some(&df), None).unwrap().sqrt() * integrate_inner(&g, Some(&g), None).unwrap().sqrt();
            prop_assert!(rel(a, b, scale) <= 1e-10);
        }

        #[test]
        fn divergence_integrates_to_zero(seed in any::<u64>()) {
            let l = oblique(32);
            let x = VectorFieldFlat::new(random_smooth_field(l, seed, 4, 1.0), random_smooth_field(l, seed.wrapping_add(1), 4, 1.0)).unwrap();
            prop_assert!(integrate_inner(&divergence(&x), None, None).unwrap().abs() <= 1e-11);
        }

        #[test]
        fn laplacian_is_symmetric(seed in any::<u64>()) {
            let l = oblique(32);
            let f = random_smooth_field(l, seed, 4, 1.0);
            let g = random_smooth_field(l, seed.wrapping_add(7), 4, 1.0);
            let (lf, lg) = (laplacian(&f), laplacian(&g));
            let a = integrate_inner(&lf, Some(&g), None).unwrap();
            let b = integrate_inner(&f, Some(&lg), None).unwrap();
            let scale = integrate_inner(&lf, Some(&lf), None).unwrap().sqrt() * integrate_inner(&g, Some(&g), None).unwrap().sqrt();
            prop_assert!(rel(a, b, scale) <= 1e-12);
        }

        #[test]
        fn rotation_is_a_complex_structure(seed in any::<u64>()) {
            let l = sq(8);
            let x = VectorFieldFlat::new(random_smooth_field(l, seed, 2, 3.0), random_smooth_field(l, seed.wrapping_add(3), 2, 3.0)).unwrap();
            let jx = rotate_j(&x);
            prop_assert_eq!(rotate_j(&jx), x.scale(-1.0));
            prop_assert!(jx.dot(&x).max_abs() <= 1e-15);
        }
    }
}
