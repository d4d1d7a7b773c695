//! Left-invariant Riemannian geometry on SU(2), Sol₃ and the hyperbolic
//! space `Hⁿ`, in a fixed orthonormal basis of the Lie algebra.
//!
//! Left-invariant vector fields are coordinate vectors. Covariant derivatives
//! act by matrices: `∇_{e_i} Y = N_i y`, with `(N_i)_{kj}` the coefficient of
//! `e_k` in `∇_{e_i} e_j`. Curvature uses `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_{[X,Y]}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which group and metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelKind {
    /// Milnor frame `[e2,e3] = λ1 e1`, `[e3,e1] = λ2 e2`, `[e1,e2] = λ3 e3`.
    Su2 { lambda: [f64; 3] },
    /// `e^{2z}dx² + e^{−2z}dy² + dz²` with `e1 = e^{−z}∂x`, `e2 = e^{z}∂y`, `e3 = ∂z`.
    Sol3,
    /// Half-space of curvature `−c²` as the group `ℝ⁺ ⋉ ℝⁿ⁻¹`.
    Hyperbolic { n: usize, c: f64 },
}

/// Critical-point problem for left-invariant unit fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    HarmonicSection,
    BiharmonicSection,
    BiharmonicVectorField,
}

impl std::str::FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "harmonic-section" | "harmonic" => Ok(Self::HarmonicSection),
            "biharmonic-section" | "section" => Ok(Self::BiharmonicSection),
            "biharmonic-vector-field" | "vector-field" | "field" => Ok(Self::BiharmonicVectorField),
            _ => Err(Error::Parse(format!(
                "unknown problem '{s}' (expected harmonic-section, biharmonic-section or biharmonic-vector-field)"
            ))),
        }
    }
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::HarmonicSection => "harmonic-section",
            Self::BiharmonicSection => "biharmonic-section",
            Self::BiharmonicVectorField => "biharmonic-vector-field",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LeftInvariantModel {
    pub kind: ModelKind,
    pub dim: usize,
    /// `nabla[i]` is `N_i`.
    nabla: Vec<DMatrix<f64>>,
    /// `bracket[i][j]` are the coordinates of `[e_i, e_j]`.
    bracket: Vec<Vec<DVector<f64>>>,
    laplacian: DMatrix<f64>,
    /// `curvature[i][j]` is the matrix of `R(e_i, e_j)`.
    curvature: Vec<Vec<DMatrix<f64>>>,
    kernel: Kernel,
}

impl LeftInvariantModel {
    pub fn su2(lambda: [f64; 3]) -> Result<Self> {
        if !lambda.iter().all(|l| *l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument("SU(2) structure constants must be positive".into()));
        }
        if !(lambda[0] >= lambda[1] && lambda[1] >= lambda[2]) {
            return Err(Error::InvalidArgument("SU(2) constants must satisfy λ1 ≥ λ2 ≥ λ3".into()));
        }
        let half = 0.5 * (lambda[0] + lambda[1] + lambda[2]);
        let mu = [half - lambda[0], half - lambda[1], half - lambda[2]];
        let mut t = Table::new(3);
        t.set(2, 0, 1, mu[2]);
        t.set(1, 0, 2, -mu[1]);
        t.set(2, 1, 0, -mu[2]);
        t.set(0, 1, 2, mu[0]);
        t.set(1, 2, 0, mu[1]);
        t.set(0, 2, 1, -mu[0]);
        let mut b = Brackets::new(3);
        b.set(1, 2, 0, lambda[0]);
        b.set(2, 0, 1, lambda[1]);
        b.set(0, 1, 2, lambda[2]);
        Ok(Self::build(ModelKind::Su2 { lambda }, t, b))
    }

    pub fn sol3() -> Self {
        let mut t = Table::new(3);
        t.set(0, 0, 2, -1.0);
        t.set(0, 2, 0, 1.0);
        t.set(1, 1, 2, 1.0);
        t.set(1, 2, 1, -1.0);
        let mut b = Brackets::new(3);
        b.set(0, 2, 0, 1.0);
        b.set(1, 2, 1, -1.0);
        Self::build(ModelKind::Sol3, t, b)
    }

    pub fn hyperbolic(n: usize, c: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("hyperbolic dimension must be at least 2".into()));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument("curvature scale c must be positive".into()));
        }
        let mut t = Table::new(n);
        let mut b = Brackets::new(n);
        for i in 1..n {
            t.set(i, i, 0, c);
            t.set(i, 0, i, -c);
            b.set(0, i, i, c);
        }
        Ok(Self::build(ModelKind::Hyperbolic { n, c }, t, b))
    }

    fn build(kind: ModelKind, t: Table, b: Brackets) -> Self {
        let dim = t.dim;
        let nabla = t.mats;
        let bracket = b.vecs;
        let mut model = Self {
            kind,
            dim,
            nabla,
            bracket,
            laplacian: DMatrix::zeros(dim, dim),
            curvature: Vec::new(),
            kernel: Kernel::default(),
        };
        let mut lap = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let nii = model.nabla[i].column(i).into_owned();
            lap += model.nabla_along(&nii) - &model.nabla[i] * &model.nabla[i];
        }
        model.laplacian = lap;
        model.curvature = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        let ni = &model.nabla[i];
                        let nj = &model.nabla[j];
                        ni * nj - nj * ni - model.nabla_along(&model.bracket[i][j])
                    })
                    .collect()
            })
            .collect();
        model.kernel = Kernel::new(&model);
        model
    }

    /// `N_X = Σ x_i N_i`.
    pub fn nabla_along(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                m += &self.nabla[i] * *xi;
            }
        }
        m
    }

    pub fn connection(&self, i: usize) -> &DMatrix<f64> {
        &self.nabla[i]
    }

    pub fn bracket(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.bracket[i][j]
    }

    /// Matrix of `V ↦ Δ̄V` on left-invariant fields.
    pub fn laplacian_matrix(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Matrix of `R(X, Y)`.
    pub fn curvature(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let w = x[i] * y[j];
                if w != 0.0 {
                    m += &self.curvature[i][j] * w;
                }
            }
        }
        m
    }

    /// `(∇_{e_i} R)(X, Y) Z`.
    fn curvature_derivative(
        &self,
        i: usize,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        let n = &self.nabla[i];
        n * (self.curvature(x, y) * z)
            - self.curvature(&(n * x), y) * z
            - self.curvature(x, &(n * y)) * z
            - self.curvature(x, y) * (n * z)
    }

    /// Metric compatibility: every `N_i` is skew.
    pub fn compatibility_defect(&self) -> f64 {
        self.nabla
            .iter()
            .map(|n| (n + n.transpose()).amax())
            .fold(0.0, f64::max)
    }

    /// Torsion: `max |∇_{e_i}e_j − ∇_{e_j}e_i − [e_i, e_j]|`.
    pub fn torsion_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let t = self.nabla[i].column(j) - self.nabla[j].column(i) - &self.bracket[i][j];
                worst = worst.max(t.amax());
            }
        }
        worst
    }

    /// Difference between the stored connection and the one given by the
    /// Koszul formula `2⟨∇_{e_i}e_j, e_k⟩ = ⟨[e_i,e_j],e_k⟩ − ⟨[e_j,e_k],e_i⟩ + ⟨[e_k,e_i],e_j⟩`.
    pub fn koszul_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    let kz = 0.5
                        * (self.bracket[i][j][k] - self.bracket[j][k][i] + self.bracket[k][i][j]);
                    worst = worst.max((self.nabla[i][(k, j)] - kz).abs());
                }
            }
        }
        worst
    }
}

/// Rough Laplacian data of a left-invariant unit field.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianData {
    pub delta_v: DVector<f64>,
    /// `A = ⟨Δ̄V, V⟩`.
    pub a: f64,
    pub delta_delta_v: DVector<f64>,
    /// `S(V) = Σ R(∇_{e_i}V, V) e_i`.
    pub s_v: DVector<f64>,
}

fn check_unit(model: &LeftInvariantModel, v: &DVector<f64>) -> Result<()> {
    if v.len() != model.dim {
        return Err(Error::InvalidArgument(format!(
            "expected a {}-vector, got length {}",
            model.dim,
            v.len()
        )));
    }
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("V must be a unit vector (|V| = {})", v.norm())));
    }
    Ok(())
}

pub fn model_laplacian(model: &LeftInvariantModel, v: &DVector<f64>) -> Result<LaplacianData> {
    check_unit(model, v)?;
    Ok(laplacian_data(model, v))
}

fn laplacian_data(model: &LeftInvariantModel, v: &DVector<f64>) -> LaplacianData {
    let delta_v = &model.laplacian * v;
    let a = delta_v.dot(v);
    let delta_delta_v = &model.laplacian * &delta_v;
    let mut s_v = DVector::zeros(model.dim);
    for i in 0..model.dim {
        let niv = &model.nabla[i] * v;
        let e = DVector::from_fn(model.dim, |k, _| if k == i { 1.0 } else { 0.0 });
        s_v += model.curvature(&niv, v) * e;
    }
    LaplacianData { delta_v, a, delta_delta_v, s_v }
}

/// `Σ_i R(e_i, ∇_{e_i}S)V + (∇_{e_i}R)(e_i, S)V + 2R(e_i, S)∇_{e_i}V`.
pub fn curvature_terms(model: &LeftInvariantModel, v: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(model.dim);
    for i in 0..model.dim {
        let e = DVector::from_fn(model.dim, |k, _| if k == i { 1.0 } else { 0.0 });
        let n = &model.nabla[i];
        out += model.curvature(&e, &(n * s)) * v;
        out += model.curvature_derivative(i, &e, s, v);
        out += model.curvature(&e, s) * (n * v) * 2.0;
    }
    out
}

/// The expression that must be collinear to `V`:
///
/// * harmonic section: `Δ̄V`
/// * biharmonic section: `Δ̄(Δ̄V − AV) − AΔ̄V = Δ̄²V − 2AΔ̄V`
/// * biharmonic vector field: the section expression plus [`curvature_terms`].
pub fn critical_expression(model: &LeftInvariantModel, v: &DVector<f64>, problem: Problem) -> DVector<f64> {
    let d = laplacian_data(model, v);
    match problem {
        Problem::HarmonicSection => d.delta_v,
        Problem::BiharmonicSection => &d.delta_delta_v - &d.delta_v * (2.0 * d.a),
        Problem::BiharmonicVectorField => {
            &d.delta_delta_v - &d.delta_v * (2.0 * d.a) + curvature_terms(model, v, &d.s_v)
        }
    }
}

/// Component of [`critical_expression`] orthogonal to `V`; zero exactly at
/// solutions, whatever the Lagrange multiplier.
pub fn critical_system_residual(
    model: &LeftInvariantModel,
    v: &DVector<f64>,
    problem: Problem,
) -> Result<DVector<f64>> {
    check_unit(model, v)?;
    Ok(residual_unchecked(model, v, problem))
}

/// `E(V) − λV` for a given multiplier `λ`, where `E` is [`critical_expression`].
pub fn critical_system_residual_with_multiplier(
    model: &LeftInvariantModel,
    v: &DVector<f64>,
    lambda: f64,
    problem: Problem,
) -> Result<DVector<f64>> {
    check_unit(model, v)?;
    Ok(DVector::from_vec(model.kernel.expression(v.as_slice(), problem)) - v * lambda)
}

pub(crate) fn residual_unchecked(model: &LeftInvariantModel, v: &DVector<f64>, problem: Problem) -> DVector<f64> {
    let mut e = model.kernel.expression(v.as_slice(), problem);
    let lambda: f64 = e.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    for (ek, vk) in e.iter_mut().zip(v.iter()) {
        *ek -= lambda * vk;
    }
    DVector::from_vec(e)
}

/// Flat tensors for fast repeated evaluation of the critical expressions:
/// `gamma[i,j,k]` is `(N_i)_{kj}`, `riem[i,j,k,l]` the `e_k` coefficient of
/// `R(e_i,e_j)e_l`, and `d_riem[m,i,j,k,l]` the same for `(∇_{e_m}R)`.
#[derive(Debug, Clone, Default)]
struct Kernel {
    n: usize,
    gamma: Vec<f64>,
    lap: Vec<f64>,
    riem: Vec<f64>,
    d_riem: Vec<f64>,
}

impl Kernel {
    fn new(model: &LeftInvariantModel) -> Self {
        let n = model.dim;
        let basis = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        let mut gamma = vec![0.0; n * n * n];
        let mut lap = vec![0.0; n * n];
        let mut riem = vec![0.0; n.pow(4)];
        let mut d_riem = vec![0.0; n.pow(5)];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    gamma[(i * n + j) * n + k] = model.nabla[i][(k, j)];
                }
                lap[i * n + j] = model.laplacian[(i, j)];
            }
        }
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let col = model.curvature[i][j].column(l);
                    for k in 0..n {
                        riem[((i * n + j) * n + k) * n + l] = col[k];
                    }
                    for m in 0..n {
                        let d = model.curvature_derivative(m, &basis(i), &basis(j), &basis(l));
                        for k in 0..n {
                            d_riem[(((m * n + i) * n + j) * n + k) * n + l] = d[k];
                        }
                    }
                }
            }
        }
        Self { n, gamma, lap, riem, d_riem }
    }

    fn nabla(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (j, xj) in x.iter().enumerate() {
            let row = &self.gamma[(i * n + j) * n..(i * n + j + 1) * n];
            for k in 0..n {
                out[k] += row[k] * xj;
            }
        }
        out
    }

    fn lap(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|j| self.lap[i * n + j] * x[j]).sum()).collect()
    }

    /// Accumulates `scale · T(x, y)z` where `T` is stored at `tensor`
    /// with layout `[i, j, k, l]` starting at `offset`.
    #[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
    fn contract(&self, tensor: &[f64], offset: usize, x: &[f64], y: &[f64], z: &[f64], scale: f64, out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = scale * x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let base = offset + (i * n + j) * n * n;
                for k in 0..n {
                    let row = &tensor[base + k * n..base + (k + 1) * n];
                    out[k] += w * row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }

    fn expression(&self, v: &[f64], problem: Problem) -> Vec<f64> {
        let n = self.n;
        let dv = self.lap(v);
        if problem == Problem::HarmonicSection {
            return dv;
        }
        let a: f64 = dv.iter().zip(v).map(|(p, q)| p * q).sum();
        let ddv = self.lap(&dv);
        let mut e: Vec<f64> = ddv.iter().zip(&dv).map(|(p, q)| p - 2.0 * a * q).collect();
        if problem == Problem::BiharmonicSection {
            return e;
        }
        let nv: Vec<Vec<f64>> = (0..n).map(|i| self.nabla(i, v)).collect();
        let mut s = vec![0.0; n];
        for (i, nvi) in nv.iter().enumerate() {
            let mut r = vec![0.0; n];
            let ei: Vec<f64> = (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
            self.contract(&self.riem, 0, nvi, v, &ei, 1.0, &mut r);
            for k in 0..n {
                s[k] += r[k];
            }
        }
        for (i, nvi) in nv.iter().enumerate() {
            let ei: Vec<f64> = (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
            let ns = self.nabla(i, &s);
            self.contract(&self.riem, 0, &ei, &ns, v, 1.0, &mut e);
            self.contract(&self.d_riem, i * n.pow(4), &ei, &s, v, 1.0, &mut e);
            self.contract(&self.riem, 0, &ei, &s, nvi, 2.0, &mut e);
        }
        e
    }
}

struct Table {
    dim: usize,
    mats: Vec<DMatrix<f64>>,
}

impl Table {
    fn new(dim: usize) -> Self {
        Self { dim, mats: vec![DMatrix::zeros(dim, dim); dim] }
    }

    /// `∇_{e_i} e_j` has `e_k`-coefficient `value`.
    fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.mats[i][(k, j)] = value;
    }
}

struct Brackets {
    vecs: Vec<Vec<DVector<f64>>>,
}

impl Brackets {
    fn new(dim: usize) -> Self {
        Self { vecs: vec![vec![DVector::zeros(dim); dim]; dim] }
    }

    /// `[e_i, e_j]` has `e_k`-coefficient `value`, antisymmetrically.
    fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.vecs[i][j][k] = value;
        self.vecs[j][i][k] = -value;
    }
}
