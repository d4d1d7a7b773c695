//! Numerical classification of the solution set of a critical-point system on
//! the unit sphere of the Lie algebra.
//!
//! Pipeline: dense sampling, Gauss–Newton refinement in the tangent space,
//! null-space dimension from the Jacobian's singular values, clustering with a
//! spatial hash, and a round-subsphere fit for each cluster.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{critical_expression, residual_unchecked, LeftInvariantModel, ModelKind, Problem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Number of Fibonacci points on `S²`, points on `S¹`, or grid points per
    /// axis on each face of the cube for higher spheres. `None` picks about
    /// 20000 samples.
    pub resolution: Option<usize>,
    /// Seeds the random rotation applied to the sample set.
    pub seed: u64,
    pub residual_tolerance: f64,
    /// Relative singular-value threshold for null directions.
    pub null_tolerance: f64,
    /// Distance below which refined points are linked into one cluster.
    pub merge_tolerance: f64,
    /// Clusters that fit inside a ball of this radius are reported as points,
    /// whatever the local Jacobian rank of their members.
    pub point_extent: f64,
    pub max_iterations: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            resolution: None,
            seed: 0,
            residual_tolerance: 1e-9,
            null_tolerance: 1e-7,
            merge_tolerance: 0.15,
            point_extent: 1e-2,
            max_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Point,
    Circle,
    Hypersphere,
    WholeSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Empty,
    IsolatedPoints,
    CircleFamily,
    HypersphereFamily,
    WholeSphere,
    Mixed,
}

/// A connected piece of the solution set. Families are round subspheres
/// `{ p ∈ Sⁿ⁻¹ : ⟨nᵢ, p⟩ = offsetᵢ }` of dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub kind: ComponentKind,
    pub dim: usize,
    pub normals: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub radius: f64,
    /// The point itself, or the centre `Σ offsetᵢ nᵢ` of a family.
    pub center: Vec<f64>,
    pub witnesses: Vec<Vec<f64>>,
    pub size: usize,
    /// Largest deviation of a member from the fitted subsphere.
    pub fit_error: f64,
    pub max_residual: f64,
    /// A point where the Jacobian is (nearly) singular, so refinement only
    /// locates it to roughly the cube root of the residual tolerance. Its
    /// centre is the normalised mean of the cluster.
    #[serde(default)]
    pub degenerate: bool,
}

impl Component {
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if self.kind == ComponentKind::Point {
            return dist(p, &self.center) <= tol;
        }
        self.normals
            .iter()
            .zip(&self.offset)
            .all(|(n, o)| (dot(n, p) - o).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub model: ModelKind,
    pub problem: Problem,
    pub kind: SetKind,
    pub components: Vec<Component>,
    pub flagged: bool,
    pub flags: Vec<String>,
    pub samples: usize,
    pub converged: usize,
}

#[derive(Debug, Clone)]
struct Refined {
    v: Vec<f64>,
    residual: f64,
    null_dim: usize,
}

pub fn classify(model: &LeftInvariantModel, problem: Problem, opts: &ClassifyOptions) -> Result<CriticalSet> {
    if !(opts.merge_tolerance > 0.0
        && opts.residual_tolerance > 0.0
        && opts.null_tolerance > 0.0
        && opts.point_extent >= 0.0)
    {
        return Err(Error::InvalidArgument("classification tolerances must be positive".into()));
    }
    let samples = sample_sphere(model.dim, opts.resolution, opts.seed)?;
    let refined: Vec<Refined> = samples
        .par_iter()
        .map(|s| refine(model, problem, s, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let converged = refined.len();
    let points = dedupe(refined);
    let mut flags = Vec::new();
    let groups = cluster(&points, opts.merge_tolerance);
    let mut components = Vec::new();
    for g in groups {
        let members: Vec<&Refined> = g.iter().map(|&i| &points[i]).collect();
        components.push(fit_component(model.dim, &members, opts.point_extent, &mut flags));
    }
    components = merge_coplanar(model.dim, components, &points, &mut flags);
    components.sort_by(|a, b| {
        a.dim.cmp(&b.dim).then_with(|| {
            b.center
                .iter()
                .zip(&a.center)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| *o != std::cmp::Ordering::Equal)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    for i in 0..components.len() {
        for j in i + 1..components.len() {
            let d = witness_distance(&components[i], &components[j]);
            if d < 2.0 * opts.merge_tolerance {
                flags.push(format!(
                    "components {i} and {j} are {d:.3e} apart, within twice the merge tolerance"
                ));
            }
        }
    }
    let kind = set_kind(&components);
    Ok(CriticalSet {
        model: model.kind,
        problem,
        kind,
        components,
        flagged: !flags.is_empty(),
        flags,
        samples: samples.len(),
        converged,
    })
}

fn set_kind(components: &[Component]) -> SetKind {
    let Some(first) = components.first() else {
        return SetKind::Empty;
    };
    if components.iter().any(|c| c.kind != first.kind) {
        return SetKind::Mixed;
    }
    match first.kind {
        ComponentKind::Point => SetKind::IsolatedPoints,
        ComponentKind::Circle => SetKind::CircleFamily,
        ComponentKind::Hypersphere => SetKind::HypersphereFamily,
        ComponentKind::WholeSphere => SetKind::WholeSphere,
    }
}

/// Deterministic, roughly uniform points on `Sⁿ⁻¹`, rotated by a seeded
/// random orthogonal matrix.
pub fn sample_sphere(n: usize, resolution: Option<usize>, seed: u64) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<Vec<f64>> = match n {
        0 | 1 => return Err(Error::InvalidArgument("sphere dimension must be at least 1".into())),
        2 => {
            let m = resolution.unwrap_or(2000).max(8);
            (0..m)
                .map(|k| {
                    let t = std::f64::consts::TAU * (k as f64 + 0.5) / m as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        3 => {
            let m = resolution.unwrap_or(20000).max(16);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let m = resolution
                .unwrap_or_else(|| ((20000.0 / (2 * n) as f64).powf(1.0 / (n - 1) as f64)).floor() as usize)
                .max(3);
            let per_face = m.checked_pow((n - 1) as u32).filter(|c| c * 2 * n <= 5_000_000).ok_or_else(|| {
                Error::InvalidArgument(format!("sampling resolution {m} is too large for dimension {n}"))
            })?;
            let mut out = Vec::with_capacity(per_face * 2 * n);
            for axis in 0..n {
                for sign in [1.0, -1.0] {
                    for idx in 0..per_face {
                        let mut rest = idx;
                        let mut p = vec![0.0; n];
                        for (k, pk) in p.iter_mut().enumerate() {
                            if k == axis {
                                *pk = sign;
                            } else {
                                *pk = -1.0 + (2.0 * (rest % m) as f64 + 1.0) / m as f64;
                                rest /= m;
                            }
                        }
                        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                        out.push(p.into_iter().map(|x| x / norm).collect());
                    }
                }
            }
            out
        }
    };
    let q = random_rotation(n, seed);
    Ok(raw
        .into_iter()
        .map(|p| (&q * DVector::from_vec(p)).as_slice().to_vec())
        .collect())
}

fn random_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| standard_normal(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal basis of `v^⊥`, as columns.
fn tangent_basis(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    // Householder reflection taking v to ±e_k, restricted to the other columns.
    let k = v.iamax();
    let s = if v[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = v.clone();
    w[k] += s;
    let wn = w.norm_squared();
    let h = DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / wn);
    let cols: Vec<usize> = (0..n).filter(|&j| j != k).collect();
    DMatrix::from_fn(n, n - 1, |i, j| h[(i, cols[j])])
}

fn tangent_residual(model: &LeftInvariantModel, problem: Problem, p: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    basis.transpose() * residual_unchecked(model, p, problem)
}

fn jacobian(model: &LeftInvariantModel, problem: Problem, v: &DVector<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let h = 1e-5;
    let m = basis.ncols();
    let mut j = DMatrix::zeros(m, m);
    for c in 0..m {
        let dir = basis.column(c);
        let plus = (v + dir * h).normalize();
        let minus = (v - dir * h).normalize();
        let d = (tangent_residual(model, problem, &plus, basis) - tangent_residual(model, problem, &minus, basis))
            / (2.0 * h);
        j.set_column(c, &d);
    }
    j
}

/// Number of null directions of the tangent Jacobian at a solution.
fn null_dimension(model: &LeftInvariantModel, problem: Problem, v: &DVector<f64>, tol: f64) -> usize {
    let basis = tangent_basis(v);
    let j = jacobian(model, problem, v, &basis);
    let sv = j.singular_values();
    let smax = sv.max();
    let scale = critical_expression(model, v, problem).norm().max(1.0);
    if smax <= 1e-6 * scale {
        return v.len() - 1;
    }
    sv.iter().filter(|s| **s < tol * smax).count()
}

fn refine(model: &LeftInvariantModel, problem: Problem, start: &[f64], opts: &ClassifyOptions) -> Option<Refined> {
    let mut v = DVector::from_column_slice(start).normalize();
    let mut r = residual_unchecked(model, &v, problem).norm();
    let scale = critical_expression(model, &v, problem).norm().max(1.0);
    for _ in 0..opts.max_iterations {
        if r <= 1e-14 * scale {
            break;
        }
        let basis = tangent_basis(&v);
        let j = jacobian(model, problem, &v, &basis);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            break;
        }
        let f = tangent_residual(model, problem, &v, &basis);
        let Ok(mut step) = svd.solve(&(-f), opts.null_tolerance * smax) else {
            break;
        };
        let len = step.norm();
        if len > 0.2 {
            step *= 0.2 / len;
        }
        let next = (&v + &basis * &step).normalize();
        let rn = residual_unchecked(model, &next, problem).norm();
        if rn >= r && r <= opts.residual_tolerance {
            break;
        }
        v = next;
        r = rn;
        if len < 1e-15 {
            break;
        }
    }
    if r > opts.residual_tolerance || !r.is_finite() {
        return None;
    }
    let null_dim = null_dimension(model, problem, &v, opts.null_tolerance);
    Some(Refined { v: v.as_slice().to_vec(), residual: r, null_dim })
}

fn dedupe(points: Vec<Refined>) -> Vec<Refined> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for p in points {
        let key: Vec<i64> = p.v.iter().map(|x| (x * 1e7).round() as i64).collect();
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key) {
            e.insert(out.len());
            out.push(p);
        }
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the `delta`-neighbourhood graph, in order of
/// their first member.
fn cluster(points: &[Refined], delta: f64) -> Vec<Vec<usize>> {
    let n = points.first().map_or(0, |p| p.v.len());
    let cell = |p: &[f64]| -> Vec<i64> { p.iter().map(|x| (x / delta).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(&p.v)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let d = (k % 3) as i64 - 1;
                    k /= 3;
                    d
                })
                .collect()
        })
        .collect();
    for (i, p) in points.iter().enumerate() {
        let c = cell(&p.v);
        for off in &offsets {
            let key: Vec<i64> = c.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&key) {
                for &j in list {
                    if j > i && dist(&p.v, &points[j].v) < delta {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for i in 0..points.len() {
        let r = find(&mut parent, i);
        let g = *index.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

fn fit_component(n: usize, members: &[&Refined], point_extent: f64, flags: &mut Vec<String>) -> Component {
    if let Some(c) = narrow_cluster(n, members, point_extent) {
        return c;
    }
    let mut counts = vec![0usize; n];
    for m in members {
        counts[m.null_dim.min(n - 1)] += 1;
    }
    let dim = (0..n).max_by_key(|&d| (counts[d], std::cmp::Reverse(d))).unwrap_or(0);
    if counts[dim] != members.len() {
        flags.push(format!(
            "cluster of {} points has mixed local dimensions {:?}",
            members.len(),
            counts
        ));
    }
    build_component(n, dim, members)
}

/// A cluster too small to be a family. If any member saw a rank-deficient
/// Jacobian the refined points scatter around a degenerate root, and their
/// mean locates it better than any single member.
fn narrow_cluster(n: usize, members: &[&Refined], point_extent: f64) -> Option<Component> {
    let mut mean = vec![0.0; n];
    for m in members {
        for (a, b) in mean.iter_mut().zip(&m.v) {
            *a += b;
        }
    }
    let norm = dot(&mean, &mean).sqrt();
    if norm == 0.0 {
        return None;
    }
    mean.iter_mut().for_each(|x| *x /= norm);
    let extent = members.iter().map(|m| dist(&m.v, &mean)).fold(0.0, f64::max);
    if extent > point_extent {
        return None;
    }
    if members.iter().all(|m| m.null_dim == 0) {
        return Some(build_component(n, 0, members));
    }
    Some(Component {
        kind: ComponentKind::Point,
        dim: 0,
        normals: Vec::new(),
        offset: Vec::new(),
        radius: 0.0,
        center: mean.iter().map(|x| tidy(*x)).collect(),
        witnesses: vec![mean],
        size: members.len(),
        fit_error: extent,
        max_residual: members.iter().map(|m| m.residual).fold(0.0, f64::max),
        degenerate: true,
    })
}

fn build_component(n: usize, dim: usize, members: &[&Refined]) -> Component {
    let best = members
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("non-empty cluster");
    let max_residual = members.iter().map(|m| m.residual).fold(0.0, f64::max);
    let kind = match dim {
        0 => ComponentKind::Point,
        d if d == n - 1 => ComponentKind::WholeSphere,
        1 => ComponentKind::Circle,
        _ => ComponentKind::Hypersphere,
    };
    if dim == 0 {
        let fit_error = members.iter().map(|m| dist(&m.v, &best.v)).fold(0.0, f64::max);
        return Component {
            kind,
            dim,
            normals: Vec::new(),
            offset: Vec::new(),
            radius: 0.0,
            center: best.v.iter().map(|x| tidy(*x)).collect(),
            witnesses: vec![best.v.clone()],
            size: members.len(),
            fit_error,
            max_residual,
            degenerate: false,
        };
    }
    let (normals, offset) = if dim == n - 1 {
        (Vec::new(), Vec::new())
    } else {
        plane_fit(n, dim, members)
    };
    let radius = (1.0 - offset.iter().map(|o| o * o).sum::<f64>()).max(0.0).sqrt();
    let mut center = vec![0.0; n];
    for (nv, o) in normals.iter().zip(&offset) {
        for k in 0..n {
            center[k] += o * nv[k];
        }
    }
    center.iter_mut().for_each(|x| *x = tidy(*x));
    let fit_error = members
        .iter()
        .flat_map(|m| normals.iter().zip(&offset).map(move |(nv, o)| (dot(nv, &m.v) - o).abs()))
        .fold(0.0, f64::max);
    Component {
        kind,
        dim,
        normals,
        offset,
        radius,
        center,
        witnesses: farthest_points(members, &best.v, 12),
        size: members.len(),
        fit_error,
        max_residual,
        degenerate: false,
    }
}

/// Affine span of a `dim`-dimensional round subsphere: the `dim + 1`
/// principal directions span it, the remaining ones are normals.
fn plane_fit(n: usize, dim: usize, members: &[&Refined]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let count = members.len() as f64;
    let mut mean = DVector::zeros(n);
    for m in members {
        mean += DVector::from_column_slice(&m.v);
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    for m in members {
        let d = DVector::from_column_slice(&m.v) - &mean;
        cov += &d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / count);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut normals = Vec::new();
    let mut offset = Vec::new();
    for &k in &order[dim + 1..] {
        let mut nv: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = nv.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        if lead < 0.0 {
            nv.iter_mut().for_each(|x| *x = -*x);
        }
        let o = members.iter().map(|m| dot(&nv, &m.v)).sum::<f64>() / count;
        normals.push(nv.into_iter().map(tidy).collect());
        offset.push(tidy(o));
    }
    (normals, offset)
}

fn farthest_points(members: &[&Refined], start: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut chosen = vec![start.to_vec()];
    let mut d: Vec<f64> = members.iter().map(|m| dist(&m.v, start)).collect();
    while chosen.len() < k.min(members.len()) {
        let (i, far) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, x)| (i, *x))
            .unwrap_or((0, 0.0));
        if far <= 1e-9 {
            break;
        }
        let p = members[i].v.clone();
        for (dj, m) in d.iter_mut().zip(members) {
            *dj = dj.min(dist(&m.v, &p));
        }
        chosen.push(p);
    }
    chosen
}

/// Joins clusters of equal dimension that lie on the same subsphere, which
/// happens when sampling leaves a gap wider than the merge tolerance.
fn merge_coplanar(
    n: usize,
    components: Vec<Component>,
    points: &[Refined],
    flags: &mut Vec<String>,
) -> Vec<Component> {
    let mut comps = components;
    loop {
        let mut pair = None;
        'search: for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                if same_subsphere(&comps[i], &comps[j]) {
                    pair = Some((i, j));
                    break 'search;
                }
            }
        }
        let Some((i, j)) = pair else {
            return comps;
        };
        let b = comps.remove(j);
        let a = comps.remove(i);
        let members: Vec<&Refined> = points
            .iter()
            .filter(|p| {
                (a.contains(&p.v, 1e-6) || b.contains(&p.v, 1e-6)) && p.null_dim == a.dim
            })
            .collect();
        if members.is_empty() {
            flags.push("coplanar merge found no members".into());
            comps.push(a);
            comps.push(b);
            return comps;
        }
        comps.insert(i, build_component(n, a.dim, &members));
    }
}

fn same_subsphere(a: &Component, b: &Component) -> bool {
    if a.dim != b.dim || a.kind == ComponentKind::Point || a.normals.len() != b.normals.len() {
        return false;
    }
    if a.kind == ComponentKind::WholeSphere {
        return true;
    }
    dist(&a.center, &b.center) <= 1e-6
        && b.witnesses.iter().all(|w| a.contains(w, 1e-6))
        && a.witnesses.iter().all(|w| b.contains(w, 1e-6))
}

fn witness_distance(a: &Component, b: &Component) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.witnesses {
        for q in &b.witnesses {
            best = best.min(dist(p, q));
        }
    }
    best
}

/// Flushes round-off sized coordinates to zero so reports stay readable.
fn tidy(x: f64) -> f64 {
    if x.abs() < 1e-13 {
        0.0
    } else {
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Box–Muller.
fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}
