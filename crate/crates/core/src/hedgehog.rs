//! One-homogeneous functions, their gradient images ("hedgehogs"), and the
//! pointwise checks that tie the image geometry back to `D²u`.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{gradient, Grid, Mask, ScalarField};
use crate::io::Table;
use crate::numdiff;
use crate::report::ProbeReport;

/// Relative finite-difference step for derivatives of homogeneous functions.
pub const FD_STEP: f64 = 1e-4;
/// Neighbours used for tangent fits on the image cloud.
pub const KNN: usize = 12;
/// Flag threshold, as a multiple of the median fit residual.
pub const SINGULAR_FACTOR: f64 = 10.0;
/// Alignment required by the normal correspondence check.
pub const ALIGNMENT_TOL: f64 = 1e-3;
/// Eigenvalues below this are treated as the null direction.
pub const PINV_TOL: f64 = 1e-4;
/// Offset of the stencil whose images fix each cloud normal.
pub const SATELLITE_RADIUS: f64 = 1e-3;
/// Image patch radius for the second fundamental form fit.
pub const PATCH_RADIUS: f64 = 1e-2;

type Trace = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

/// `u(x) = |x|^α g(x/|x|)`, or a closed formula with the same homogeneity.
#[derive(Clone)]
pub struct HomogeneousFunction {
    dim: usize,
    degree: f64,
    label: String,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Trace(Arc<Trace>),
    Direct(Arc<Trace>),
}

impl fmt::Debug for HomogeneousFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomogeneousFunction")
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .field("label", &self.label)
            .finish()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized(x: &[f64]) -> Vec<f64> {
    let r = norm(x);
    x.iter().map(|v| v / r).collect()
}

impl HomogeneousFunction {
    /// One-homogeneous extension of a sphere trace.
    pub fn from_trace<G>(dim: usize, label: impl Into<String>, g: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::with_degree(dim, 1.0, label, g)
    }

    /// `|x|^α g(x/|x|)`.
    pub fn with_degree<G>(dim: usize, degree: f64, label: impl Into<String>, g: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        if !degree.is_finite() {
            return Err(Error::InvalidParameter(format!("degree {degree}")));
        }
        Ok(Self { dim, degree, label: label.into(), kind: Kind::Trace(Arc::new(move |x| Ok(g(x)))) })
    }

    /// Trace given as an expression in `x, y, z, w`, evaluated on the unit sphere.
    pub fn from_expr(dim: usize, expr: Expr) -> Result<Self> {
        check_dim(dim)?;
        if expr.required_len() > dim {
            return Err(Error::DimensionMismatch { expected: dim, found: expr.required_len() });
        }
        let label = format!("{expr}");
        Ok(Self { dim, degree: 1.0, label, kind: Kind::Trace(Arc::new(move |x| Ok(expr.eval(x)?))) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let r = norm(x);
        if r == 0.0 || !r.is_finite() {
            return Err(Error::SingularPoint);
        }
        match &self.kind {
            Kind::Direct(f) => f(x),
            Kind::Trace(g) => {
                let xhat: Vec<f64> = x.iter().map(|v| v / r).collect();
                let s = g(&xhat)?;
                Ok(if self.degree == 1.0 { r * s } else { r.powf(self.degree) * s })
            }
        }
    }

    fn value_or_nan(&self, x: &[f64]) -> f64 {
        self.value(x).unwrap_or(f64::NAN)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.value(x)?;
        let g = numdiff::gradient(|p| self.value_or_nan(p), x, FD_STEP * norm(x));
        finite(g)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if !(2..=4).contains(&dim) {
        return Err(Error::InvalidParameter(format!("dimension {dim} outside 2..=4")));
    }
    Ok(())
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::SingularPoint)
    }
}

/// `(|z₁|² − |z₂|²) / |z|` on `ℝ⁴ = ℂ²`.
pub fn four_d_example() -> HomogeneousFunction {
    let f = |x: &[f64]| {
        let a = x[0] * x[0] + x[1] * x[1];
        let b = x[2] * x[2] + x[3] * x[3];
        Ok((a - b) / (a + b).sqrt())
    };
    HomogeneousFunction { dim: 4, degree: 1.0, label: "fourd".into(), kind: Kind::Direct(Arc::new(f)) }
}

/// Distance on `S³` from `x/|x|` to the Clifford torus `|z₁| = |z₂|`.
pub fn clifford_distance(x: &[f64]) -> f64 {
    let a = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let b = (x[2] * x[2] + x[3] * x[3]).sqrt();
    (b.atan2(a) - FRAC_PI_4).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `n × n`.
    pub hessian: Vec<f64>,
}

impl HomogeneousEval {
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let n = self.gradient.len();
        DMatrix::from_row_slice(n, n, &self.hessian)
    }
}

pub fn eval_homogeneous(f: &HomogeneousFunction, x: &[f64]) -> Result<HomogeneousEval> {
    let value = f.value(x)?;
    let step = FD_STEP * norm(x);
    let gradient = finite(numdiff::gradient(|p| f.value_or_nan(p), x, step))?;
    let hessian = finite(numdiff::hessian(|p| f.value_or_nan(p), x, step))?;
    Ok(HomogeneousEval { value, gradient, hessian })
}

pub fn hessian_spectrum(f: &HomogeneousFunction, x: &[f64]) -> Result<Vec<f64>> {
    let e = eval_homogeneous(f, x)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(e.hessian_matrix()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Orthonormal basis of `x^⊥`, as columns.
fn tangent_basis(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let xhat = DVector::from_vec(normalized(x));
    let proj = DMatrix::identity(n, n) - &xhat * xhat.transpose();
    let eig = SymmetricEigen::new(proj);
    let mut cols: Vec<(f64, DVector<f64>)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())).collect();
    cols.sort_by(|a, b| b.0.total_cmp(&a.0));
    DMatrix::from_columns(&cols[..n - 1].iter().map(|c| c.1.clone()).collect::<Vec<_>>())
}

/// `D²u` restricted to `x^⊥`, in the basis of `tangent_basis(x)`.
fn tangential_hessian(e: &HomogeneousEval, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = tangent_basis(x);
    let m = t.transpose() * e.hessian_matrix() * &t;
    (0.5 * (&m + m.transpose()), t)
}

/// Eigenvalues relevant to ellipticity: the tangential ones for degree 1
/// (the radial direction is null), all of them otherwise.
fn relevant_eigenvalues(f: &HomogeneousFunction, x: &[f64]) -> Result<Vec<f64>> {
    let e = eval_homogeneous(f, x)?;
    let m = if f.degree() == 1.0 { tangential_hessian(&e, x).0 } else { e.hessian_matrix() };
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// At each sample the relevant Hessian eigenvalues must take both signs, with
/// `max λ⁺ / max |λ⁻|` and its reciprocal at most `ratio_cap`.
pub fn elliptic_solvability_check(f: &HomogeneousFunction, samples: &[Vec<f64>], ratio_cap: f64) -> Result<ProbeReport> {
    if samples.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut worst = 1.0f64;
    let mut one_sided = 0usize;
    let mut flat = 0usize;
    for x in samples {
        let ev = relevant_eigenvalues(f, x)?;
        let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zero = 1e-6 * scale.max(1.0);
        let pos = ev.iter().copied().filter(|&v| v > zero).fold(0.0, f64::max);
        let neg = ev.iter().copied().filter(|&v| v < -zero).fold(0.0, |m: f64, v| m.max(-v));
        if pos == 0.0 && neg == 0.0 {
            flat += 1;
            continue;
        }
        if pos == 0.0 || neg == 0.0 {
            one_sided += 1;
            worst = f64::INFINITY;
            continue;
        }
        worst = worst.max((pos / neg).max(neg / pos));
    }
    let mut r = ProbeReport::new("elliptic_solvability")
        .with("samples", samples.len() as f64)
        .with("worst_ratio", worst)
        .with("ratio_cap", ratio_cap)
        .with("one_sided", one_sided as f64)
        .with("flat", flat as f64);
    if one_sided > 0 {
        r.note("definite Hessian at some sample: no uniformly elliptic annihilator");
    }
    Ok(r.decide(if worst.is_finite() { (ratio_cap - worst) / ratio_cap } else { f64::NEG_INFINITY }))
}

/// Uniform points on `S^{n−1}`.
pub fn sphere_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&v);
        if r > 1e-8 {
            out.push(v.iter().map(|c| c / r).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgehogCloud {
    pub points: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub normals: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub singular: Vec<bool>,
    /// Sign of `det` of the tangential Hessian: the orientation of the
    /// gradient map at each sample (0 where it degenerates).
    pub orientation: Vec<i8>,
    /// Connected components of the neighbour graph on non-singular images,
    /// with edges only between points of equal orientation. Pieces with at
    /// most `KNN` points are counted as fragments instead.
    pub components: usize,
    pub fragments: usize,
    /// Component label per point (`usize::MAX` for singular points).
    pub component: Vec<usize>,
}

impl HedgehogCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn regular_count(&self) -> usize {
        self.singular.iter().filter(|s| !**s).count()
    }

    pub fn to_table(&self) -> Table {
        let n = self.points.first().map_or(0, Vec::len);
        let mut cols = Vec::new();
        for prefix in ["x", "p", "nu"] {
            cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
        }
        cols.push("singular".into());
        let mut t = Table::new(&cols);
        for i in 0..self.len() {
            let mut row: Vec<f64> = Vec::with_capacity(3 * n + 1);
            row.extend(&self.points[i]);
            row.extend(&self.images[i]);
            row.extend(&self.normals[i]);
            row.push(if self.singular[i] { 1.0 } else { 0.0 });
            t.push_numbers(&row);
        }
        t
    }
}

fn knn(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let k = k.min(points.len().saturating_sub(1));
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
                .collect();
            if k < d.len() {
                d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.truncate(k);
            }
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Symmetric offsets in `ℝᵐ`: `±eⱼ`, `±eⱼ/2`, `±eⱼ ± eₖ`.
fn stencil(m: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for j in 0..m {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; m];
            d[j] = s;
            dirs.push(d);
        }
        for k in j + 1..m {
            for (sj, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut d = vec![0.0; m];
                d[j] = sj;
                d[k] = sk;
                dirs.push(d);
            }
        }
        for s in [0.5, -0.5] {
            let mut d = vec![0.0; m];
            d[j] = s;
            dirs.push(d);
        }
    }
    dirs
}

/// Tangent fit at `center`: PCA plane, then a quadratic height fit over the
/// same points. Returns the normal and the relative PCA thickness.
fn fit_normal(center: &[f64], others: &[&Vec<f64>]) -> (Vec<f64>, f64) {
    let n = center.len();
    let center = center.to_vec();
    let pts: Vec<&Vec<f64>> = std::iter::once(&center).chain(others.iter().copied()).collect();
    let mut mean = vec![0.0; n];
    for p in &pts {
        for a in 0..n {
            mean[a] += p[a] / pts.len() as f64;
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    for p in &pts {
        let d = DVector::from_iterator(n, (0..n).map(|a| p[a] - mean[a]));
        cov += &d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let scale2 = 1.0 + dot(&center, &center);
    if total <= 1e-20 * scale2 {
        return (vec![f64::NAN; n], f64::INFINITY);
    }
    let residual = (eig.eigenvalues[order[0]].max(0.0) / total).sqrt();
    let nu0 = eig.eigenvectors.column(order[0]).into_owned();
    let tan: Vec<DVector<f64>> = order[1..].iter().map(|&c| eig.eigenvectors.column(c).into_owned()).collect();
    let m = n - 1;
    let radius =
        pts.iter().map(|p| p.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let unknowns = 1 + m + m * (m + 1) / 2;
    let pca = nu0.iter().copied().collect::<Vec<f64>>();
    if pts.len() <= unknowns || radius == 0.0 {
        return (pca, residual);
    }
    let mut a = DMatrix::zeros(pts.len(), unknowns);
    let mut rhs = DVector::zeros(pts.len());
    for (row, p) in pts.iter().enumerate() {
        let d = DVector::from_iterator(n, (0..n).map(|c| (p[c] - center[c]) / radius));
        let s: Vec<f64> = tan.iter().map(|t| t.dot(&d)).collect();
        rhs[row] = nu0.dot(&d);
        a[(row, 0)] = 1.0;
        let mut col = 1;
        for &sj in &s {
            a[(row, col)] = sj;
            col += 1;
        }
        for j in 0..m {
            for k in j..m {
                a[(row, col)] = s[j] * s[k];
                col += 1;
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() < 1e-8 * smax {
        return (pca, residual);
    }
    let Ok(coef) = svd.solve(&rhs, 0.0) else {
        return (pca, residual);
    };
    let mut nu = nu0.clone();
    for (j, t) in tan.iter().enumerate() {
        nu -= coef[1 + j] * t;
    }
    let nu = nu.normalize();
    (nu.iter().copied().collect(), residual)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Image cloud over `count` seeded uniform sphere samples.
pub fn hedgehog_cloud(f: &HomogeneousFunction, count: usize, seed: u64) -> Result<HedgehogCloud> {
    let n = f.dim();
    if count < 10 * n * n {
        return Err(Error::InvalidParameter(format!("{count} samples, need at least {}", 10 * n * n)));
    }
    cloud_from_points(f, sphere_samples(n, count, seed))
}

/// Image cloud over caller-chosen unit vectors.
pub fn cloud_from_points(f: &HomogeneousFunction, points: Vec<Vec<f64>>) -> Result<HedgehogCloud> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    for p in &points {
        if p.len() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), found: p.len() });
        }
        if (norm(p) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("sample of norm {} is not on the unit sphere", norm(p))));
        }
    }
    let images = points.iter().map(|x| f.gradient(x)).collect::<Result<Vec<_>>>()?;
    let orientation = points
        .iter()
        .map(|x| {
            let e = eval_homogeneous(f, x)?;
            let (m, _) = tangential_hessian(&e, x);
            let ev = SymmetricEigen::new(m).eigenvalues;
            let scale = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            Ok(if ev.iter().any(|v| v.abs() <= 1e-8 * scale.max(1e-300)) || scale == 0.0 {
                0
            } else if ev.iter().filter(|v| **v < 0.0).count() % 2 == 0 {
                1
            } else {
                -1
            })
        })
        .collect::<Result<Vec<i8>>>()?;
    let nbrs = knn(&images, KNN);
    let residuals: Vec<f64> =
        (0..images.len()).map(|i| fit_normal(&images[i], &nbrs[i].iter().map(|&j| &images[j]).collect::<Vec<_>>()).1).collect();
    let dirs = stencil(f.dim() - 1);
    let normals = points
        .iter()
        .zip(&images)
        .map(|(x, p)| {
            let t = tangent_basis(x);
            let sats = dirs
                .iter()
                .map(|d| {
                    let step = &t * DVector::from_iterator(d.len(), d.iter().map(|v| v * SATELLITE_RADIUS));
                    let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                    f.gradient(&normalized(&y))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(fit_normal(p, &sats.iter().collect::<Vec<_>>()).0)
        })
        .collect::<Result<Vec<_>>>()?;
    let cut = median(residuals.iter().copied().filter(|r| r.is_finite()).collect()).map(|m| SINGULAR_FACTOR * m);
    let singular: Vec<bool> = residuals.iter().map(|&r| cut.is_none_or(|c| !(r <= c))).collect();

    let mut parent: Vec<usize> = (0..images.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..images.len() {
        if singular[i] {
            continue;
        }
        for &j in &nbrs[i] {
            if !singular[j] && orientation[i] == orientation[j] {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut labels = std::collections::BTreeMap::new();
    let mut component = vec![usize::MAX; images.len()];
    for i in 0..images.len() {
        if !singular[i] {
            let r = root(&mut parent, i);
            let next = labels.len();
            component[i] = *labels.entry(r).or_insert(next);
        }
    }
    let mut sizes = vec![0usize; labels.len()];
    for &c in component.iter().filter(|&&c| c != usize::MAX) {
        sizes[c] += 1;
    }
    let components = sizes.iter().filter(|&&s| s > KNN).count();
    let fragments = sizes.len() - components;
    Ok(HedgehogCloud { points, images, normals, residuals, singular, orientation, components, fragments, component })
}

/// Fraction of non-singular points whose fitted normal is aligned with the
/// sample direction, `|νᵢ · xᵢ| ≥ 1 − 1e−3`.
pub fn normal_correspondence_check(cloud: &HedgehogCloud) -> Result<ProbeReport> {
    let regular: Vec<usize> = (0..cloud.len()).filter(|&i| !cloud.singular[i]).collect();
    if regular.len() < 100 {
        return Err(Error::NotApplicable(format!("{} non-singular points, need 100", regular.len())));
    }
    let scores: Vec<f64> = regular.iter().map(|&i| dot(&cloud.normals[i], &cloud.points[i]).abs()).collect();
    let good = scores.iter().filter(|&&s| s >= 1.0 - ALIGNMENT_TOL).count();
    let fraction = good as f64 / regular.len() as f64;
    let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProbeReport::new("normal_correspondence")
        .with("points", cloud.len() as f64)
        .with("regular", regular.len() as f64)
        .with("fraction", fraction)
        .with("worst_alignment", worst)
        .with("components", cloud.components as f64)
        .with("fragments", cloud.fragments as f64)
        .decide(fraction - 0.99))
}

/// Second fundamental form of the image at `∇u(x)` by a quadratic fit,
/// against the pseudo-inverse of the tangential Hessian.
pub fn second_form_check(f: &HomogeneousFunction, x: &[f64]) -> Result<ProbeReport> {
    let xhat = normalized(x);
    let e = eval_homogeneous(f, &xhat)?;
    let (m, t) = tangential_hessian(&e, &xhat);
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let smallest = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let largest = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if smallest < PINV_TOL {
        return Err(Error::NotApplicable(format!("tangential eigenvalue {smallest} below {PINV_TOL}")));
    }
    let expected = m.clone().try_inverse().ok_or(Error::SingularPoint)?;
    let tau = PATCH_RADIUS / largest;
    let mut dirs = stencil(dim);
    dirs.push(vec![0.0; dim]);
    let p0 = DVector::from_vec(e.gradient.clone());
    let xv = DVector::from_vec(xhat.clone());
    let unknowns = 1 + dim + dim * (dim + 1) / 2;
    let mut a = DMatrix::zeros(dirs.len(), unknowns);
    let mut rhs = DVector::zeros(dirs.len());
    for (row, d) in dirs.iter().enumerate() {
        let step = &t * DVector::from_iterator(dim, d.iter().map(|v| v * tau));
        let y: Vec<f64> = (0..xhat.len()).map(|c| xhat[c] + step[c]).collect();
        let q = DVector::from_vec(f.gradient(&normalized(&y))?) - &p0;
        let s = t.transpose() * &q;
        rhs[row] = xv.dot(&q);
        a[(row, 0)] = 1.0;
        let mut col = 1;
        for j in 0..dim {
            a[(row, col)] = s[j];
            col += 1;
        }
        for j in 0..dim {
            for k in j..dim {
                a[(row, col)] = if j == k { 0.5 * s[j] * s[j] } else { s[j] * s[k] };
                col += 1;
            }
        }
    }
    let coef = a.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::NotApplicable(e.to_string()))?;
    let mut second = DMatrix::zeros(dim, dim);
    let mut col = 1 + dim;
    for j in 0..dim {
        for k in j..dim {
            second[(j, k)] = -coef[col];
            second[(k, j)] = -coef[col];
            col += 1;
        }
    }
    let rel = (&second - &expected).norm() / expected.norm();
    let mut r = ProbeReport::new("second_form")
        .with("relative_error", rel)
        .with("patch_radius", PATCH_RADIUS)
        .with("min_tangential_eigenvalue", smallest);
    let fitted = SymmetricEigen::new(second).eigenvalues;
    let inv = SymmetricEigen::new(expected).eigenvalues;
    let mut fitted: Vec<f64> = fitted.iter().copied().collect();
    let mut inv: Vec<f64> = inv.iter().copied().collect();
    fitted.sort_by(f64::total_cmp);
    inv.sort_by(f64::total_cmp);
    for (j, (a, b)) in fitted.iter().zip(&inv).enumerate() {
        r.set(&format!("ii_{j}"), *a);
        r.set(&format!("pinv_{j}"), *b);
    }
    Ok(r.decide(0.05 - rel))
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub function: HomogeneousFunction,
    pub mu: f64,
    pub lambda_g: f64,
    pub report: ProbeReport,
}

fn legendre(k: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if k == 0 {
        return p0;
    }
    for j in 1..k {
        let p2 = ((2 * j + 1) as f64 * t * p1 - j as f64 * p0) / (j + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `u = |x|^α g(x/|x|)` with `g = cos(kθ)` (n = 2) or the degree-`k` zonal
/// harmonic (n = 3), solving `∂ᵢ(aᵢⱼ∂ⱼu) = 0` for `a = I + μ x̂⊗x̂`.
pub fn radial_homogeneous_solution(alpha: f64, k: usize, n: usize) -> Result<RadialSolution> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let (lambda_g, function) = match n {
        2 => (
            (k * k) as f64,
            HomogeneousFunction::with_degree(2, alpha, format!("cos({k}θ)"), move |x| (k as f64 * x[1].atan2(x[0])).cos())?,
        ),
        3 => ((k * (k + 1)) as f64, HomogeneousFunction::with_degree(3, alpha, format!("P_{k}"), move |x| legendre(k, x[2]))?),
        _ => return Err(Error::InvalidParameter(format!("dimension {n} not supported, use 2 or 3"))),
    };
    let denom = alpha * (alpha + n as f64 - 2.0);
    if denom == 0.0 {
        return Err(Error::InvalidParameter("alpha(alpha+n-2) vanishes".into()));
    }
    let mu = lambda_g / denom - 1.0;
    if mu <= -1.0 {
        return Err(Error::NotElliptic(mu));
    }
    let (residual, scale, samples) = divergence_residual(&function, mu, 0.25, 0.75);
    let rel = residual / scale;
    let report = ProbeReport::new("radial_homogeneous")
        .with("alpha", alpha)
        .with("k", k as f64)
        .with("n", n as f64)
        .with("lambda_g", lambda_g)
        .with("mu", mu)
        .with("window_min", 1.0f64.min(1.0 + mu))
        .with("window_max", 1.0f64.max(1.0 + mu))
        .with("residual", residual)
        .with("relative_residual", rel)
        .with("samples", samples as f64)
        .decide(1e-3 - rel);
    Ok(RadialSolution { function, mu, lambda_g, report })
}

/// Max of `|∂ᵢ(aᵢⱼ∂ⱼu)|` over a lattice in the annulus, by central differences
/// of the flux; also the max of `(1 + |μ|)|∇u|/|x|`, the size of a single
/// second-derivative term, for scale.
fn divergence_residual(f: &HomogeneousFunction, mu: f64, r_in: f64, r_out: f64) -> (f64, f64, usize) {
    let n = f.dim();
    let per_axis: usize = if n == 2 { 41 } else { 17 };
    let h = 2.0 * r_out / (per_axis - 1) as f64;
    let flux = |x: &[f64], i: usize| -> f64 {
        let g = f.gradient(x).unwrap_or_else(|_| vec![f64::NAN; n]);
        let r2 = dot(x, x);
        let xg = dot(x, &g);
        g[i] + mu * x[i] * xg / r2
    };
    let (mut worst, mut scale, mut count) = (0.0f64, 0.0f64, 0usize);
    let total = per_axis.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let c = rem % per_axis;
                rem /= per_axis;
                -r_out + c as f64 * h
            })
            .collect();
        let r = norm(&x);
        if r < r_in || r > r_out {
            continue;
        }
        count += 1;
        let d = 1e-3 * r;
        let mut div = 0.0;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += d;
            xm[i] -= d;
            div += (flux(&xp, i) - flux(&xm, i)) / (2.0 * d);
        }
        let g = f.gradient(&x).map_or(f64::NAN, |g| norm(&g));
        worst = worst.max(div.abs());
        scale = scale.max((1.0 + mu.abs()) * g / r);
    }
    (worst, scale, count)
}

/// `v = x₃/|x|` sampled on a 3D ball grid, with its oscillation and energy audit.
pub fn zero_homogeneous_counterexample(res: usize) -> Result<(ScalarField, ProbeReport)> {
    let grid = Arc::new(Grid::new(3, res, Mask::Ball)?);
    let g = |x: &[f64]| {
        let r = norm(x);
        if r == 0.0 {
            0.0
        } else {
            x[2] / r
        }
    };
    let v = ScalarField::from_fn(grid.clone(), g);
    let mut oscs = Vec::new();
    let dirs = sphere_samples(3, 2000, 1);
    for r in [0.25, 0.5, 0.75] {
        let mut vals: Vec<f64> = dirs.iter().map(|d| g(&d.iter().map(|c| r * c).collect::<Vec<_>>())).collect();
        vals.push(g(&[0.0, 0.0, r]));
        vals.push(g(&[0.0, 0.0, -r]));
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        oscs.push(hi - lo);
    }
    let spread = oscs.iter().fold(0.0f64, |m, o| m.max((o - oscs[0]).abs()));
    let grad = gradient(&v);
    let w = grid.h().powi(3);
    let energy: f64 = (0..grid.len())
        .filter(|&i| {
            let r = grid.norm(i);
            grid.is_active(i) && (0.01..=1.0).contains(&r)
        })
        .map(|i| {
            let gi = grad.at(i);
            w * dot(gi, gi)
        })
        .sum();
    let exact = 0.99 * 8.0 * std::f64::consts::PI / 3.0;
    let rel = (energy - exact).abs() / exact;
    let near = grid.nodes_in_ball(&[0.0; 3], 1.5 * grid.h());
    let (lo, hi) = near.iter().map(|&i| v.at(i)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let osc_small = hi - lo;
    let report = ProbeReport::new("zero_homogeneous")
        .with("osc_sphere", oscs[0])
        .with("osc_spread", spread)
        .with("energy", energy)
        .with("energy_exact", exact)
        .with("energy_rel_error", rel)
        .with("osc_near_origin", osc_small)
        .decide((0.1 - rel).min(osc_small - 1.0).min(1e-12 - spread));
    Ok((v, report))
}
