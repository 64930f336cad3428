//! Uniform grids on `[-s, s]ⁿ` with a ball or square mask, and the discrete
//! calculus the solver and probes share.
//!
//! Node `(i₀, …, i_{n−1})` has flat index `Σ i_k res^k` (axis 0 fastest) and
//! coordinates `x_k = −s + i_k h` with `h = 2s / (res − 1)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Variable};

pub const MAX_DIM: usize = 4;
const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mask {
    Ball,
    Square,
}

impl Mask {
    pub fn name(self) -> &'static str {
        match self {
            Mask::Ball => "ball",
            Mask::Square => "square",
        }
    }
}

impl std::str::FromStr for Mask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" => Ok(Mask::Ball),
            "square" => Ok(Mask::Square),
            _ => Err(Error::InvalidParameter(format!("unknown mask `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    res: usize,
    scale: f64,
    mask: Mask,
    h: f64,
    kinds: Vec<NodeKind>,
}

impl Grid {
    /// Grid on `[-1, 1]ⁿ`.
    pub fn new(dim: usize, res: usize, mask: Mask) -> Result<Self> {
        Self::with_scale(dim, res, mask, 1.0)
    }

    /// Grid on `[-scale, scale]ⁿ`; the ball mask is then `B_scale`.
    pub fn with_scale(dim: usize, res: usize, mask: Mask, scale: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} not in 1..=4")));
        }
        if res < 9 || res.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("resolution {res} must be odd and >= 9")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
        }
        let total = res
            .checked_pow(dim as u32)
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| Error::InvalidParameter(format!("{res}^{dim} nodes is too many")))?;
        let h = 2.0 * scale / (res - 1) as f64;
        let mut grid = Grid { dim, res, scale, mask, h, kinds: vec![NodeKind::Exterior; total] };
        match mask {
            Mask::Square => {
                for idx in 0..total {
                    let on_rim = grid.multi_index(idx)[..dim].iter().any(|&i| i == 0 || i == res - 1);
                    grid.kinds[idx] = if on_rim { NodeKind::Boundary } else { NodeKind::Interior };
                }
            }
            Mask::Ball => {
                let limit = scale * (1.0 - GEOM_TOL);
                for idx in 0..total {
                    if grid.norm(idx) < limit {
                        grid.kinds[idx] = NodeKind::Interior;
                    }
                }
                for idx in 0..total {
                    if grid.kinds[idx] == NodeKind::Exterior
                        && grid.king_neighbors(idx).any(|j| grid.kinds[j] == NodeKind::Interior)
                    {
                        grid.kinds[idx] = NodeKind::Boundary;
                    }
                }
            }
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mask(&self) -> Mask {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    /// Interior or boundary.
    pub fn is_active(&self, idx: usize) -> bool {
        self.kinds[idx] != NodeKind::Exterior
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.res.pow(axis as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for slot in out.iter_mut().take(self.dim) {
            *slot = idx % self.res;
            idx /= self.res;
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().take(self.dim).rev().fold(0, |acc, &i| acc * self.res + i)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.scale + i as f64 * self.h
    }

    pub fn coord(&self, idx: usize, axis: usize) -> f64 {
        self.axis_coord((idx / self.stride(axis)) % self.res)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mi = self.multi_index(idx);
        mi[..self.dim].iter().map(|&i| self.axis_coord(i)).collect()
    }

    pub fn norm(&self, idx: usize) -> f64 {
        let mi = self.multi_index(idx);
        mi[..self.dim].iter().map(|&i| self.axis_coord(i).powi(2)).sum::<f64>().sqrt()
    }

    /// Neighbor along `axis` in direction `step` (±1), if it exists.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let i = (idx / self.stride(axis)) % self.res;
        let j = i as isize + step;
        if j < 0 || j >= self.res as isize {
            return None;
        }
        Some((idx as isize + step * self.stride(axis) as isize) as usize)
    }

    /// All `3ⁿ − 1` neighbors sharing a cell with `idx`.
    pub fn king_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let mi = self.multi_index(idx);
        let count = 3usize.pow(self.dim as u32);
        (0..count).filter_map(move |mut code| {
            let mut nb = [0usize; MAX_DIM];
            let mut center = true;
            for a in 0..self.dim {
                let off = (code % 3) as isize - 1;
                code /= 3;
                if off != 0 {
                    center = false;
                }
                let j = mi[a] as isize + off;
                if j < 0 || j >= self.res as isize {
                    return None;
                }
                nb[a] = j as usize;
            }
            (!center).then(|| self.flat_index(&nb[..self.dim]))
        })
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.kinds[i] == NodeKind::Interior)
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.kinds[i] == NodeKind::Boundary)
    }

    /// Whether the closed ball `B_r(center)` lies inside the masked domain.
    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        if center.len() != self.dim || r < 0.0 {
            return false;
        }
        let slack = self.scale * (1.0 + GEOM_TOL);
        match self.mask {
            Mask::Ball => center.iter().map(|c| c * c).sum::<f64>().sqrt() + r <= slack,
            Mask::Square => center.iter().all(|c| c.abs() + r <= slack),
        }
    }

    fn check_ball(&self, center: &[f64], r: f64) -> Result<()> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: center.len() });
        }
        if !self.contains_ball(center, r) {
            return Err(Error::OutOfDomain { center: center.to_vec(), radius: r });
        }
        Ok(())
    }

    /// Nodes of the closed ball `|x − center| ≤ r`, in index order.
    pub fn nodes_in_ball(&self, center: &[f64], r: f64) -> Vec<usize> {
        let tol = GEOM_TOL * self.scale;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for a in 0..self.dim {
            let to_index = |x: f64| ((x + self.scale) / self.h).clamp(0.0, (self.res - 1) as f64);
            lo[a] = to_index(center[a] - r - tol).floor() as usize;
            hi[a] = to_index(center[a] + r + tol).ceil() as usize;
        }
        let mut out = Vec::new();
        let mut mi = lo;
        'outer: loop {
            let d2: f64 = (0..self.dim).map(|a| (self.axis_coord(mi[a]) - center[a]).powi(2)).sum();
            if d2.sqrt() <= r + tol {
                out.push(self.flat_index(&mi[..self.dim]));
            }
            for a in 0..self.dim {
                if mi[a] < hi[a] {
                    mi[a] += 1;
                    continue 'outer;
                }
                mi[a] = lo[a];
            }
            break;
        }
        out.sort_unstable();
        out
    }

    /// `hⁿ`-weighted sum of `value(idx)` over the nodes of `B_r(center)`.
    pub fn ball_sum<F: Fn(usize) -> f64>(&self, center: &[f64], r: f64, value: F) -> Result<f64> {
        self.check_ball(center, r)?;
        let w = self.h.powi(self.dim as i32);
        Ok(self.nodes_in_ball(center, r).into_iter().map(|i| w * value(i)).sum())
    }
}

/// Values on the nodes of a grid; exterior nodes hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::from_fn(grid, |_| 0.0)
    }

    /// Samples `f` at interior and boundary nodes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Arc<Grid>, f: F) -> Self {
        let values = (0..grid.len()).map(|i| if grid.is_active(i) { f(&grid.point(i)) } else { f64::NAN }).collect();
        Self { grid, values }
    }

    /// Samples an expression in the spatial variables at interior and boundary nodes.
    pub fn from_expr(grid: Arc<Grid>, expr: &Expr) -> Result<Self> {
        check_spatial(expr, grid.dim())?;
        let mut values = vec![f64::NAN; grid.len()];
        for (i, v) in values.iter_mut().enumerate() {
            if grid.is_active(i) {
                let p = grid.point(i);
                *v = expr.eval(&p).map_err(|source| Error::BoundaryEvaluation { node: i, point: p, source })?;
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Pointwise map, preserving NaN on exterior nodes.
    /// Multilinear interpolation; `None` outside the grid or next to an
    /// inactive node.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &*self.grid;
        if x.len() != g.dim {
            return None;
        }
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for k in 0..g.dim {
            let t = (x[k] + g.scale) / g.h;
            if !(t >= 0.0 && t <= (g.res - 1) as f64) {
                return None;
            }
            let i = (t.floor() as usize).min(g.res - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut corners = Vec::with_capacity(1 << g.dim);
        for corner in 0..(1usize << g.dim) {
            let mut mi = base;
            for (k, slot) in mi.iter_mut().enumerate().take(g.dim) {
                *slot += corner >> k & 1;
            }
            corners.push(self.values[g.flat_index(&mi[..g.dim])]);
        }
        // Collapse one axis at a time; `a + t(b − a)` keeps constants exact.
        for &t in frac[..g.dim].iter() {
            corners = corners
                .chunks(2)
                .map(|c| {
                    if t == 0.0 {
                        c[0]
                    } else if t == 1.0 {
                        c[1]
                    } else {
                        c[0] + t * (c[1] - c[0])
                    }
                })
                .collect();
        }
        let v = corners[0];
        v.is_finite().then_some(v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| if self.grid.is_active(i) { f(v) } else { f64::NAN }).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// `a·self + b·other` on a shared grid.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// `∫_{B_r(center)} f dx` by node quadrature.
    pub fn integrate(&self, center: &[f64], r: f64) -> Result<f64> {
        self.grid.ball_sum(center, r, |i| self.values[i])
    }

    /// Max and min over the nodes of the closed ball (finite values only).
    pub fn extrema_in_ball(&self, center: &[f64], r: f64) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for i in self.grid.nodes_in_ball(center, r) {
            let v = self.values[i];
            if v.is_finite() {
                out = Some(match out {
                    None => (v, v),
                    Some((mx, mn)) => (mx.max(v), mn.min(v)),
                });
            }
        }
        out
    }
}

/// A vector per node (`dim` components, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl VectorField {
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        let want = grid.len() * grid.dim();
        if values.len() != want {
            return Err(Error::DimensionMismatch { expected: want, found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(grid: Arc<Grid>, f: F) -> Self {
        let n = grid.dim();
        let mut values = vec![f64::NAN; grid.len() * n];
        for i in 0..grid.len() {
            if grid.is_active(i) {
                values[i * n..(i + 1) * n].copy_from_slice(&f(&grid.point(i)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.values[idx * n..(idx + 1) * n]
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        let n = self.grid.dim();
        let values = (0..self.grid.len()).map(|i| self.values[i * n + axis]).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// `|v|²` per node.
    pub fn norm_squared(&self) -> ScalarField {
        let values = (0..self.grid.len()).map(|i| self.at(i).iter().map(|c| c * c).sum()).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Pointwise dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        let values = (0..self.grid.len()).map(|i| self.at(i).iter().zip(other.at(i)).map(|(a, b)| a * b).sum()).collect();
        ScalarField { grid: self.grid.clone(), values }
    }
}

/// Derivative of the node values along one axis at `idx`.
///
/// Centered where both neighbors hold finite values, otherwise one-sided
/// second order, then first order; NaN when no neighbor is usable.
fn axis_derivative(grid: &Grid, values: &[f64], idx: usize, axis: usize) -> f64 {
    let h = grid.h();
    let get = |step: isize| grid.neighbor(idx, axis, step).map(|j| values[j]).filter(|v| v.is_finite());
    let v0 = values[idx];
    match (get(-1), get(1)) {
        (Some(m), Some(p)) => (p - m) / (2.0 * h),
        (None, Some(p)) => match get(2) {
            Some(p2) => (-3.0 * v0 + 4.0 * p - p2) / (2.0 * h),
            None => (p - v0) / h,
        },
        (Some(m), None) => match get(-2) {
            Some(m2) => (3.0 * v0 - 4.0 * m + m2) / (2.0 * h),
            None => (v0 - m) / h,
        },
        (None, None) => f64::NAN,
    }
}

/// Discrete gradient; exact on affine fields (and, at interior nodes, on quadratics).
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid.clone();
    let n = grid.dim();
    let mut values = vec![f64::NAN; grid.len() * n];
    for idx in 0..grid.len() {
        if !f.values[idx].is_finite() {
            continue;
        }
        for a in 0..n {
            values[idx * n + a] = axis_derivative(&grid, &f.values, idx, a);
        }
    }
    VectorField { grid, values }
}

/// Discrete divergence with the same stencils as [`gradient`].
pub fn divergence(g: &VectorField) -> ScalarField {
    let grid = g.grid.clone();
    let n = grid.dim();
    let components: Vec<ScalarField> = (0..n).map(|a| g.component(a)).collect();
    let values = (0..grid.len())
        .map(|idx| {
            if !grid.is_active(idx) {
                return f64::NAN;
            }
            (0..n).map(|a| axis_derivative(&grid, &components[a].values, idx, a)).sum()
        })
        .collect();
    ScalarField { grid, values }
}

/// Directional derivative `∂_e f` by the discrete gradient.
pub fn directional_derivative(f: &ScalarField, e: &[f64]) -> ScalarField {
    let g = gradient(f);
    let values = (0..f.grid.len()).map(|i| g.at(i).iter().zip(e).map(|(a, b)| a * b).sum()).collect();
    ScalarField { grid: f.grid.clone(), values }
}

fn check_radii(r_in: f64, r_out: f64) -> Result<()> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::InvalidParameter(format!("cutoff radii must satisfy 0 < r_in < r_out (got {r_in}, {r_out})")));
    }
    Ok(())
}

/// Radial cutoff: 1 on `B_{r_in}`, 0 outside `B_{r_out}`, linear in between.
pub fn cutoff(grid: &Arc<Grid>, r_in: f64, r_out: f64) -> Result<ScalarField> {
    cutoff_at(grid, &vec![0.0; grid.dim()], r_in, r_out)
}

pub fn cutoff_at(grid: &Arc<Grid>, center: &[f64], r_in: f64, r_out: f64) -> Result<ScalarField> {
    check_radii(r_in, r_out)?;
    let values = (0..grid.len())
        .map(|i| {
            let d = distance(&grid.point(i), center);
            ((r_out - d) / (r_out - r_in)).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ScalarField { grid: grid.clone(), values })
}

/// Smooth bump `(1 − |x − c|²/ρ²)₊²`.
pub fn bump(grid: &Arc<Grid>, center: &[f64], radius: f64) -> ScalarField {
    let values = (0..grid.len())
        .map(|i| {
            let d2 = distance(&grid.point(i), center).powi(2) / (radius * radius);
            let t = (1.0 - d2).max(0.0);
            t * t
        })
        .collect();
    ScalarField { grid: grid.clone(), values }
}

fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn check_spatial(expr: &Expr, dim: usize) -> Result<()> {
    for v in expr.variables() {
        if matches!(v, Variable::P(_)) || v.index() >= dim {
            return Err(Error::InvalidParameter(format!(
                "expression `{expr}` uses `{v}`, not a spatial variable of a {dim}-d grid"
            )));
        }
    }
    Ok(())
}

/// Dirichlet data on the boundary nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValues {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

/// Evaluates `expr` at the boundary nodes. For the ball mask each node is
/// first projected radially onto the sphere `|x| = scale`.
pub fn trace_boundary(grid: &Grid, expr: &Expr) -> Result<BoundaryValues> {
    check_spatial(expr, grid.dim())?;
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for idx in grid.boundary_nodes() {
        let mut p = grid.point(idx);
        if grid.mask() == Mask::Ball {
            let r = p.iter().map(|c| c * c).sum::<f64>().sqrt();
            p.iter_mut().for_each(|c| *c *= grid.scale() / r);
        }
        let v = expr.eval(&p).map_err(|source| Error::BoundaryEvaluation { node: idx, point: p.clone(), source })?;
        nodes.push(idx);
        values.push(v);
    }
    Ok(BoundaryValues { nodes, values })
}
