//! Minimization of the discrete energy `J_h(u) = Σ_cells Σ_corners w F(g)`
//! over interior node values with Dirichlet data on the boundary ring.
//!
//! Each cell contributes `2ⁿ` corner gradients (forward differences along the
//! cell edges meeting at a corner), each weighted by `hⁿ / 2ⁿ`. The energy is
//! convex in the node values whenever `F` is convex, and for `F = |p|²` its
//! Euler-Lagrange equation is the standard `2n+1`-point Laplacian.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::field::{gradient, BoundaryValues, Grid, NodeKind, ScalarField};
use crate::lagrangian::{convexity_audit, sorted_eigenvalues, EllipticityWindow, GradientRegion, Lagrangian};

/// Smallest continuation parameter still solved for.
pub const MIN_SMOOTHING: f64 = 1e-9;
/// Starting smoothing for Lagrangians with a nonempty degeneracy set.
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GradientDescent,
    NewtonDamped,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GradientDescent => "gradient-descent",
            Method::NewtonDamped => "newton-damped",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient-descent" | "gd" => Ok(Method::GradientDescent),
            "newton-damped" | "newton" => Ok(Method::NewtonDamped),
            _ => Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol_rel_energy: f64,
    /// Stop once `‖∂J_h/∂u‖_∞ ≤ tol_residual · hⁿ`.
    pub tol_residual: f64,
    pub max_iters: usize,
    /// `None` picks `DEFAULT_SMOOTHING` for degenerate `F` and 0 otherwise.
    pub smoothing_eps: Option<f64>,
    pub method: Method,
    pub audit: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_rel_energy: 1e-10,
            tol_residual: 1e-8,
            max_iters: 200_000,
            smoothing_eps: None,
            method: Method::NewtonDamped,
            audit: true,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol_rel_energy > 0.0) || !(self.tol_residual > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if let Some(e) = self.smoothing_eps {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::InvalidParameter(format!("smoothing {e} must be >= 0")));
            }
        }
        Ok(())
    }

    /// The ε values solved in order.
    pub fn schedule(&self, f: &Lagrangian) -> Vec<f64> {
        let start = self.smoothing_eps.unwrap_or(if f.degeneracy().is_empty() { 0.0 } else { DEFAULT_SMOOTHING });
        if start == 0.0 {
            return vec![0.0];
        }
        let mut out = vec![start];
        let mut k = 1;
        loop {
            let e = start / 10f64.powi(k);
            if e < MIN_SMOOTHING * (1.0 - 1e-9) {
                break;
            }
            out.push(e);
            k += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// Set when progress stopped before the residual target was met.
    pub stalled: bool,
    pub method: Method,
    pub iterations: usize,
    pub inner_iterations: usize,
    /// `J_h` of the returned field under the unsmoothed `F`.
    pub energy: f64,
    /// `‖∂J_h/∂u‖_∞ / hⁿ` at the end of the last stage.
    pub residual: f64,
    pub rel_energy_change: f64,
    pub smoothing_schedule: Vec<f64>,
    /// Energy after every accepted step (current smoothing stage).
    pub energy_history: Vec<f64>,
    pub wall_time: f64,
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "converged={}", self.converged)?;
        writeln!(f, "stalled={}", self.stalled)?;
        writeln!(f, "method={}", self.method.name())?;
        writeln!(f, "iterations={}", self.iterations)?;
        writeln!(f, "inner_iterations={}", self.inner_iterations)?;
        writeln!(f, "energy={}", self.energy)?;
        writeln!(f, "residual={}", self.residual)?;
        writeln!(f, "rel_energy_change={}", self.rel_energy_change)?;
        let sched: Vec<String> = self.smoothing_schedule.iter().map(|e| e.to_string()).collect();
        writeln!(f, "smoothing_schedule={}", sched.join(","))?;
        writeln!(f, "wall_time={:.3}", self.wall_time)
    }
}

/// Cell list and corner stencils of a grid.
struct Cells {
    n: usize,
    lower: Vec<usize>,
    offsets: Vec<usize>,
    weight: f64,
    inv_h: f64,
}

impl Cells {
    fn new(grid: &Grid) -> Self {
        let n = grid.dim();
        let corners = 1usize << n;
        let offsets: Vec<usize> =
            (0..corners).map(|b| (0..n).filter(|a| b >> a & 1 == 1).map(|a| grid.stride(a)).sum()).collect();
        let lower = (0..grid.len())
            .filter(|&i| {
                let mi = grid.multi_index(i);
                mi[..n].iter().all(|&k| k + 1 < grid.res()) && offsets.iter().all(|&o| grid.is_active(i + o))
            })
            .collect();
        let h = grid.h();
        Self { n, lower, offsets, weight: h.powi(n as i32) / corners as f64, inv_h: 1.0 / h }
    }

    fn corners(&self) -> usize {
        self.offsets.len()
    }

    #[inline]
    fn corner_gradient(&self, u: &[f64], base: usize, b: usize, g: &mut [f64]) {
        for (a, ga) in g.iter_mut().enumerate() {
            let bit = 1 << a;
            *ga = (u[base + self.offsets[b | bit]] - u[base + self.offsets[b & !bit]]) * self.inv_h;
        }
    }

    #[inline]
    fn scatter(&self, q: &[f64], base: usize, b: usize, out: &mut [f64]) {
        for (a, qa) in q.iter().enumerate() {
            let bit = 1 << a;
            out[base + self.offsets[b | bit]] += qa;
            out[base + self.offsets[b & !bit]] -= qa;
        }
    }

    fn energy(&self, f: &Lagrangian, u: &[f64]) -> f64 {
        let mut g = vec![0.0; self.n];
        let mut total = 0.0;
        for &base in &self.lower {
            for b in 0..self.corners() {
                self.corner_gradient(u, base, b, &mut g);
                total += f.value(&g);
            }
        }
        total * self.weight
    }

    /// `∂J_h/∂u` at every node touched by a cell.
    fn gradient(&self, f: &Lagrangian, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut g = vec![0.0; self.n];
        let mut q = vec![0.0; self.n];
        let c = self.weight * self.inv_h;
        for &base in &self.lower {
            for b in 0..self.corners() {
                self.corner_gradient(u, base, b, &mut g);
                f.gradient_into(&g, &mut q);
                q.iter_mut().for_each(|v| *v *= c);
                self.scatter(&q, base, b, out);
            }
        }
    }

    /// `Σ w ∇F(∇u)·∇ψ` over all corners.
    fn directional(&self, f: &Lagrangian, u: &[f64], psi: &[f64]) -> f64 {
        let mut g = vec![0.0; self.n];
        let mut gp = vec![0.0; self.n];
        let mut q = vec![0.0; self.n];
        let mut total = 0.0;
        for &base in &self.lower {
            for b in 0..self.corners() {
                self.corner_gradient(u, base, b, &mut g);
                self.corner_gradient(psi, base, b, &mut gp);
                f.gradient_into(&g, &mut q);
                total += q.iter().zip(&gp).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        total * self.weight
    }

    /// Corner Hessians `D²F(g)`, `n²` entries per (cell, corner).
    fn hessians(&self, f: &Lagrangian, u: &[f64]) -> Vec<f64> {
        let nn = self.n * self.n;
        let mut out = vec![0.0; self.lower.len() * self.corners() * nn];
        let mut g = vec![0.0; self.n];
        for (ci, &base) in self.lower.iter().enumerate() {
            for b in 0..self.corners() {
                self.corner_gradient(u, base, b, &mut g);
                let k = (ci * self.corners() + b) * nn;
                f.hessian_into(&g, &mut out[k..k + nn]);
            }
        }
        out
    }

    fn hess_vec(&self, hs: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.n;
        let nn = n * n;
        let c = self.weight * self.inv_h;
        let mut dg = vec![0.0; n];
        let mut q = vec![0.0; n];
        for (ci, &base) in self.lower.iter().enumerate() {
            for b in 0..self.corners() {
                self.corner_gradient(v, base, b, &mut dg);
                let hm = &hs[(ci * self.corners() + b) * nn..][..nn];
                for i in 0..n {
                    q[i] = c * (0..n).map(|j| hm[i * n + j] * dg[j]).sum::<f64>();
                }
                self.scatter(&q, base, b, out);
            }
        }
    }

    fn hess_diag(&self, hs: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.n;
        let nn = n * n;
        let c = self.weight * self.inv_h * self.inv_h;
        for (ci, &base) in self.lower.iter().enumerate() {
            for b in 0..self.corners() {
                let hm = &hs[(ci * self.corners() + b) * nn..][..nn];
                let s = |a: usize| if b >> a & 1 == 1 { 1.0 } else { -1.0 };
                let mut quad = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        quad += s(i) * hm[i * n + j] * s(j);
                    }
                }
                out[base + self.offsets[b]] += c * quad;
                for a in 0..n {
                    out[base + self.offsets[b ^ (1 << a)]] += c * hm[a * n + a];
                }
            }
        }
    }
}

fn check_dim(f: &Lagrangian, grid: &Grid) -> Result<()> {
    if f.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: f.dim() });
    }
    Ok(())
}

/// `J_h(u)`.
pub fn energy(f: &Lagrangian, u: &ScalarField) -> Result<f64> {
    check_dim(f, u.grid())?;
    Ok(Cells::new(u.grid()).energy(f, u.values()))
}

/// `∂J_h/∂u` at interior nodes; zero on the boundary ring, NaN outside.
pub fn energy_gradient(f: &Lagrangian, u: &ScalarField) -> Result<ScalarField> {
    check_dim(f, u.grid())?;
    let grid = u.grid();
    let mut out = vec![0.0; grid.len()];
    Cells::new(grid).gradient(f, u.values(), &mut out);
    for (i, v) in out.iter_mut().enumerate() {
        match grid.kind(i) {
            NodeKind::Interior => {}
            NodeKind::Boundary => *v = 0.0,
            NodeKind::Exterior => *v = f64::NAN,
        }
    }
    ScalarField::from_values(grid.clone(), out)
}

/// Discrete `∫ ∇F(∇u)·∇ψ`, i.e. the derivative of `J_h` at `u` in direction `ψ`.
pub fn weak_residual(f: &Lagrangian, u: &ScalarField, psi: &ScalarField) -> Result<f64> {
    check_dim(f, u.grid())?;
    let grid = u.grid();
    let leak = (0..grid.len())
        .filter(|&i| grid.kind(i) != NodeKind::Interior)
        .map(|i| psi.at(i).abs())
        .filter(|v| !v.is_nan())
        .fold(0.0, f64::max);
    if leak > 0.0 {
        return Err(Error::InvalidTestFunction(leak));
    }
    let psi: Vec<f64> = psi.values().iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect();
    Ok(Cells::new(grid).directional(f, u.values(), &psi))
}

/// `‖∇ψ‖_{L²}` in the same corner quadrature as [`weak_residual`].
pub fn gradient_l2(psi: &ScalarField) -> f64 {
    let grid = psi.grid();
    let q = Lagrangian::quadratic(grid.dim()).expect("grid dimension is valid");
    let vals: Vec<f64> = psi.values().iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect();
    Cells::new(grid).energy(&q, &vals).sqrt()
}

/// `∫_{B_r(center)} |∇u|²` with corner gradients, over cells whose centers lie in the ball.
pub fn dirichlet_energy(u: &ScalarField, center: &[f64], r: f64) -> Result<f64> {
    let grid = u.grid();
    if center.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: center.len() });
    }
    if !grid.contains_ball(center, r) {
        return Err(Error::OutOfDomain { center: center.to_vec(), radius: r });
    }
    let cells = Cells::new(grid);
    let half = 0.5 * grid.h();
    let tol = 1e-12 * grid.scale();
    let mut g = vec![0.0; cells.n];
    let mut total = 0.0;
    for &base in &cells.lower {
        let p = grid.point(base);
        let d2: f64 = p.iter().zip(center).map(|(x, c)| (x + half - c).powi(2)).sum();
        if d2.sqrt() > r + tol {
            continue;
        }
        for b in 0..cells.corners() {
            cells.corner_gradient(u.values(), base, b, &mut g);
            total += g.iter().map(|x| x * x).sum::<f64>();
        }
    }
    Ok(total * cells.weight)
}

struct Stage<'a> {
    cells: &'a Cells,
    free: &'a [bool],
    target: f64,
    max_iters: usize,
    scale: f64,
    tol_rel_energy: f64,
}

struct StageOutcome {
    converged: bool,
    iterations: usize,
    inner: usize,
    grad_inf: f64,
    rel_change: f64,
    stalled: bool,
    history: Vec<f64>,
}

/// Consecutive accepted steps with relative energy change below
/// `tol_rel_energy` after which a stage is declared stalled.
const NEWTON_STALL_WINDOW: usize = 50;
const DESCENT_STALL_WINDOW: usize = 5000;

fn masked_inf(v: &[f64], free: &[bool]) -> f64 {
    v.iter().zip(free).filter(|(_, &m)| m).map(|(x, _)| x.abs()).fold(0.0, f64::max)
}

fn masked_dot(a: &[f64], b: &[f64], free: &[bool]) -> f64 {
    a.iter().zip(b).zip(free).filter(|(_, &m)| m).map(|((x, y), _)| x * y).sum()
}

fn roundoff_floor(j: f64) -> f64 {
    1e-13 * j.abs() + 1e-300
}

/// Backtracking Armijo search along `d`; accepts sub-roundoff changes that
/// still reduce the gradient norm.
#[allow(clippy::too_many_arguments)]
fn line_search(
    st: &Stage,
    f: &Lagrangian,
    u: &mut Vec<f64>,
    j: f64,
    g: &[f64],
    d: &[f64],
    t0: f64,
    gnew: &mut [f64],
) -> Option<(f64, f64)> {
    let slope = masked_dot(g, d, st.free);
    let ginf = masked_inf(g, st.free);
    let mut t = t0;
    let mut trial = u.clone();
    for _ in 0..60 {
        for i in 0..u.len() {
            if st.free[i] {
                trial[i] = u[i] + t * d[i];
            }
        }
        let jt = st.cells.energy(f, &trial);
        if jt.is_finite() {
            let armijo = jt <= j + 1e-4 * t * slope;
            let flat = (jt - j) <= roundoff_floor(j);
            if armijo || flat {
                st.cells.gradient(f, &trial, gnew);
                if armijo || masked_inf(gnew, st.free) < ginf {
                    std::mem::swap(u, &mut trial);
                    return Some((jt, t));
                }
            }
        }
        t *= 0.5;
    }
    None
}

/// Preconditioned CG on the Newton system, restricted to free nodes.
fn newton_direction(st: &Stage, hs: &[f64], g: &[f64], forcing: f64, cg_max: usize) -> (Vec<f64>, usize) {
    let len = g.len();
    let mut diag = vec![0.0; len];
    st.cells.hess_diag(hs, &mut diag);
    let pinv: Vec<f64> = diag
        .iter()
        .zip(st.free)
        .map(|(&d, &m)| {
            if m && d > 0.0 && d.is_finite() {
                1.0 / d
            } else if m {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut x = vec![0.0; len];
    let mut r: Vec<f64> = g.iter().zip(st.free).map(|(v, &m)| if m { -v } else { 0.0 }).collect();
    let gnorm = masked_dot(&r, &r, st.free).sqrt();
    let stop = (forcing * gnorm).max(0.1 * st.target);
    let mut z: Vec<f64> = r.iter().zip(&pinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = masked_dot(&r, &z, st.free);
    let mut hp = vec![0.0; len];
    let mut its = 0;
    while its < cg_max {
        let rnorm = masked_dot(&r, &r, st.free).sqrt();
        if rnorm <= stop {
            break;
        }
        st.cells.hess_vec(hs, &p, &mut hp);
        let curv = masked_dot(&p, &hp, st.free);
        its += 1;
        if !(curv > 0.0) {
            if its == 1 {
                x = z.clone();
            }
            break;
        }
        let alpha = rz / curv;
        for i in 0..len {
            if st.free[i] {
                x[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
        }
        for i in 0..len {
            z[i] = r[i] * pinv[i];
        }
        let rz_new = masked_dot(&r, &z, st.free);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, its)
}

fn run_newton(st: &Stage, f: &Lagrangian, u: &mut Vec<f64>) -> StageOutcome {
    let len = u.len();
    let mut g = vec![0.0; len];
    let mut gnew = vec![0.0; len];
    st.cells.gradient(f, u, &mut g);
    let mut j = st.cells.energy(f, u);
    let mut out = StageOutcome {
        converged: false,
        iterations: 0,
        inner: 0,
        grad_inf: masked_inf(&g, st.free),
        rel_change: 0.0,
        stalled: false,
        history: vec![j],
    };
    let mut flat_steps = 0;
    let g0 = out.grad_inf.max(1e-300);
    let cg_max = 20 * (len as f64).sqrt() as usize + 200;
    while out.iterations < st.max_iters {
        out.grad_inf = masked_inf(&g, st.free);
        if out.grad_inf <= st.target {
            out.converged = true;
            break;
        }
        let hs = st.cells.hessians(f, u);
        let forcing = (out.grad_inf / g0).min(0.1);
        let (mut d, its) = newton_direction(st, &hs, &g, forcing, cg_max);
        out.inner += its;
        if masked_dot(&g, &d, st.free) >= 0.0 {
            d = g.iter().map(|v| -v).collect();
        }
        out.iterations += 1;
        match line_search(st, f, u, j, &g, &d, 1.0, &mut gnew) {
            Some((jn, _)) => {
                out.rel_change = (j - jn).abs() / j.abs().max(1e-300);
                j = jn;
                std::mem::swap(&mut g, &mut gnew);
                out.history.push(j);
                flat_steps = if out.rel_change < st.tol_rel_energy { flat_steps + 1 } else { 0 };
                if flat_steps >= NEWTON_STALL_WINDOW {
                    out.stalled = true;
                    break;
                }
            }
            None => {
                out.stalled = true;
                break;
            }
        }
    }
    out.grad_inf = masked_inf(&g, st.free);
    out.converged = out.grad_inf <= st.target;
    out
}

fn run_gradient_descent(st: &Stage, f: &Lagrangian, u: &mut Vec<f64>) -> StageOutcome {
    let len = u.len();
    let mut g = vec![0.0; len];
    let mut gnew = vec![0.0; len];
    st.cells.gradient(f, u, &mut g);
    let mut j = st.cells.energy(f, u);
    let mut out = StageOutcome {
        converged: false,
        iterations: 0,
        inner: 0,
        grad_inf: masked_inf(&g, st.free),
        rel_change: 0.0,
        stalled: false,
        history: vec![j],
    };
    let mut flat_steps = 0;
    // Initial step from the Jacobi scale of the Hessian.
    let hs = st.cells.hessians(f, u);
    let mut diag = vec![0.0; len];
    st.cells.hess_diag(&hs, &mut diag);
    let dmax = masked_inf(&diag, st.free);
    let mut step = if dmax > 0.0 { 1.0 / dmax } else { st.scale };
    while out.iterations < st.max_iters {
        out.grad_inf = masked_inf(&g, st.free);
        if out.grad_inf <= st.target {
            break;
        }
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let prev = u.clone();
        out.iterations += 1;
        match line_search(st, f, u, j, &g, &d, step, &mut gnew) {
            Some((jn, t)) => {
                out.rel_change = (j - jn).abs() / j.abs().max(1e-300);
                j = jn;
                // Barzilai-Borwein step for the next iteration.
                let s: Vec<f64> = u.iter().zip(&prev).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = masked_dot(&s, &y, st.free);
                step = if sy > 0.0 { masked_dot(&s, &s, st.free) / sy } else { 2.0 * t };
                std::mem::swap(&mut g, &mut gnew);
                out.history.push(j);
                flat_steps = if out.rel_change < st.tol_rel_energy { flat_steps + 1 } else { 0 };
                if flat_steps >= DESCENT_STALL_WINDOW {
                    out.stalled = true;
                    break;
                }
            }
            None => {
                out.stalled = true;
                break;
            }
        }
    }
    out.grad_inf = masked_inf(&g, st.free);
    out.converged = out.grad_inf <= st.target;
    out
}

fn initial_field(grid: &Arc<Grid>, boundary: &BoundaryValues) -> Result<Vec<f64>> {
    if boundary.nodes.len() != boundary.values.len() {
        return Err(Error::DimensionMismatch { expected: boundary.nodes.len(), found: boundary.values.len() });
    }
    if let Some(v) = boundary.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("boundary value {v} is not finite")));
    }
    let mean = if boundary.values.is_empty() { 0.0 } else { boundary.values.iter().sum::<f64>() / boundary.values.len() as f64 };
    let mut u: Vec<f64> = (0..grid.len())
        .map(|i| match grid.kind(i) {
            NodeKind::Interior => mean,
            _ => f64::NAN,
        })
        .collect();
    for (&i, &v) in boundary.nodes.iter().zip(&boundary.values) {
        if grid.kind(i) != NodeKind::Boundary {
            return Err(Error::InvalidParameter(format!("node {i} is not a boundary node")));
        }
        u[i] = v;
    }
    if let Some(i) = grid.boundary_nodes().find(|&i| u[i].is_nan()) {
        return Err(Error::InvalidParameter(format!("boundary node {i} has no value")));
    }
    Ok(u)
}

/// Discrete harmonic extension of the boundary data (minimizer of `Σ|∇_h u|²`).
pub fn harmonic_extension(grid: &Arc<Grid>, boundary: &BoundaryValues, tol_residual: f64) -> Result<ScalarField> {
    let mut u = initial_field(grid, boundary)?;
    let cells = Cells::new(grid);
    let free: Vec<bool> = (0..grid.len()).map(|i| grid.kind(i) == NodeKind::Interior).collect();
    let st = Stage {
        cells: &cells,
        free: &free,
        target: tol_residual * grid.h().powi(grid.dim() as i32),
        max_iters: 50,
        scale: 1.0,
        tol_rel_energy: 0.0,
    };
    let q = Lagrangian::quadratic(grid.dim())?;
    run_newton(&st, &q, &mut u);
    ScalarField::from_values(grid.clone(), u)
}

/// Minimizes `J_h` with the given Dirichlet data.
///
/// Returns the field together with its report; a run that hits `max_iters`
/// or stalls returns `converged = false` rather than an error.
pub fn minimize(
    f: &Lagrangian,
    grid: &Arc<Grid>,
    boundary: &BoundaryValues,
    opts: &SolveOptions,
) -> Result<(ScalarField, ConvergenceReport)> {
    let start = Instant::now();
    check_dim(f, grid)?;
    opts.validate()?;
    let warm = harmonic_extension(grid, boundary, opts.tol_residual)?;
    if opts.audit {
        let slope = gradient(&warm).norm_squared().values().iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.sqrt()));
        let region = GradientRegion::cube(grid.dim(), (2.0 * slope).max(2.0));
        let audit = convexity_audit(f, &region, 9, 1);
        if !audit.pass {
            return Err(Error::NonConvex(format!(
                "{} (midpoint violation {}, min eigenvalue {})",
                f.label(),
                audit.get("worst_midpoint_violation").unwrap_or(f64::NAN),
                audit.get("min_hessian_eigenvalue").unwrap_or(f64::NAN)
            )));
        }
    }
    let mut u = warm.into_values();
    let cells = Cells::new(grid);
    let free: Vec<bool> = (0..grid.len()).map(|i| grid.kind(i) == NodeKind::Interior).collect();
    let hn = grid.h().powi(grid.dim() as i32);
    let schedule = opts.schedule(f);
    let mut report = ConvergenceReport {
        converged: true,
        stalled: false,
        method: opts.method,
        iterations: 0,
        inner_iterations: 0,
        energy: f64::NAN,
        residual: f64::NAN,
        rel_energy_change: 0.0,
        smoothing_schedule: schedule.clone(),
        energy_history: Vec::new(),
        wall_time: 0.0,
    };
    for &eps in &schedule {
        let fe = f.with_smoothing(eps);
        let st = Stage {
            cells: &cells,
            free: &free,
            target: opts.tol_residual * hn,
            max_iters: opts.max_iters.saturating_sub(report.iterations),
            scale: grid.h().powi(2),
            tol_rel_energy: opts.tol_rel_energy,
        };
        let outcome = match opts.method {
            Method::NewtonDamped => run_newton(&st, &fe, &mut u),
            Method::GradientDescent => run_gradient_descent(&st, &fe, &mut u),
        };
        report.iterations += outcome.iterations;
        report.inner_iterations += outcome.inner;
        report.residual = outcome.grad_inf / hn;
        report.rel_energy_change = outcome.rel_change;
        report.energy_history = outcome.history;
        report.converged = outcome.converged;
        report.stalled = outcome.stalled && !outcome.converged;
        if !outcome.converged {
            break;
        }
    }
    report.energy = cells.energy(f, &u);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((ScalarField::from_values(grid.clone(), u)?, report))
}

/// Frozen coefficients `a_ij = F_ij(∇u)` at every active node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    /// Per-node (smallest, largest) eigenvalue; NaN where `∇u` is undefined.
    pub eigen_range: Vec<(f64, f64)>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl CoefficientField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Row-major `n × n` matrix at a node.
    pub fn at(&self, idx: usize) -> &[f64] {
        let nn = self.grid.dim() * self.grid.dim();
        &self.values[idx * nn..(idx + 1) * nn]
    }

    pub fn window(&self) -> EllipticityWindow {
        EllipticityWindow {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            region: "solution gradients".into(),
            degenerate: self.lambda_min <= 0.0,
        }
    }
}

pub fn coefficient_field(f: &Lagrangian, u: &ScalarField) -> Result<CoefficientField> {
    check_dim(f, u.grid())?;
    let grid = u.grid().clone();
    let n = grid.dim();
    let du = gradient(u);
    let mut values = vec![f64::NAN; grid.len() * n * n];
    let mut eigen_range = vec![(f64::NAN, f64::NAN); grid.len()];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..grid.len() {
        let p = du.at(i);
        if p.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let m = f.hessian(p);
        let ev = sorted_eigenvalues(m.clone());
        let (a, b) = (ev[0], ev[n - 1]);
        eigen_range[i] = (a, b);
        lo = lo.min(a);
        hi = hi.max(b);
        for r in 0..n {
            for c in 0..n {
                values[i * n * n + r * n + c] = m[(r, c)];
            }
        }
    }
    Ok(CoefficientField { grid, values, eigen_range, lambda_min: lo, lambda_max: hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::field::{bump, cutoff, trace_boundary, Mask};
    use approx::assert_abs_diff_eq;

    fn setup(res: usize, mask: Mask, bc: &str) -> (Arc<Grid>, BoundaryValues) {
        let grid = Arc::new(Grid::new(2, res, mask).unwrap());
        let b = trace_boundary(&grid, &parse(bc).unwrap()).unwrap();
        (grid, b)
    }

    #[test]
    fn energy_examples() {
        let grid = Arc::new(Grid::new(2, 33, Mask::Square).unwrap());
        let q = Lagrangian::quadratic(2).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |p| p[0]);
        assert_abs_diff_eq!(energy(&q, &u).unwrap(), 4.0, epsilon = 1e-12);
        let c = Lagrangian::congestion(2).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |p| 0.6 * p[0] - 0.5 * p[1]);
        assert_eq!(energy(&c, &u).unwrap(), 0.0);
        let m = Lagrangian::minimal_surface(2).unwrap();
        let z = ScalarField::zeros(grid.clone());
        assert_abs_diff_eq!(energy(&m, &z).unwrap(), 4.0, epsilon = 1e-12);
        let ball = Arc::new(Grid::new(2, 129, Mask::Ball).unwrap());
        let z = ScalarField::zeros(ball.clone());
        assert!((energy(&m, &z).unwrap() - std::f64::consts::PI).abs() < 4.0 * ball.h());
    }

    #[test]
    fn gradient_matches_finite_difference_of_energy() {
        let (grid, b) = setup(17, Mask::Ball, "x*y+0.3*x");
        let f = Lagrangian::minimal_surface(2).unwrap();
        let mut u = harmonic_extension(&grid, &b, 1e-10).unwrap();
        for i in grid.interior_nodes().collect::<Vec<_>>() {
            u.values_mut()[i] += 0.05 * ((i % 7) as f64 - 3.0);
        }
        let g = energy_gradient(&f, &u).unwrap();
        for i in grid.interior_nodes().step_by(11) {
            let step = 1e-6;
            let mut up = u.clone();
            up.values_mut()[i] += step;
            let mut um = u.clone();
            um.values_mut()[i] -= step;
            let fd = (energy(&f, &up).unwrap() - energy(&f, &um).unwrap()) / (2.0 * step);
            assert_abs_diff_eq!(g.at(i), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn laplace_reproduces_harmonic_polynomial() {
        let (grid, b) = setup(65, Mask::Square, "x^2-y^2");
        let q = Lagrangian::quadratic(2).unwrap();
        let (u, rep) = minimize(&q, &grid, &b, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        let h = grid.h();
        let err = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                (u.at(i) - (p[0] * p[0] - p[1] * p[1])).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 10.0 * h * h, "{err}");
    }

    #[test]
    fn weak_residual_examples() {
        let (grid, b) = setup(65, Mask::Ball, "x^2-y^2");
        let q = Lagrangian::quadratic(2).unwrap();
        let psi = cutoff(&grid, 0.25, 0.5).unwrap();
        let (u, _) = minimize(&q, &grid, &b, &SolveOptions::default()).unwrap();
        assert!(weak_residual(&q, &u, &psi).unwrap().abs() <= 1e-8);
        let affine = ScalarField::from_fn(grid.clone(), |p| 0.4 * p[0] - 2.0 * p[1]);
        let m = Lagrangian::minimal_surface(2).unwrap();
        assert!(weak_residual(&m, &affine, &psi).unwrap().abs() <= 1e-12);
        let bowl = ScalarField::from_fn(grid.clone(), |p| p[0] * p[0] + p[1] * p[1]);
        assert!(weak_residual(&q, &bowl, &psi).unwrap().abs() >= 0.1);
        let bad = cutoff(&grid, 0.5, 1.5).unwrap();
        assert!(matches!(weak_residual(&q, &bowl, &bad), Err(Error::InvalidTestFunction(_))));
    }

    #[test]
    fn minimal_surface_zero_data() {
        let (grid, b) = setup(33, Mask::Ball, "0");
        let m = Lagrangian::minimal_surface(2).unwrap();
        let (u, rep) = minimize(&m, &grid, &b, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(grid.interior_nodes().all(|i| u.at(i) == 0.0));
    }

    #[test]
    fn congestion_with_lipschitz_data() {
        let (grid, b) = setup(65, Mask::Square, "x");
        let c = Lagrangian::congestion(2).unwrap();
        let (_, rep) = minimize(&c, &grid, &b, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.energy <= 1e-8);
        assert_eq!(rep.smoothing_schedule.len(), 7);
    }

    #[test]
    fn stagnation_ends_the_run() {
        // Projected data on the ball ring is not 1-Lipschitz across the ring,
        // so the congestion energy cannot reach zero.
        let (grid, b) = setup(17, Mask::Ball, "x");
        let c = Lagrangian::congestion(2).unwrap();
        let (_, rep) = minimize(&c, &grid, &b, &SolveOptions::default()).unwrap();
        assert!(rep.energy > 0.0);
        if !rep.converged {
            assert!(rep.stalled);
        }
    }

    #[test]
    fn nonlinear_solve_is_a_weak_solution_and_local_minimum() {
        let (grid, b) = setup(33, Mask::Ball, "x^2-y^2+0.5*x*y");
        let m = Lagrangian::minimal_surface(2).unwrap();
        let (u, rep) = minimize(&m, &grid, &b, &SolveOptions::default()).unwrap();
        assert!(rep.converged, "{rep}");
        for w in rep.energy_history.windows(2) {
            assert!(w[1] <= w[0] + roundoff_floor(w[0]));
        }
        let psi = bump(&grid, &[0.1, 0.2], 0.5);
        let r = weak_residual(&m, &u, &psi).unwrap();
        assert!(r.abs() <= 1e-8 * gradient_l2(&psi), "{r}");
        let j0 = energy(&m, &u).unwrap();
        let h2 = grid.h() * grid.h();
        let bumped = u.combine(1.0, &psi, h2);
        assert!(energy(&m, &bumped).unwrap() > j0);
        // Discrete maximum principle.
        let (lo, hi) = b.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), &v| (a.min(v), c.max(v)));
        assert!(grid.interior_nodes().all(|i| u.at(i) >= lo - 1e-9 && u.at(i) <= hi + 1e-9));
    }

    #[test]
    fn gradient_descent_agrees_with_newton() {
        let (grid, b) = setup(17, Mask::Ball, "x*y+0.2*x");
        let m = Lagrangian::minimal_surface(2).unwrap();
        let opts = SolveOptions { method: Method::GradientDescent, tol_residual: 1e-7, ..Default::default() };
        let (ug, rg) = minimize(&m, &grid, &b, &opts).unwrap();
        assert!(rg.converged, "{rg}");
        let (un, _) = minimize(&m, &grid, &b, &SolveOptions::default()).unwrap();
        for i in grid.interior_nodes() {
            assert_abs_diff_eq!(ug.at(i), un.at(i), epsilon = 1e-6);
        }
    }

    #[test]
    fn non_convex_integrand_is_refused() {
        let (grid, b) = setup(17, Mask::Ball, "x");
        let f = Lagrangian::expression(2, parse("p1^2-p2^2").unwrap()).unwrap();
        assert!(matches!(minimize(&f, &grid, &b, &SolveOptions::default()), Err(Error::NonConvex(_))));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let (grid, b) = setup(33, Mask::Ball, "x^2-y^2");
        let m = Lagrangian::minimal_surface(2).unwrap();
        let opts = SolveOptions { max_iters: 1, method: Method::GradientDescent, ..Default::default() };
        let (_, rep) = minimize(&m, &grid, &b, &opts).unwrap();
        assert!(!rep.converged);
        assert!(rep.to_string().contains("converged=false"));
    }

    #[test]
    fn coefficient_field_examples() {
        let grid = Arc::new(Grid::new(2, 17, Mask::Ball).unwrap());
        let q = Lagrangian::quadratic(2).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |p| p[0] * p[1]);
        let a = coefficient_field(&q, &u).unwrap();
        assert_eq!(a.at(grid.len() / 2), &[2.0, 0.0, 0.0, 2.0]);
        let m = Lagrangian::minimal_surface(2).unwrap();
        let a = coefficient_field(&m, &ScalarField::zeros(grid.clone())).unwrap();
        assert_eq!((a.lambda_min, a.lambda_max), (1.0, 1.0));
        let p4 = Lagrangian::p_laplace(2, 4.0).unwrap();
        let a = coefficient_field(&p4, &ScalarField::from_fn(grid.clone(), |p| p[0])).unwrap();
        for i in grid.interior_nodes() {
            let m = a.at(i);
            assert_abs_diff_eq!(m[0], 12.0, epsilon = 1e-9);
            assert_abs_diff_eq!(m[3], 4.0, epsilon = 1e-9);
            assert_abs_diff_eq!(m[1], 0.0, epsilon = 1e-9);
        }
    }
}
