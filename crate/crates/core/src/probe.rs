//! Quantitative regularity diagnostics on sampled fields.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{cutoff, directional_derivative, gradient, Grid, NodeKind, ScalarField};
use crate::lagrangian::{sorted_eigenvalues, EllipticityWindow, Lagrangian, SeparableCompanion};
use crate::numdiff;
use crate::report::ProbeReport;
use crate::solver::dirichlet_energy;

/// Fewest nodes a ball needs before a fit uses it.
pub const MIN_BALL_NODES: usize = 25;
/// Relative slack on inequality audits.
pub const AUDIT_SLACK: f64 = 0.1;
const CONSTANT_TOL: f64 = 1e-12;

/// `[2^{-1}, …, 2^{-count}]`
pub fn dyadic_radii(count: usize) -> Vec<f64> {
    (1..=count).map(|k| 0.5f64.powi(k as i32)).collect()
}

fn finite_extrema(v: &ScalarField, nodes: &[usize]) -> Option<(f64, f64)> {
    let mut out: Option<(f64, f64)> = None;
    for &i in nodes {
        let x = v.at(i);
        if x.is_finite() {
            out = Some(match out {
                None => (x, x),
                Some((lo, hi)) => (lo.min(x), hi.max(x)),
            });
        }
    }
    out
}

fn ball_nodes(grid: &Grid, center: &[f64], r: f64) -> Result<Vec<usize>> {
    if center.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: center.len() });
    }
    if !grid.contains_ball(center, r) {
        return Err(Error::OutOfDomain { center: center.to_vec(), radius: r });
    }
    Ok(grid.nodes_in_ball(center, r))
}

/// `max − min` over the nodes of the closed ball.
pub fn oscillation(v: &ScalarField, center: &[f64], r: f64) -> Result<f64> {
    let nodes = ball_nodes(v.grid(), center, r)?;
    let finite = nodes.iter().filter(|&&i| v.at(i).is_finite()).count();
    if finite < 2 {
        return Err(Error::InsufficientResolution(format!("ball of radius {r} holds {finite} nodes")));
    }
    let (lo, hi) = finite_extrema(v, &nodes).expect("at least two nodes");
    Ok(hi - lo)
}

/// Least-squares slope of `log y` against `log r`, with the RMS residual.
fn log_fit(r: &[f64], y: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (xs.iter().zip(&ys).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    /// NaN when the field is constant on every ball.
    pub alpha: f64,
    pub residual: f64,
    pub constant: bool,
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
    pub dropped: Vec<f64>,
}

impl HolderFit {
    pub fn to_report(&self) -> ProbeReport {
        let mut r = ProbeReport::new("holder")
            .with("alpha", self.alpha)
            .with("residual", self.residual)
            .with("radii_used", self.radii.len() as f64);
        for d in &self.dropped {
            r.note(format!("dropped radius {d}: fewer than {MIN_BALL_NODES} nodes"));
        }
        if self.constant {
            r.note("constant");
        }
        let margin = if self.constant { 0.0 } else { self.alpha };
        r.decide(margin)
    }
}

/// Fits `osc_{B_r} v ≈ C r^α` over the given radii.
pub fn holder_fit(v: &ScalarField, center: &[f64], radii: &[f64]) -> Result<HolderFit> {
    let grid = v.grid();
    let (mut used, mut osc, mut dropped) = (Vec::new(), Vec::new(), Vec::new());
    for &r in radii {
        let nodes = ball_nodes(grid, center, r)?;
        if nodes.len() < MIN_BALL_NODES {
            dropped.push(r);
            continue;
        }
        used.push(r);
        osc.push(oscillation(v, center, r)?);
    }
    if used.len() < 2 {
        return Err(Error::InsufficientResolution(format!(
            "only {} of {} radii hold at least {MIN_BALL_NODES} nodes",
            used.len(),
            radii.len()
        )));
    }
    if osc.iter().all(|&o| o < CONSTANT_TOL) {
        return Ok(HolderFit { alpha: f64::NAN, residual: 0.0, constant: true, radii: used, oscillations: osc, dropped });
    }
    let (alpha, residual) = log_fit(&used, &osc);
    Ok(HolderFit { alpha, residual, constant: false, radii: used, oscillations: osc, dropped })
}

/// `∫_{B_{r_out}} |∇v|²ψ² ≤ 4λ⁻⁴ ∫_{B_{r_out}} v²|∇ψ|²` with `ψ` the radial cutoff.
pub fn caccioppoli_audit(window: &EllipticityWindow, v: &ScalarField, r_in: f64, r_out: f64) -> Result<ProbeReport> {
    let lambda = window.lambda();
    if !(lambda > 0.0) {
        return Err(Error::NotApplicable("ellipticity window has lambda = 0".into()));
    }
    let grid = v.grid();
    let center = vec![0.0; grid.dim()];
    let psi = cutoff(grid, r_in, r_out)?;
    let dv = gradient(v).norm_squared();
    let dpsi = gradient(&psi).norm_squared();
    let l = grid.ball_sum(&center, r_out, |i| dv.at(i) * psi.at(i).powi(2))?;
    let integral = grid.ball_sum(&center, r_out, |i| v.at(i).powi(2) * dpsi.at(i))?;
    let r = 4.0 * lambda.powi(-4) * integral;
    let ratio = if l == 0.0 { 0.0 } else { l / r };
    Ok(ProbeReport::new("caccioppoli")
        .with("lhs", l)
        .with("rhs", r)
        .with("ratio", ratio)
        .with("lambda", lambda)
        .decide(r * (1.0 + AUDIT_SLACK) - l))
}

/// Values of `w` interpolated at equally spaced points of the circle `|x − c| = r`.
fn circle_values(w: &ScalarField, center: &[f64], r: f64) -> Vec<f64> {
    let count = (16.0 * std::f64::consts::PI * r / w.grid().h()).ceil().max(64.0) as usize;
    let count = count + count % 4;
    (0..count)
        .filter_map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            w.interpolate(&[center[0] + r * t.cos(), center[1] + r * t.sin()])
        })
        .collect()
}

/// Courant–Lebesgue: `(osc_{∂B_r} w)² ≤ π / log(1/(2r)) · ∫_{B_{1/2}} |∇w|²`.
pub fn courant_lebesgue_check(w: &ScalarField, r: f64) -> Result<ProbeReport> {
    let grid = w.grid();
    if grid.dim() != 2 {
        return Err(Error::InvalidParameter("courant-lebesgue needs a 2-d field".into()));
    }
    if !(r > 0.0 && r <= 0.25) {
        return Err(Error::InvalidParameter(format!("radius {r} must lie in (0, 1/4]")));
    }
    let origin = [0.0, 0.0];
    // Maximum principle on the nested balls between r and 1/2.
    let mut radii = vec![0.5];
    let mut rho = r;
    while rho < 0.5 {
        radii.push(rho);
        rho *= 2.0;
    }
    let balls: Vec<(Vec<f64>, f64)> = radii.iter().map(|&q| (origin.to_vec(), q)).collect();
    let up = max_principle_check(w, &balls)?;
    let down = max_principle_check(&w.map(|x| -x), &balls)?;
    if !up.pass || !down.pass {
        return Err(Error::NotApplicable(format!(
            "maximum principle fails on nested balls (violation {})",
            up.get("worst_violation").unwrap_or(0.0).max(down.get("worst_violation").unwrap_or(0.0))
        )));
    }
    let circle = circle_values(w, &origin, r);
    if circle.is_empty() {
        return Err(Error::InsufficientResolution(format!("cannot sample the circle of radius {r}")));
    }
    let (lo, hi) = circle.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let lhs = (hi - lo).powi(2);
    let dirichlet = dirichlet_energy(w, &origin, 0.5)?;
    let rhs = std::f64::consts::PI / (1.0 / (2.0 * r)).ln() * dirichlet;
    Ok(ProbeReport::new("courant-lebesgue")
        .with("lhs", lhs)
        .with("rhs", rhs)
        .with("r", r)
        .with("circle_samples", circle.len() as f64)
        .with("dirichlet_half", dirichlet)
        .decide(rhs * (1.0 + AUDIT_SLACK) - lhs))
}

/// For each ball: interior maximum ≤ ring maximum + 2h·(local Lipschitz bound).
///
/// The ring is the band `r − h < |x − c| ≤ r`.
pub fn max_principle_check(v: &ScalarField, balls: &[(Vec<f64>, f64)]) -> Result<ProbeReport> {
    let grid = v.grid();
    let h = grid.h();
    let slope = gradient(v).norm_squared();
    let mut worst_violation: f64 = 0.0;
    let mut margin = f64::INFINITY;
    let mut worst_slack = 0.0;
    for (center, r) in balls {
        let nodes = ball_nodes(grid, center, *r)?;
        let dist = |i: usize| grid.point(i).iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let (mut inner, mut ring) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut lip: f64 = 0.0;
        for &i in &nodes {
            let x = v.at(i);
            if !x.is_finite() {
                continue;
            }
            if dist(i) > r - h {
                ring = ring.max(x);
            } else {
                inner = inner.max(x);
            }
            let s = slope.at(i);
            if s.is_finite() {
                lip = lip.max(s.sqrt());
            }
        }
        if !ring.is_finite() {
            return Err(Error::InsufficientResolution(format!("ball of radius {r} has no ring nodes")));
        }
        let violation = (inner - ring).max(0.0);
        let slack = 2.0 * h * lip;
        if slack - violation < margin {
            margin = slack - violation;
            worst_slack = slack;
        }
        worst_violation = worst_violation.max(violation);
    }
    Ok(ProbeReport::new("max-principle")
        .with("worst_violation", worst_violation)
        .with("slack", worst_slack)
        .with("balls", balls.len() as f64)
        .decide(margin))
}

/// [`max_principle_check`] applied to the discrete derivative `u_e`.
pub fn max_principle_check_directional(u: &ScalarField, e: &[f64], balls: &[(Vec<f64>, f64)]) -> Result<ProbeReport> {
    if e.len() != u.grid().dim() {
        return Err(Error::DimensionMismatch { expected: u.grid().dim(), found: e.len() });
    }
    let mut r = max_principle_check(&directional_derivative(u, e), balls)?;
    r.name = "max-principle-directional".into();
    Ok(r)
}

/// `sup_{B₁} v / ‖v₊‖_{L²(B₂)}` against a configured cap.
pub fn l2_linf_check(v: &ScalarField, cap: f64) -> Result<ProbeReport> {
    let grid = v.grid();
    let origin = vec![0.0; grid.dim()];
    if !grid.contains_ball(&origin, 2.0) {
        return Err(Error::OutOfDomain { center: origin, radius: 2.0 });
    }
    let (_, sup) = finite_extrema(v, &grid.nodes_in_ball(&origin, 1.0))
        .ok_or_else(|| Error::InsufficientResolution("no nodes in B_1".into()))?;
    let norm = grid.ball_sum(&origin, 2.0, |i| v.at(i).max(0.0).powi(2))?.sqrt();
    let ratio = if sup <= 0.0 {
        0.0
    } else if norm == 0.0 {
        f64::INFINITY
    } else {
        sup / norm
    };
    Ok(ProbeReport::new("l2-linf")
        .with("sup_b1", sup)
        .with("l2_b2", norm)
        .with("ratio", ratio)
        .with("cap", cap)
        .decide(cap - ratio))
}

/// `sup_{B_{1/4}} v / inf_{B_{1/4}} v` for `v > 0` on `B₁`.
pub fn harnack_ratio(v: &ScalarField) -> Result<f64> {
    let grid = v.grid();
    let origin = vec![0.0; grid.dim()];
    let all = ball_nodes(grid, &origin, 1.0)?;
    if let Some(&i) = all.iter().find(|&&i| !(v.at(i) > 0.0)) {
        return Err(Error::NotApplicable(format!("v = {} <= 0 at node {i}", v.at(i))));
    }
    let (lo, hi) = finite_extrema(v, &grid.nodes_in_ball(&origin, 0.25))
        .ok_or_else(|| Error::InsufficientResolution("no nodes in B_1/4".into()))?;
    Ok(hi / lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDecay {
    pub radii: Vec<f64>,
    pub energies: Vec<f64>,
    /// Fitted `2α`; NaN when constant.
    pub exponent: f64,
    pub constant: bool,
}

/// `∫_{B_{2^{-k}}} |∇v|²` (cell-corner gradients) for `k ∈ ks`, truncated
/// where balls get too small.
pub fn energy_decay(v: &ScalarField, ks: &[u32]) -> Result<EnergyDecay> {
    let grid = v.grid();
    let origin = vec![0.0; grid.dim()];
    let (mut radii, mut energies) = (Vec::new(), Vec::new());
    for &k in ks {
        let r = 0.5f64.powi(k as i32);
        if grid.nodes_in_ball(&origin, r).len() < MIN_BALL_NODES {
            break;
        }
        radii.push(r);
        energies.push(dirichlet_energy(v, &origin, r)?);
    }
    if radii.len() < 2 {
        return Err(Error::InsufficientResolution("fewer than two resolvable radii".into()));
    }
    if energies.iter().all(|&e| e < CONSTANT_TOL * CONSTANT_TOL) {
        return Ok(EnergyDecay { radii, energies, exponent: f64::NAN, constant: true });
    }
    let (exponent, _) = log_fit(&radii, &energies);
    Ok(EnergyDecay { radii, energies, exponent, constant: false })
}

/// Gradient vectors sampled over a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCloud {
    pub points: Vec<Vec<f64>>,
    pub center: Vec<f64>,
    pub r: f64,
    pub diameter: f64,
    pub bbox_min: Vec<f64>,
    pub bbox_max: Vec<f64>,
}

impl GradientCloud {
    pub fn from_points(points: Vec<Vec<f64>>, center: Vec<f64>, r: f64) -> Self {
        let dim = points.first().map_or(center.len(), Vec::len);
        let mut bbox_min = vec![f64::INFINITY; dim];
        let mut bbox_max = vec![f64::NEG_INFINITY; dim];
        for p in &points {
            for a in 0..dim {
                bbox_min[a] = bbox_min[a].min(p[a]);
                bbox_max[a] = bbox_max[a].max(p[a]);
            }
        }
        let diameter = diameter(&points);
        Self { points, center, r, diameter, bbox_min, bbox_max }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull vertices (Andrew's monotone chain).
fn hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<&Vec<f64>> = points.iter().collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().cloned().collect();
    }
    let mut hull: Vec<&Vec<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &&Vec<f64>>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.into_iter().cloned().collect()
}

/// Exact maximum pairwise distance (via the hull in 2-d).
fn diameter(points: &[Vec<f64>]) -> f64 {
    let candidates = if points.first().is_some_and(|p| p.len() == 2) { hull_2d(points) } else { points.to_vec() };
    let mut best: f64 = 0.0;
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            best = best.max(dist(&candidates[i], &candidates[j]));
        }
    }
    best
}

/// `∇u` at the grid-interior nodes of `B_r(center)`.
pub fn gradient_cloud(u: &ScalarField, center: &[f64], r: f64) -> Result<GradientCloud> {
    let grid = u.grid();
    let nodes = ball_nodes(grid, center, r)?;
    let du = gradient(u);
    let points: Vec<Vec<f64>> = nodes
        .into_iter()
        .filter(|&i| grid.kind(i) == NodeKind::Interior)
        .map(|i| du.at(i).to_vec())
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .collect();
    if points.len() < 5 {
        return Err(Error::InsufficientResolution(format!("ball of radius {r} holds {} interior nodes", points.len())));
    }
    Ok(GradientCloud::from_points(points, center.to_vec(), r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfplaneChop {
    Below,
    Above,
    Crosses,
}

impl fmt::Display for HalfplaneChop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HalfplaneChop::Below => "below",
            HalfplaneChop::Above => "above",
            HalfplaneChop::Crosses => "crosses",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleChop {
    Inside,
    Outside,
    Crosses,
}

impl fmt::Display for CircleChop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CircleChop::Inside => "inside",
            CircleChop::Outside => "outside",
            CircleChop::Crosses => "crosses",
        })
    }
}

/// Below iff every `p·e ≤ a + gap`; otherwise above iff every `p·e ≥ a`.
pub fn chop_halfplane(c: &GradientCloud, e: &[f64], a: f64, gap: f64) -> Result<HalfplaneChop> {
    if c.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("direction has length {norm}, not 1")));
    }
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!("gap {gap} must be positive")));
    }
    let proj = |p: &Vec<f64>| p.iter().zip(e).map(|(x, y)| x * y).sum::<f64>();
    if c.points.iter().all(|p| proj(p) <= a + gap) {
        Ok(HalfplaneChop::Below)
    } else if c.points.iter().all(|p| proj(p) >= a) {
        Ok(HalfplaneChop::Above)
    } else {
        Ok(HalfplaneChop::Crosses)
    }
}

/// Inside iff every point is within `r_out` of `q`; otherwise outside iff
/// every point is at least `r_in` away.
pub fn chop_circle(c: &GradientCloud, q: &[f64], r_in: f64, r_out: f64) -> Result<CircleChop> {
    if c.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::InvalidParameter(format!("need 0 < r_in < r_out (got {r_in}, {r_out})")));
    }
    if c.points.iter().all(|p| dist(p, q) <= r_out) {
        Ok(CircleChop::Inside)
    } else if c.points.iter().all(|p| dist(p, q) >= r_in) {
        Ok(CircleChop::Outside)
    } else {
        Ok(CircleChop::Crosses)
    }
}

/// Exact radial and tangential Hessian eigenvalues of `η(p) = |p|^{-M} − 1`.
pub fn eta_eigenvalues(m: f64, r: f64) -> (f64, f64) {
    let s = r.powf(-m - 2.0);
    (m * (m + 1.0) * s, -m * s)
}

fn richardson_hessian(f: impl Fn(&[f64]) -> f64, p: &[f64], step: f64) -> Vec<f64> {
    let coarse = numdiff::hessian(&f, p, step);
    let fine = numdiff::hessian(&f, p, step / 2.0);
    coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

/// Checks the eigenvalues of `D²η` on `|p| ∈ [ρ₀, 1]` against finite
/// differences and evaluates the criterion `M(M+1) ≥ (n−1)M`.
pub fn eta_subsolution_audit(m: f64, rho0: f64, n: usize, samples: usize, seed: u64) -> Result<ProbeReport> {
    if !(m > 0.0) || !(rho0 > 0.0 && rho0 < 1.0) || n < 2 || samples == 0 {
        return Err(Error::InvalidParameter(format!("need M > 0, 0 < rho0 < 1, n >= 2 (M={m}, rho0={rho0}, n={n})")));
    }
    let eta = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>().sqrt().powf(-m) - 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut err_radial, mut err_tangential): (f64, f64) = (0.0, 0.0);
    for k in 0..samples {
        let r = if samples == 1 { rho0 } else { rho0 + (1.0 - rho0) * k as f64 / (samples - 1) as f64 };
        let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        dir.iter_mut().for_each(|x| *x /= len);
        let p: Vec<f64> = dir.iter().map(|x| x * r).collect();
        let hs = richardson_hessian(eta, &p, 1e-3 * r);
        let ev = sorted_eigenvalues(DMatrix::from_row_slice(n, n, &hs));
        let (radial, tangential) = eta_eigenvalues(m, r);
        err_radial = err_radial.max((ev[n - 1] - radial).abs() / radial.abs());
        for &t in &ev[..n - 1] {
            err_tangential = err_tangential.max((t - tangential).abs() / tangential.abs());
        }
    }
    let criterion = m * (m + 1.0) - (n as f64 - 1.0) * m;
    let (rad_half, tan_half) = eta_eigenvalues(m, 0.5);
    let fd_margin = 1e-6 - err_radial.max(err_tangential);
    let mut rep = ProbeReport::new("eta-subsolution")
        .with("M", m)
        .with("n", n as f64)
        .with("samples", samples as f64)
        .with("max_rel_error_radial", err_radial)
        .with("max_rel_error_tangential", err_tangential)
        .with("radial_at_half", rad_half)
        .with("tangential_at_half", tan_half)
        .with("criterion", criterion);
    if criterion < 0.0 {
        rep.note("M(M+1) < (n-1)M: eta(grad u) is not subharmonic by this criterion");
    }
    Ok(rep.decide(fd_margin.min(criterion / (m * (m + 1.0)))))
}

/// `F₁₁(∇u)u₁₁ + F₂₂(∇u)u₂₂` for a separable integrand and its companion.
pub fn separable_residual(f: &Lagrangian, u: &SeparableCompanion, x: f64, y: f64) -> Result<f64> {
    if f.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: f.dim() });
    }
    let step = 1e-5;
    let g = u.gradient(x, y)?;
    let uxx = (u.gradient(x + step, y)?[0] - u.gradient(x - step, y)?[0]) / (2.0 * step);
    let uyy = (u.gradient(x, y + step)?[1] - u.gradient(x, y - step)?[1]) / (2.0 * step);
    let h = f.hessian(&g);
    Ok(h[(0, 0)] * uxx + h[(1, 1)] * uyy)
}
