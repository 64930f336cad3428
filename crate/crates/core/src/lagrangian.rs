//! Integrands `F(∇u)` of variational integrals, with convexity and degeneracy metadata.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::numdiff;
use crate::quad;
use crate::report::ProbeReport;

/// Step for the second differences of expression-defined integrands.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Step for the five-point first differences of expression-defined integrands.
pub const GRADIENT_STEP: f64 = 1e-3;
/// Absolute tolerance for convexity checks.
pub const CONVEXITY_TOL: f64 = 1e-8;

// Below this radius the Hessians of sub-quadratic powers are evaluated at the
// clamped radius instead of blowing up.
const SINGULAR_CLAMP: f64 = 1e-8;

type DistanceFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// The set of gradients where an integrand fails to be smooth and uniformly convex.
#[derive(Clone)]
pub enum DegeneracySet {
    Empty,
    Point(Vec<f64>),
    ClosedBall { center: Vec<f64>, radius: f64 },
    FinitePoints(Vec<Vec<f64>>),
    Custom { label: String, distance: Arc<DistanceFn> },
}

fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl DegeneracySet {
    /// Euclidean distance from `p` to the set (`+inf` when empty).
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        match self {
            DegeneracySet::Empty => f64::INFINITY,
            DegeneracySet::Point(c) => dist(p, c),
            DegeneracySet::ClosedBall { center, radius } => (dist(p, center) - radius).max(0.0),
            DegeneracySet::FinitePoints(pts) => pts.iter().map(|c| dist(p, c)).fold(f64::INFINITY, f64::min),
            DegeneracySet::Custom { distance, .. } => distance(p),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.distance_to(p) == 0.0
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, DegeneracySet::Empty)
    }

    pub fn kind(&self) -> String {
        match self {
            DegeneracySet::Empty => "empty".into(),
            DegeneracySet::Point(_) => "point".into(),
            DegeneracySet::ClosedBall { radius, .. } => format!("closed-ball({radius})"),
            DegeneracySet::FinitePoints(pts) => format!("finite-points({})", pts.len()),
            DegeneracySet::Custom { label, .. } => format!("custom({label})"),
        }
    }

    /// Union of the hyperplanes `{p_i = 0}` for the listed coordinates.
    pub fn coordinate_hyperplanes(coords: Vec<usize>) -> Self {
        if coords.is_empty() {
            return DegeneracySet::Empty;
        }
        let label = format!("coordinate-hyperplanes{coords:?}");
        DegeneracySet::Custom {
            label,
            distance: Arc::new(move |p: &[f64]| coords.iter().map(|&i| p[i].abs()).fold(f64::INFINITY, f64::min)),
        }
    }
}

impl fmt::Debug for DegeneracySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.kind())
    }
}

/// A convex function of one variable, as used by separable integrands.
pub trait ConvexProfile: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    fn second_derivative(&self, t: f64) -> f64;

    /// `(H')^{-1}(s)`; the default brackets and bisects.
    fn derivative_inverse(&self, s: f64) -> Result<f64> {
        invert_increasing(|t| self.derivative(t), s)
    }

    /// Whether `H'' = 0` somewhere (which makes the separable integrand degenerate).
    fn degenerate_at_zero(&self) -> bool {
        self.second_derivative(0.0) <= 0.0
    }

    fn label(&self) -> String;
}

/// Builtin even, convex profiles `H` with `H'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `t²/2`
    Quadratic,
    /// `t⁴/4`
    Quartic,
    /// `t²/2 + t⁴/4`
    QuadQuartic,
    /// `cosh t − 1`
    Cosh,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Profile::Quadratic),
            "quartic" => Ok(Profile::Quartic),
            "quad-quartic" => Ok(Profile::QuadQuartic),
            "cosh" => Ok(Profile::Cosh),
            _ => Err(Error::InvalidParameter(format!("unknown profile `{s}`"))),
        }
    }
}

impl ConvexProfile for Profile {
    fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Quadratic => 0.5 * t * t,
            Profile::Quartic => 0.25 * t.powi(4),
            Profile::QuadQuartic => 0.5 * t * t + 0.25 * t.powi(4),
            Profile::Cosh => t.cosh() - 1.0,
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match self {
            Profile::Quadratic => t,
            Profile::Quartic => t.powi(3),
            Profile::QuadQuartic => t + t.powi(3),
            Profile::Cosh => t.sinh(),
        }
    }

    fn second_derivative(&self, t: f64) -> f64 {
        match self {
            Profile::Quadratic => 1.0,
            Profile::Quartic => 3.0 * t * t,
            Profile::QuadQuartic => 1.0 + 3.0 * t * t,
            Profile::Cosh => t.cosh(),
        }
    }

    fn label(&self) -> String {
        match self {
            Profile::Quadratic => "quadratic",
            Profile::Quartic => "quartic",
            Profile::QuadQuartic => "quad-quartic",
            Profile::Cosh => "cosh",
        }
        .into()
    }
}

/// The Legendre dual `H*` of a profile, realized numerically.
pub struct LegendreDual<P>(pub P);

impl<P: ConvexProfile> ConvexProfile for LegendreDual<P> {
    /// NaN when the inversion bracket cannot be found.
    fn value(&self, x: f64) -> f64 {
        legendre_1d(&self.0, x).unwrap_or(f64::NAN)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.0.derivative_inverse(x).unwrap_or(f64::NAN)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        1.0 / self.0.second_derivative(self.derivative(x))
    }

    fn derivative_inverse(&self, s: f64) -> Result<f64> {
        Ok(self.0.derivative(s))
    }

    fn degenerate_at_zero(&self) -> bool {
        false
    }

    fn label(&self) -> String {
        format!("legendre({})", self.0.label())
    }
}

const BRACKET_EXPANSIONS: usize = 64;

fn invert_increasing<G: Fn(f64) -> f64>(g: G, s: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut expansions = 0;
    while g(hi) < s {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > BRACKET_EXPANSIONS || !g(hi).is_finite() {
            return Err(Error::InversionFailure(s));
        }
    }
    while g(lo) > s {
        hi = lo;
        lo *= 2.0;
        expansions += 1;
        if expansions > BRACKET_EXPANSIONS || !g(lo).is_finite() {
            return Err(Error::InversionFailure(s));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Legendre transform `H*(x) = ∫₀ˣ (H')⁻¹(s) ds` of an even, strictly convex profile.
pub fn legendre_1d(h: &dyn ConvexProfile, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    quad::integrate(|s| h.derivative_inverse(s), 0.0, x, 1e-13)
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Quadratic,
    MinimalSurface,
    PLaplace(f64),
    Congestion,
    Anisotropic(Vec<f64>),
    Separable(Arc<dyn ConvexProfile>),
    Expression(Arc<Expr>),
    Custom(CustomFn),
}

/// Names accepted by [`make_builtin`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Quadratic,
    MinimalSurface,
    PLaplace,
    Congestion,
    Anisotropic,
    Separable,
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "quadratic" => Builtin::Quadratic,
            "minimal-surface" => Builtin::MinimalSurface,
            "p-laplace" => Builtin::PLaplace,
            "congestion" => Builtin::Congestion,
            "anisotropic" => Builtin::Anisotropic,
            "separable" => Builtin::Separable,
            other => return Err(Error::UnknownLagrangian(other.to_string())),
        })
    }
}

/// Parameters for builtins that need them.
#[derive(Debug, Clone, Default)]
pub struct BuiltinParams {
    pub p: Option<f64>,
    pub exponents: Option<Vec<f64>>,
    pub profile: Option<Profile>,
}

/// An integrand `F: ℝⁿ → ℝ` with its gradient and Hessian.
///
/// Builtins use closed forms; expression and closure integrands fall back to
/// central differences. A nonzero `smoothing` adds `ε|p|²`.
#[derive(Clone)]
pub struct Lagrangian {
    dim: usize,
    label: String,
    kind: Kind,
    degeneracy: DegeneracySet,
    smoothing: f64,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("degeneracy", &self.degeneracy)
            .field("smoothing", &self.smoothing)
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")));
    }
    Ok(())
}

impl Lagrangian {
    fn build(dim: usize, label: String, kind: Kind, degeneracy: DegeneracySet) -> Self {
        Self { dim, label, kind, degeneracy, smoothing: 0.0 }
    }

    /// `F(p) = |p|²`
    pub fn quadratic(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::build(dim, "quadratic".into(), Kind::Quadratic, DegeneracySet::Empty))
    }

    /// `F(p) = √(1 + |p|²)`
    pub fn minimal_surface(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::build(dim, "minimal-surface".into(), Kind::MinimalSurface, DegeneracySet::Empty))
    }

    /// `F(p) = |p|^q`, degenerate (or singular) at the origin unless `q = 2`.
    pub fn p_laplace(dim: usize, q: f64) -> Result<Self> {
        check_dim(dim)?;
        check_exponent(q)?;
        let degeneracy = if q == 2.0 { DegeneracySet::Empty } else { DegeneracySet::Point(vec![0.0; dim]) };
        Ok(Self::build(dim, format!("p-laplace(p={q})"), Kind::PLaplace(q), degeneracy))
    }

    /// `F(p) = (|p| − 1)₊²`, identically zero on the closed unit ball.
    pub fn congestion(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let degeneracy = DegeneracySet::ClosedBall { center: vec![0.0; dim], radius: 1.0 };
        Ok(Self::build(dim, "congestion".into(), Kind::Congestion, degeneracy))
    }

    /// `F(p) = Σ |p_i|^{q_i}`.
    pub fn anisotropic(exponents: Vec<f64>) -> Result<Self> {
        check_dim(exponents.len())?;
        for &q in &exponents {
            check_exponent(q)?;
        }
        let degenerate: Vec<usize> = exponents.iter().enumerate().filter(|(_, &q)| q != 2.0).map(|(i, _)| i).collect();
        let label = format!("anisotropic{exponents:?}");
        Ok(Self::build(exponents.len(), label, Kind::Anisotropic(exponents), DegeneracySet::coordinate_hyperplanes(degenerate)))
    }

    /// `F(p) = Σ H(p_i)`.
    pub fn separable(dim: usize, h: Arc<dyn ConvexProfile>) -> Result<Self> {
        check_dim(dim)?;
        let degeneracy =
            if h.degenerate_at_zero() { DegeneracySet::coordinate_hyperplanes((0..dim).collect()) } else { DegeneracySet::Empty };
        Ok(Self::build(dim, format!("separable({})", h.label()), Kind::Separable(h), degeneracy))
    }

    /// Integrand given as an expression in `p1..pn`.
    pub fn expression(dim: usize, expr: Expr) -> Result<Self> {
        check_dim(dim)?;
        let needed = expr.required_len();
        if needed > dim || expr.variables().iter().any(|v| !matches!(v, crate::expr::Variable::P(_))) {
            return Err(Error::InvalidParameter(format!("integrand `{expr}` must use only p1..p{dim}")));
        }
        let label = format!("expr:{expr}");
        Ok(Self::build(dim, label, Kind::Expression(Arc::new(expr)), DegeneracySet::Empty))
    }

    /// Integrand given by a closure; derivatives are numeric.
    pub fn from_fn<F>(dim: usize, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(Self::build(dim, label.into(), Kind::Custom(Arc::new(f)), DegeneracySet::Empty))
    }

    /// Replaces the recorded degeneracy set.
    pub fn with_degeneracy(mut self, degeneracy: DegeneracySet) -> Self {
        self.degeneracy = degeneracy;
        self
    }

    /// `F_ε = F + ε|p|²` (the smoothing is absolute, not cumulative).
    pub fn with_smoothing(&self, eps: f64) -> Self {
        let mut out = self.clone();
        out.smoothing = eps;
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn degeneracy(&self) -> &DegeneracySet {
        &self.degeneracy
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, Kind::Expression(_) | Kind::Custom(_))
    }

    fn raw_value(&self, p: &[f64]) -> f64 {
        match &self.kind {
            Kind::Quadratic => norm2(p),
            Kind::MinimalSurface => (1.0 + norm2(p)).sqrt(),
            Kind::PLaplace(q) => norm2(p).sqrt().powf(*q),
            Kind::Congestion => {
                let e = (norm2(p).sqrt() - 1.0).max(0.0);
                e * e
            }
            Kind::Anisotropic(qs) => p.iter().zip(qs).map(|(t, q)| t.abs().powf(*q)).sum(),
            Kind::Separable(h) => p.iter().map(|&t| h.value(t)).sum(),
            Kind::Expression(e) => e.eval(p).unwrap_or(f64::NAN),
            Kind::Custom(f) => f(p),
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let v = self.raw_value(p);
        if self.smoothing != 0.0 {
            v + self.smoothing * norm2(p)
        } else {
            v
        }
    }

    /// Writes `∇F(p)` into `out`.
    pub fn gradient_into(&self, p: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Quadratic => out.iter_mut().zip(p).for_each(|(o, t)| *o = 2.0 * t),
            Kind::MinimalSurface => {
                let s = (1.0 + norm2(p)).sqrt();
                out.iter_mut().zip(p).for_each(|(o, t)| *o = t / s);
            }
            Kind::PLaplace(q) => {
                let r = norm2(p).sqrt();
                let c = if r > 0.0 { q * r.powf(q - 2.0) } else { 0.0 };
                out.iter_mut().zip(p).for_each(|(o, t)| *o = c * t);
            }
            Kind::Congestion => {
                let r = norm2(p).sqrt();
                let c = if r > 1.0 { 2.0 * (r - 1.0) / r } else { 0.0 };
                out.iter_mut().zip(p).for_each(|(o, t)| *o = c * t);
            }
            Kind::Anisotropic(qs) => {
                for ((o, &t), &q) in out.iter_mut().zip(p).zip(qs) {
                    *o = if t == 0.0 { 0.0 } else { q * t.signum() * t.abs().powf(q - 1.0) };
                }
            }
            Kind::Separable(h) => out.iter_mut().zip(p).for_each(|(o, &t)| *o = h.derivative(t)),
            Kind::Expression(_) | Kind::Custom(_) => {
                let g = numdiff::gradient5(|q| self.raw_value(q), p, GRADIENT_STEP);
                out.copy_from_slice(&g);
            }
        }
        if self.smoothing != 0.0 {
            out.iter_mut().zip(p).for_each(|(o, t)| *o += 2.0 * self.smoothing * t);
        }
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        self.gradient_into(p, &mut g);
        g
    }

    /// Writes `D²F(p)` (row-major) into `out`.
    pub fn hessian_into(&self, p: &[f64], out: &mut [f64]) {
        let n = p.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.kind {
            Kind::Quadratic => (0..n).for_each(|i| out[i * n + i] = 2.0),
            Kind::MinimalSurface => {
                let s2 = 1.0 + norm2(p);
                let s = s2.sqrt();
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i * n + j] = (delta - p[i] * p[j] / s2) / s;
                    }
                }
            }
            Kind::PLaplace(q) => {
                let r = norm2(p).sqrt();
                if r == 0.0 && *q > 2.0 {
                    return self.add_smoothing(n, out);
                }
                let rc = r.max(SINGULAR_CLAMP);
                let c = q * rc.powf(q - 2.0);
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        let radial = if r > 0.0 { p[i] * p[j] / (r * r) } else { 0.0 };
                        out[i * n + j] = c * (delta + (q - 2.0) * radial);
                    }
                }
            }
            Kind::Congestion => {
                let r = norm2(p).sqrt();
                if r > 1.0 {
                    let tangential = 2.0 * (r - 1.0) / r;
                    for i in 0..n {
                        for j in 0..n {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            let radial = p[i] * p[j] / (r * r);
                            out[i * n + j] = tangential * (delta - radial) + 2.0 * radial;
                        }
                    }
                }
            }
            Kind::Anisotropic(qs) => {
                for i in 0..n {
                    let q = qs[i];
                    let t = p[i].abs();
                    out[i * n + i] = if q == 2.0 {
                        2.0
                    } else if t == 0.0 && q > 2.0 {
                        0.0
                    } else {
                        q * (q - 1.0) * t.max(SINGULAR_CLAMP).powf(q - 2.0)
                    };
                }
            }
            Kind::Separable(h) => (0..n).for_each(|i| out[i * n + i] = h.second_derivative(p[i])),
            Kind::Expression(_) | Kind::Custom(_) => {
                let hs = numdiff::hessian(|q| self.raw_value(q), p, HESSIAN_STEP);
                out.copy_from_slice(&hs);
            }
        }
        self.add_smoothing(n, out);
    }

    fn add_smoothing(&self, n: usize, out: &mut [f64]) {
        if self.smoothing != 0.0 {
            (0..n).for_each(|i| out[i * n + i] += 2.0 * self.smoothing);
        }
    }

    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let n = p.len();
        let mut h = vec![0.0; n * n];
        self.hessian_into(p, &mut h);
        DMatrix::from_row_slice(n, n, &h)
    }

    /// Sorted eigenvalues of `D²F(p)`.
    pub fn hessian_eigenvalues(&self, p: &[f64]) -> Vec<f64> {
        sorted_eigenvalues(self.hessian(p))
    }
}

pub(crate) fn norm2(p: &[f64]) -> f64 {
    p.iter().map(|t| t * t).sum()
}

pub(crate) fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dispatches a builtin by name.
pub fn make_builtin(name: &str, dim: usize, params: &BuiltinParams) -> Result<Lagrangian> {
    let missing = |what: &str| Error::InvalidParameter(format!("`{name}` needs parameter {what}"));
    match name.parse::<Builtin>()? {
        Builtin::Quadratic => Lagrangian::quadratic(dim),
        Builtin::MinimalSurface => Lagrangian::minimal_surface(dim),
        Builtin::PLaplace => Lagrangian::p_laplace(dim, params.p.ok_or_else(|| missing("p"))?),
        Builtin::Congestion => Lagrangian::congestion(dim),
        Builtin::Anisotropic => {
            let qs = params.exponents.clone().ok_or_else(|| missing("exponents"))?;
            if qs.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: qs.len() });
            }
            Lagrangian::anisotropic(qs)
        }
        Builtin::Separable => {
            let h = params.profile.ok_or_else(|| missing("profile"))?;
            Lagrangian::separable(dim, Arc::new(h))
        }
    }
}

/// `u(x, y) = H*(x) − H*(y)`, which solves `F_ij(∇u) u_ij = 0` for `F(p, q) = H(p) + H(q)`.
#[derive(Clone)]
pub struct SeparableCompanion {
    profile: Arc<dyn ConvexProfile>,
}

impl SeparableCompanion {
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        Ok(legendre_1d(self.profile.as_ref(), x)? - legendre_1d(self.profile.as_ref(), y)?)
    }

    /// `∇u = ((H')⁻¹(x), −(H')⁻¹(y))`.
    pub fn gradient(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        Ok([self.profile.derivative_inverse(x)?, -self.profile.derivative_inverse(y)?])
    }
}

/// The separable integrand built from `h` together with its explicit solution.
pub fn separable_example(h: Arc<dyn ConvexProfile>) -> Result<(Lagrangian, SeparableCompanion)> {
    let d0 = h.derivative(0.0);
    if d0.abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("profile needs H'(0) = 0, got {d0}")));
    }
    let f = Lagrangian::separable(2, h.clone())?;
    Ok((f, SeparableCompanion { profile: h }))
}

/// A region of gradient space to sample.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientRegion {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl GradientRegion {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        GradientRegion::Ball { center, radius }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        GradientRegion::Box { lo: vec![-half_width; dim], hi: vec![half_width; dim] }
    }

    pub fn dim(&self) -> usize {
        match self {
            GradientRegion::Ball { center, .. } => center.len(),
            GradientRegion::Box { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            GradientRegion::Ball { center, radius } => dist(p, center) <= *radius,
            GradientRegion::Box { lo, hi } => p.iter().zip(lo.iter().zip(hi)).all(|(t, (a, b))| *a <= *t && *t <= *b),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            GradientRegion::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
            GradientRegion::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// `count` points by rejection sampling from the bounding box.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let (lo, hi) = self.bounds();
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParameter("empty gradient region".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            if attempts > 1000 * count.max(1) {
                return Err(Error::InvalidParameter("region too thin to sample".into()));
            }
            let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| if a == b { *a } else { rng.random_range(*a..=*b) }).collect();
            if self.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        match self {
            GradientRegion::Ball { center, radius } => format!("ball(center={center:?}, r={radius})"),
            GradientRegion::Box { lo, hi } => format!("box(lo={lo:?}, hi={hi:?})"),
        }
    }
}

/// Range of Hessian eigenvalues over a sampled region of gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityWindow {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub region: String,
    /// Set when every sample fell inside the degeneracy set.
    pub degenerate: bool,
}

impl EllipticityWindow {
    /// The largest `λ` with all eigenvalues in `[λ, 1/λ]`.
    pub fn lambda(&self) -> f64 {
        if self.lambda_max <= 0.0 {
            return 0.0;
        }
        self.lambda_min.min(1.0 / self.lambda_max).max(0.0)
    }
}

/// Min/max Hessian eigenvalue of `f` over `samples` points of `region`.
pub fn ellipticity_bounds(f: &Lagrangian, region: &GradientRegion, samples: usize, seed: u64) -> Result<EllipticityWindow> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    if region.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: region.dim() });
    }
    let points = region.sample(samples, seed)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut all_degenerate = true;
    for p in &points {
        let ev = f.hessian_eigenvalues(p);
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
        if !f.degeneracy().contains(p) {
            all_degenerate = false;
        }
    }
    if all_degenerate {
        lo = 0.0;
        hi = hi.max(0.0);
    }
    Ok(EllipticityWindow { lambda_min: lo, lambda_max: hi, region: region.describe(), degenerate: all_degenerate })
}

/// Samples midpoint convexity and Hessian eigenvalues of `f` over a box.
pub fn convexity_audit(f: &Lagrangian, region: &GradientRegion, grid: usize, seed: u64) -> ProbeReport {
    let report = ProbeReport::new("convexity-audit");
    if grid < 2 {
        let mut r = report;
        r.note("grid must be >= 2");
        return r.decide(f64::NAN);
    }
    let (lo, hi) = region.bounds();
    let n = lo.len();
    let total = grid.pow(n as u32);
    let nodes: Vec<Vec<f64>> = (0..total)
        .map(|mut k| {
            (0..n)
                .map(|axis| {
                    let i = k % grid;
                    k /= grid;
                    lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (grid - 1) as f64
                })
                .collect()
        })
        .filter(|p: &Vec<f64>| region.contains(p))
        .collect();
    let mut min_eig = f64::INFINITY;
    for p in &nodes {
        min_eig = min_eig.min(f.hessian_eigenvalues(p)[0]);
    }
    let mut violation: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !nodes.is_empty() {
        for _ in 0..4 * nodes.len() {
            let p = &nodes[rng.random_range(0..nodes.len())];
            let q = &nodes[rng.random_range(0..nodes.len())];
            let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
            let defect = f.value(&mid) - 0.5 * (f.value(p) + f.value(q));
            violation = violation.max(defect);
        }
    }
    let margin = (CONVEXITY_TOL - violation).min(min_eig + CONVEXITY_TOL);
    report
        .with("worst_midpoint_violation", violation)
        .with("min_hessian_eigenvalue", min_eig)
        .with("samples", nodes.len() as f64)
        .decide(margin)
}
