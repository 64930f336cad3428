//! Truncations, level-set profiles and the two numeric sequence lemmas of the
//! De Giorgi iteration.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::io::Table;
use crate::probe::MIN_BALL_NODES;
use crate::report::ProbeReport;

/// Values at or below this count as zero in the geometric lemma.
pub const UNDERFLOW: f64 = 1e-300;
/// Relative width at which the threshold bisection stops.
pub const THRESHOLD_TOL: f64 = 1e-6;
/// Required drop in `oscillation_drop`.
pub const STRICT_DROP: f64 = 1e-3;
const BOUND_SLACK: f64 = 1e-12;

/// `(v − κ)₊`, NaN preserved.
pub fn truncate_plus(v: &ScalarField, kappa: f64) -> ScalarField {
    v.map(|x| (x - kappa).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// `V(s) = ∫_{B_{2−s}} (v − s)₊²`
    Energy,
    /// `W(s) = |{v ≤ s} ∩ B₁| / |B₁|`
    Measure,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Energy => "V",
            ProfileKind::Measure => "W",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelProfile {
    pub kind: ProfileKind,
    pub heights: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest `c` admissible for every sampled pair (measure profiles only).
    pub pair_constant: Option<f64>,
}

impl LevelProfile {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["s", self.kind.name()]);
        for (s, v) in self.heights.iter().zip(&self.values) {
            t.push_numbers(&[*s, *v]);
        }
        t
    }
}

fn sorted_heights(s: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = s.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidParameter(format!("level height {bad} outside [0, 1]")));
    }
    let mut out = s.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

pub fn v_profile(v: &ScalarField, s: &[f64]) -> Result<LevelProfile> {
    let heights = sorted_heights(s)?;
    let grid = v.grid();
    let origin = vec![0.0; grid.dim()];
    let mut values = Vec::with_capacity(heights.len());
    for &h in &heights {
        let r = 2.0 - h;
        let count = grid.nodes_in_ball(&origin, r).len();
        if count < MIN_BALL_NODES {
            return Err(Error::InsufficientResolution(format!("B_{r} holds {count} nodes")));
        }
        let val = grid.ball_sum(&origin, r, |i| {
            let x = v.at(i);
            if x.is_finite() {
                (x - h).max(0.0).powi(2)
            } else {
                0.0
            }
        })?;
        values.push(val);
    }
    Ok(LevelProfile { kind: ProfileKind::Energy, heights, values, pair_constant: None })
}

/// Smallest `C` with `V(κ) ≤ C (κ − τ)^{−2−4/n} V(τ)^{1+2/n}` over all sampled `τ < κ`.
pub fn scaling_class_audit(profile: &LevelProfile, n: usize) -> ProbeReport {
    let n = n.max(1) as f64;
    let gap_exp = 2.0 + 4.0 / n;
    let pow = 1.0 + 2.0 / n;
    let mut worst = 0.0f64;
    let mut at = (f64::NAN, f64::NAN);
    let mut pairs = 0usize;
    let (s, v) = (&profile.heights, &profile.values);
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let (tau, kappa) = (s[i], s[j]);
            if kappa <= tau {
                continue;
            }
            pairs += 1;
            let c = if v[j] <= 0.0 {
                0.0
            } else if v[i] <= 0.0 {
                f64::INFINITY
            } else {
                v[j] * (kappa - tau).powf(gap_exp) / v[i].powf(pow)
            };
            if c > worst || (c.is_nan() && !worst.is_nan()) {
                worst = c;
                at = (tau, kappa);
            }
        }
    }
    let mut r = ProbeReport::new("scaling_class")
        .with("C", worst)
        .with("n", n)
        .with("pairs", pairs as f64)
        .with("worst_tau", at.0)
        .with("worst_kappa", at.1);
    if profile.kind != ProfileKind::Energy {
        r.note("profile is not a V profile");
    }
    if worst.is_infinite() {
        r.note("V(tau)=0 with V(kappa)>0: input is not a subsolution");
    }
    r.decide(if worst.is_finite() { 0.0 } else { f64::NEG_INFINITY })
}

/// `W(s)` by node counting in `B₁`, plus the largest `c` in
/// `W(s)(1 + c (t−s)²/(1−s)² W(s)(1−W(t))²) ≤ W(t)` over sampled `s < t`.
pub fn measure_profile(v: &ScalarField, s: &[f64]) -> Result<LevelProfile> {
    let heights = sorted_heights(s)?;
    let grid = v.grid();
    let origin = vec![0.0; grid.dim()];
    if !grid.contains_ball(&origin, 1.0) {
        return Err(Error::OutOfDomain { center: origin, radius: 1.0 });
    }
    let vals: Vec<f64> = grid.nodes_in_ball(&origin, 1.0).into_iter().map(|i| v.at(i)).filter(|x| x.is_finite()).collect();
    if vals.len() < MIN_BALL_NODES {
        return Err(Error::InsufficientResolution(format!("B_1 holds {} finite nodes", vals.len())));
    }
    let total = vals.len() as f64;
    let values: Vec<f64> = heights.iter().map(|&h| vals.iter().filter(|&&x| x <= h).count() as f64 / total).collect();
    let mut best = f64::INFINITY;
    for i in 0..heights.len() {
        for j in i + 1..heights.len() {
            let (a, b) = (heights[i], heights[j]);
            if a >= 1.0 {
                continue;
            }
            let (ws, wt) = (values[i], values[j]);
            let gain = ((b - a) / (1.0 - a)).powi(2) * ws * (1.0 - wt).powi(2);
            if ws <= 0.0 || gain <= 0.0 {
                continue;
            }
            best = best.min(((wt / ws - 1.0) / gain).max(0.0));
        }
    }
    Ok(LevelProfile { kind: ProfileKind::Measure, heights, values, pair_constant: Some(best) })
}

/// Measured `sup_{B_{1/2}} v / sup_{B₁} v₊` for a subsolution vanishing on a
/// fraction at least `delta_frac` of `B₁`.
pub fn oscillation_drop(v: &ScalarField, delta_frac: f64) -> Result<ProbeReport> {
    let grid = v.grid();
    let origin = vec![0.0; grid.dim()];
    if !grid.contains_ball(&origin, 1.0) {
        return Err(Error::OutOfDomain { center: origin, radius: 1.0 });
    }
    let b1: Vec<f64> = grid.nodes_in_ball(&origin, 1.0).into_iter().map(|i| v.at(i)).filter(|x| x.is_finite()).collect();
    let sup = b1.iter().fold(0.0f64, |m, &x| m.max(x));
    if sup <= 0.0 {
        return Err(Error::NotApplicable("sup of v+ over B_1 is zero".into()));
    }
    let zero_fraction = b1.iter().filter(|&&x| x <= 0.0).count() as f64 / b1.len() as f64;
    if zero_fraction < delta_frac {
        return Err(Error::NotApplicable(format!("zero set fills {zero_fraction:.4} of B_1, below {delta_frac}")));
    }
    let half =
        grid.nodes_in_ball(&origin, 0.5).into_iter().map(|i| v.at(i)).filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let rho = half / sup;
    Ok(ProbeReport::new("oscillation_drop")
        .with("rho", rho)
        .with("sup_b1", sup)
        .with("sup_half", half)
        .with("zero_fraction", zero_fraction)
        .with("delta_frac", delta_frac)
        .decide(1.0 - STRICT_DROP - rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ConvergesToZero,
    BoundSatisfied,
    Diverges,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConvergesToZero => "converges-to-zero",
            Verdict::BoundSatisfied => "bound-satisfied",
            Verdict::Diverges => "diverges",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// `a_{k+1} = Cᵏ a_k^{1+δ}`
    Geometric { c: f64, delta: f64 },
    /// `a_{k+1} = a_k − c a_k²`
    Quadratic { c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub sequence: Vec<f64>,
    pub rule: Rule,
    pub verdict: Verdict,
    /// Bisected `a0*` for the geometric rule.
    pub threshold: Option<f64>,
    /// `max_{k≥1} a_k (1 + ck)` for the quadratic rule.
    pub tightness: Option<f64>,
}

impl IterationTrace {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["k", "a_k"]);
        for (k, a) in self.sequence.iter().enumerate() {
            t.push_numbers(&[k as f64, *a]);
        }
        t
    }

    pub fn to_report(&self) -> ProbeReport {
        let mut r = ProbeReport::new("sequence_lemma");
        match self.rule {
            Rule::Geometric { c, delta } => {
                r.set("C", c);
                r.set("delta", delta);
            }
            Rule::Quadratic { c } => r.set("c", c),
        }
        r.set("steps", self.sequence.len().saturating_sub(1) as f64);
        if let Some(&a) = self.sequence.last() {
            r.set("last", a);
        }
        if let Some(t) = self.threshold {
            r.set("threshold", t);
        }
        if let Some(t) = self.tightness {
            r.set("tightness", t);
        }
        r.note(format!("verdict={}", self.verdict));
        r.decide(if self.verdict == Verdict::Diverges { -1.0 } else { 0.0 })
    }
}

/// Runs the geometric recurrence in log space. The step ratio
/// `a_{k+1}/a_k` decreases exactly when the sequence is headed to zero, so a
/// single observed decrease certifies convergence.
fn geometric_run(c: f64, delta: f64, a0: f64, kmax: usize, keep: bool) -> (Verdict, Vec<f64>) {
    let mut seq = Vec::new();
    if keep {
        seq.push(a0);
    }
    if a0 < UNDERFLOW {
        if keep {
            seq.extend(std::iter::repeat_n(0.0, kmax.min(1)));
        }
        return (Verdict::ConvergesToZero, seq);
    }
    let lc = c.ln();
    let mut l = a0.ln();
    let mut prev_step: Option<f64> = None;
    for k in 0..kmax {
        let step = k as f64 * lc + delta * l;
        l += step;
        let a = l.exp();
        if keep {
            seq.push(a);
        }
        if a < UNDERFLOW {
            return (Verdict::ConvergesToZero, seq);
        }
        if !a.is_finite() {
            return (Verdict::Diverges, seq);
        }
        if let Some(p) = prev_step {
            if step < p {
                return (Verdict::ConvergesToZero, seq);
            }
        }
        prev_step = Some(step);
    }
    (Verdict::Diverges, seq)
}

fn check_geometric(c: f64, delta: f64, a0: f64, kmax: usize) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if !(a0 >= 0.0 && a0.is_finite()) {
        return Err(Error::InvalidParameter(format!("a0 must be non-negative, got {a0}")));
    }
    if kmax < 1 {
        return Err(Error::InvalidParameter("kmax must be at least 1".into()));
    }
    Ok(())
}

/// Bisected `a0*`: starting values below it converge within `kmax` steps.
/// Clamped to `[UNDERFLOW, f64::MAX]`.
pub fn geometric_threshold(c: f64, delta: f64, kmax: usize) -> Result<f64> {
    check_geometric(c, delta, 0.0, kmax)?;
    let conv = |la: f64| geometric_run(c, delta, la.exp(), kmax, false).0 == Verdict::ConvergesToZero;
    let (floor, ceil) = (UNDERFLOW.ln(), f64::MAX.ln());
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    if conv(0.0) {
        while conv(hi) {
            lo = hi;
            hi = (hi + 20.0).min(ceil);
            if hi >= ceil {
                return Ok(if conv(ceil) { f64::MAX } else { bisect(conv, lo, ceil) });
            }
        }
    } else {
        while !conv(lo) {
            hi = lo;
            lo = (lo - 20.0).max(floor);
            if lo <= floor {
                return Ok(if conv(floor) { bisect(conv, floor, hi) } else { UNDERFLOW });
            }
        }
    }
    Ok(bisect(conv, lo, hi))
}

fn bisect(conv: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if conv(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn seq_lemma_geometric(c: f64, delta: f64, a0: f64, kmax: usize) -> Result<IterationTrace> {
    check_geometric(c, delta, a0, kmax)?;
    let (verdict, sequence) = geometric_run(c, delta, a0, kmax, true);
    Ok(IterationTrace {
        sequence,
        rule: Rule::Geometric { c, delta },
        verdict,
        threshold: Some(geometric_threshold(c, delta, kmax)?),
        tightness: None,
    })
}

pub fn seq_lemma_quadratic(c: f64, a0: f64, kmax: usize) -> Result<IterationTrace> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(Error::InvalidParameter(format!("c must lie in (0, 1/2], got {c}")));
    }
    if !(0.0..=1.0).contains(&a0) {
        return Err(Error::InvalidParameter(format!("a0 must lie in [0, 1], got {a0}")));
    }
    let mut sequence = Vec::with_capacity(kmax + 1);
    let mut a = a0;
    let mut ok = true;
    let mut tight = f64::NEG_INFINITY;
    for k in 0..=kmax {
        let scaled = a * (1.0 + c * k as f64);
        ok &= scaled <= 1.0 + BOUND_SLACK;
        if k >= 1 {
            tight = tight.max(scaled);
        }
        sequence.push(a);
        a -= c * a * a;
    }
    Ok(IterationTrace {
        sequence,
        rule: Rule::Quadratic { c },
        verdict: if ok { Verdict::BoundSatisfied } else { Verdict::Diverges },
        threshold: None,
        tightness: if kmax >= 1 { Some(tight) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, Mask};
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(res: usize, scale: f64) -> Arc<Grid> {
        Arc::new(Grid::with_scale(2, res, Mask::Square, scale).unwrap())
    }

    fn node_near(g: &Grid, p: &[f64]) -> usize {
        (0..g.len())
            .min_by(|&a, &b| {
                let d = |i: usize| g.point(i).iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                d(a).total_cmp(&d(b))
            })
            .unwrap()
    }

    #[test]
    fn truncation_examples() {
        let g = grid(9, 1.0);
        let v = ScalarField::from_fn(g.clone(), |x| x[0]);
        let t = truncate_plus(&v, 0.0);
        assert_eq!(t.at(node_near(&g, &[-0.5, 0.0])), 0.0);
        assert_eq!(t.at(node_near(&g, &[0.5, 0.0])), 0.5);
        assert!(truncate_plus(&v, 1.0).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn v_profile_constant_matches_closed_form() {
        let g = grid(257, 2.0);
        let v = ScalarField::from_fn(g, |_| 1.0);
        let s = [0.0, 0.25, 0.5, 0.75];
        let p = v_profile(&v, &s).unwrap();
        for (h, val) in p.heights.iter().zip(&p.values) {
            let exact = (1.0 - h).powi(2) * PI * (2.0 - h).powi(2);
            assert!((val - exact).abs() <= 0.01 * exact, "s={h}: {val} vs {exact}");
        }
        let neg = ScalarField::from_fn(v.grid().clone(), |x| -x[0].abs());
        assert!(v_profile(&neg, &s).unwrap().values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn v_profile_needs_radius_two() {
        let v = ScalarField::from_fn(grid(33, 1.0), |_| 1.0);
        assert!(matches!(v_profile(&v, &[0.5]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(v_profile(&v, &[1.5]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn scaling_class_examples() {
        let zero =
            LevelProfile { kind: ProfileKind::Energy, heights: vec![0.0, 0.5], values: vec![0.0, 0.0], pair_constant: None };
        let r = scaling_class_audit(&zero, 2);
        assert!(r.pass);
        assert_eq!(r.get("C"), Some(0.0));
        let bad =
            LevelProfile { kind: ProfileKind::Energy, heights: vec![0.0, 0.5], values: vec![0.0, 1.0], pair_constant: None };
        assert!(!scaling_class_audit(&bad, 2).pass);

        let s: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let c = |res| {
            let v = ScalarField::from_fn(grid(res, 2.0), |x| x[0]);
            let r = scaling_class_audit(&v_profile(&v, &s).unwrap(), 2);
            assert!(r.pass);
            r.get("C").unwrap()
        };
        let (a, b) = (c(129), c(257));
        assert!((a - b).abs() <= 0.2 * b, "{a} vs {b}");
    }

    #[test]
    fn measure_profile_examples() {
        let g = grid(129, 1.0);
        let v = ScalarField::from_fn(g.clone(), |x| x[0]);
        let p = measure_profile(&v, &[0.0, 0.5, 1.0]).unwrap();
        assert!((p.values[0] - 0.5).abs() <= 2.0 * g.h(), "{}", p.values[0]);
        assert_eq!(p.values[2], 1.0);
        let c = p.pair_constant.unwrap();
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn oscillation_drop_examples() {
        let g = grid(65, 1.0);
        let v = ScalarField::from_fn(g.clone(), |x| x[1]);
        let r = oscillation_drop(&v, 0.4).unwrap();
        assert!(r.pass);
        assert!((r.get("rho").unwrap() - 0.5).abs() < 1e-12);
        let neg = ScalarField::from_fn(g.clone(), |x| -1.0 - x[0].abs());
        assert!(matches!(oscillation_drop(&neg, 0.1), Err(Error::NotApplicable(_))));
        let one = ScalarField::from_fn(g, |_| 1.0);
        assert!(matches!(oscillation_drop(&one, 0.1), Err(Error::NotApplicable(_))));
    }

    fn direct_geometric(c: f64, delta: f64, a0: f64, kmax: usize) -> Verdict {
        let mut a = a0;
        for k in 0..kmax {
            if a < UNDERFLOW {
                return Verdict::ConvergesToZero;
            }
            a = c.powi(k as i32) * a.powf(1.0 + delta);
            if !a.is_finite() {
                return Verdict::Diverges;
            }
        }
        if a < UNDERFLOW {
            Verdict::ConvergesToZero
        } else {
            Verdict::Diverges
        }
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(direct_geometric(2.0, 1.0, 2f64.powi(-10), 1000), Verdict::ConvergesToZero);
        assert_eq!(direct_geometric(2.0, 1.0, 1.0, 1000), Verdict::Diverges);
        let t = seq_lemma_geometric(2.0, 1.0, 2f64.powi(-10), 1000).unwrap();
        assert_eq!(t.verdict, Verdict::ConvergesToZero);
        assert_eq!(seq_lemma_geometric(2.0, 1.0, 1.0, 1000).unwrap().verdict, Verdict::Diverges);
        let z = seq_lemma_geometric(2.0, 1.0, 0.0, 10).unwrap();
        assert_eq!(z.verdict, Verdict::ConvergesToZero);
        assert!(z.sequence.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn geometric_threshold_matches_closed_form() {
        for &(c, d) in &[(2.0, 1.0), (4.0, 0.5), (1.5, 2.0), (0.5, 1.0), (10.0, 0.7)] {
            let t = geometric_threshold(c, d, 2000).unwrap();
            let exact = f64::powf(c, -1.0 / (d * d));
            assert!((t / exact - 1.0).abs() <= 2e-6, "C={c} delta={d}: {t} vs {exact}");
        }
    }

    #[test]
    fn geometric_threshold_monotone() {
        let cs = [1.2, 2.0, 3.0, 5.0];
        let ds = [0.5, 1.0, 1.5];
        for &d in &ds {
            let ts: Vec<f64> = cs.iter().map(|&c| geometric_threshold(c, d, 2000).unwrap()).collect();
            assert!(ts.windows(2).all(|w| w[1] < w[0]), "{ts:?}");
        }
        for &c in &cs {
            let ts: Vec<f64> = ds.iter().map(|&d| geometric_threshold(c, d, 2000).unwrap()).collect();
            assert!(ts.windows(2).all(|w| w[1] > w[0]), "{ts:?}");
        }
    }

    #[test]
    fn quadratic_examples() {
        let t = seq_lemma_quadratic(0.1, 1.0, 1).unwrap();
        assert!((t.sequence[1] - 0.9).abs() < 1e-15);
        assert!(t.sequence[1] <= 1.0 / 1.1);
        let z = seq_lemma_quadratic(0.3, 0.0, 50).unwrap();
        assert!(z.sequence.iter().all(|&a| a == 0.0));
        assert_eq!(z.verdict, Verdict::BoundSatisfied);
        let big = seq_lemma_quadratic(0.5, 1.0, 10_000).unwrap();
        assert_eq!(big.verdict, Verdict::BoundSatisfied);
        assert!(big.sequence.iter().enumerate().all(|(k, a)| a * (1.0 + 0.5 * k as f64) <= 1.0));
        assert!(seq_lemma_quadratic(0.6, 1.0, 5).is_err());
        assert!(seq_lemma_quadratic(0.1, 1.5, 5).is_err());
    }

    #[test]
    fn quadratic_bound_is_tight_for_small_c() {
        let t = seq_lemma_quadratic(1e-3, 1.0, 10_000).unwrap();
        assert!((t.tightness.unwrap() - 1.0).abs() <= 1e-2);
    }

    fn random_field(res: usize, scale: f64, seed: &[f64]) -> ScalarField {
        let g = grid(res, scale);
        let n = seed.len();
        let vals = (0..g.len()).map(|i| seed[i % n] + 0.3 * g.coord(i, 0)).collect();
        ScalarField::from_values(g, vals).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn profiles_are_monotone(seed in prop::collection::vec(-1.0f64..1.5, 7..40)) {
            let s: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            let v = random_field(33, 2.0, &seed);
            let p = v_profile(&v, &s).unwrap();
            prop_assert!(p.values.windows(2).all(|w| w[1] <= w[0]));
            let u = random_field(33, 1.0, &seed);
            let w = measure_profile(&u, &s).unwrap();
            prop_assert!(w.values.windows(2).all(|x| x[1] >= x[0]));
            prop_assert!(w.values.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn truncation_idempotent_and_ordered(seed in prop::collection::vec(-2.0f64..2.0, 5..30), k in -1.0f64..1.0, lift in 0.0f64..1.0) {
            let v = random_field(17, 1.0, &seed);
            let w = v.map(|x| x + lift);
            let t = truncate_plus(&v, k);
            let tt = truncate_plus(&t, 0.0);
            prop_assert_eq!(tt.values(), t.values());
            let p = truncate_plus(&v, 0.0);
            let pp = truncate_plus(&p, 0.0);
            prop_assert_eq!(pp.values(), p.values());
            let tw = truncate_plus(&w, k);
            prop_assert!(t.values().iter().zip(tw.values()).all(|(a, b)| a <= b));
        }

        #[test]
        fn quadratic_bound_holds(c in 1e-3f64..0.5, a0 in 0.0f64..1.0) {
            prop_assert_eq!(seq_lemma_quadratic(c, a0, 2000).unwrap().verdict, Verdict::BoundSatisfied);
        }

        #[test]
        fn geometric_agrees_with_direct_iteration(c in 1.1f64..4.0, d in 0.3f64..2.0, la in -30.0f64..0.0) {
            let exact = -c.ln() / (d * d);
            prop_assume!((la - exact).abs() > 0.05);
            let ours = seq_lemma_geometric(c, d, la.exp(), 3000).unwrap().verdict;
            prop_assert_eq!(ours, direct_geometric(c, d, la.exp(), 3000));
        }
    }
}
