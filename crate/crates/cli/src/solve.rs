use std::sync::Arc;

use anyhow::{bail, Context, Result};
use varreg::field::{trace_boundary, Grid, Mask, ScalarField};
use varreg::io::{field_to_string, Table};
use varreg::lagrangian::{make_builtin, BuiltinParams, Profile};
use varreg::{minimize, parse, Lagrangian, Method, SolveOptions};

use crate::output::Output;
use crate::{parse_list, Common, Outcome};

#[derive(clap::Args)]
pub struct Args {
    /// quadratic, minimal-surface, p-laplace, congestion, anisotropic,
    /// separable, or expression (with --integrand).
    #[arg(long)]
    lagrangian: String,
    /// Exponent for p-laplace.
    #[arg(long)]
    p: Option<f64>,
    /// Comma list of exponents for anisotropic.
    #[arg(long)]
    exponents: Option<String>,
    /// Profile for separable: quadratic, quartic, quad-quartic, cosh.
    #[arg(long)]
    profile: Option<String>,
    /// F as an expression in p1..p4, for --lagrangian expression.
    #[arg(long)]
    integrand: Option<String>,
    /// Boundary data as an expression in x, y, z, w.
    #[arg(long)]
    bc: String,
    /// Nodes per axis; odd and at least 33.
    #[arg(long, default_value_t = 65)]
    res: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value = "square")]
    mask: Mask,
    /// Half-width of the domain; 2 gives fields the level-set profiles accept.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "newton-damped")]
    method: Method,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long)]
    tol_energy: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Starting ε of the smoothing continuation.
    #[arg(long)]
    smoothing: Option<f64>,
    /// Skip the convexity audit.
    #[arg(long)]
    no_audit: bool,
    /// Closed-form solution to compare against.
    #[arg(long)]
    exact: Option<String>,
    #[command(flatten)]
    common: Common,
}

pub fn lagrangian(
    name: &str,
    dim: usize,
    p: Option<f64>,
    exponents: Option<&str>,
    profile: Option<&str>,
    integrand: Option<&str>,
) -> Result<Lagrangian> {
    if name == "expression" {
        let Some(src) = integrand else { bail!("--lagrangian expression needs --integrand") };
        return Ok(Lagrangian::expression(dim, parse(src)?)?);
    }
    let params = BuiltinParams {
        p,
        exponents: exponents.map(parse_list).transpose()?,
        profile: profile.map(|s| s.parse::<Profile>()).transpose()?,
    };
    Ok(make_builtin(name, dim, &params)?)
}

pub fn run(a: Args) -> Result<Outcome> {
    if a.res < 33 || a.res.is_multiple_of(2) {
        bail!("--res must be odd and at least 33, got {}", a.res);
    }
    let f = lagrangian(&a.lagrangian, a.dim, a.p, a.exponents.as_deref(), a.profile.as_deref(), a.integrand.as_deref())?;
    let bc = parse(&a.bc).context("parsing --bc")?;
    let exact = a.exact.as_deref().map(parse).transpose().context("parsing --exact")?;
    let grid = Arc::new(Grid::with_scale(a.dim, a.res, a.mask, a.scale)?);
    let boundary = trace_boundary(&grid, &bc)?;
    let mut opts = SolveOptions { method: a.method, smoothing_eps: a.smoothing, audit: !a.no_audit, ..SolveOptions::default() };
    if let Some(t) = a.tol_residual {
        opts.tol_residual = t;
    }
    if let Some(t) = a.tol_energy {
        opts.tol_rel_energy = t;
    }
    if let Some(m) = a.max_iters {
        opts.max_iters = m;
    }
    let (u, report) = minimize(&f, &grid, &boundary, &opts)?;

    let mut out = Output::create(&a.common.out)?;
    out.write("u.csv", &field_to_string(&u))?;
    let mut history = Table::new(&["iteration", "energy"]);
    for (k, e) in report.energy_history.iter().enumerate() {
        history.push_numbers(&[k as f64, *e]);
    }
    out.write("tables/energy.csv", &history.to_csv())?;

    out.line("lagrangian", f.label());
    out.line("bc", &a.bc);
    out.line("dim", a.dim);
    out.line("res", a.res);
    out.line("h", grid.h());
    out.line("mask", a.mask.name());
    out.line("scale", a.scale);
    out.line("seed", a.common.seed);
    if let Some(ex) = &exact {
        let reference = ScalarField::from_expr(grid.clone(), ex)?;
        let err =
            (0..grid.len()).filter(|&i| grid.is_active(i)).map(|i| (u.at(i) - reference.at(i)).abs()).fold(0.0f64, f64::max);
        out.line("max_error", err);
        out.line("max_error_over_h2", err / (grid.h() * grid.h()));
    }
    out.section(format!("[convergence]\n{report}"));
    let converged = report.converged;
    out.finish()?;
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}
