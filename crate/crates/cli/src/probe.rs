use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use varreg::field::gradient;
use varreg::io::{load_field, Overlay, ScatterPlot, Table};
use varreg::lagrangian::ellipticity_bounds;
use varreg::probe::{
    caccioppoli_audit, chop_circle, chop_halfplane, courant_lebesgue_check, energy_decay, gradient_cloud, harnack_ratio,
    holder_fit, l2_linf_check, max_principle_check, oscillation,
};
use varreg::{GradientRegion, ProbeReport};

use crate::output::Output;
use crate::solve::lagrangian;
use crate::{parse_list, parse_radii, Common, Outcome};

#[derive(clap::Args)]
pub struct Args {
    /// Field file written by `solve`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Ball centre, comma separated; defaults to the origin.
    #[arg(long)]
    center: Option<String>,
    /// `dyadic:K` or a comma list.
    #[arg(long, default_value = "dyadic:5")]
    radii: String,
    #[arg(long)]
    osc: bool,
    #[arg(long)]
    holder: bool,
    #[arg(long)]
    caccioppoli: bool,
    #[arg(long, default_value_t = 0.25)]
    r_in: f64,
    #[arg(long, default_value_t = 0.5)]
    r_out: f64,
    /// Integrand whose ellipticity window the Caccioppoli audit uses.
    #[arg(long, default_value = "quadratic")]
    lagrangian: String,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "courant-lebesgue")]
    courant_lebesgue: bool,
    /// Circle radius for the Courant–Lebesgue check.
    #[arg(long, default_value_t = 0.125)]
    cl_r: f64,
    #[arg(long)]
    maxprinciple: bool,
    #[arg(long)]
    l2linf: bool,
    #[arg(long, default_value_t = 10.0)]
    cap: f64,
    #[arg(long)]
    harnack: bool,
    #[arg(long = "energy-decay")]
    energy_decay: bool,
    /// Exponents k of the radii 2^-k.
    #[arg(long, default_value = "1,2,3,4")]
    ks: String,
    #[arg(long)]
    cloud: bool,
    /// Radius of the ball the gradient cloud is taken over.
    #[arg(long, default_value_t = 0.25)]
    r: f64,
    /// `e1,e2,a`: classify the cloud against the line p·e = a.
    #[arg(long)]
    chop_line: Option<String>,
    /// Width of the strip that still counts as below the line.
    #[arg(long, default_value_t = 0.01)]
    gap: f64,
    /// `q1,q2,r_in,r_out`: classify the cloud against an annulus.
    #[arg(long)]
    chop_circle: Option<String>,
    #[command(flatten)]
    common: Common,
}

pub fn run(a: Args) -> Result<Outcome> {
    let v = load_field(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let grid = v.grid().clone();
    let dim = grid.dim();
    let center = match &a.center {
        Some(s) => parse_list(s)?,
        None => vec![0.0; dim],
    };
    if center.len() != dim {
        bail!("--center has {} coordinates, field is {dim}-dimensional", center.len());
    }
    let radii = parse_radii(&a.radii)?;
    let mut out = Output::create(&a.common.out)?;
    out.line("input", a.input.display());
    out.line("dim", dim);
    out.line("res", grid.res());
    out.line("mask", grid.mask().name());
    out.section("");

    if a.osc {
        let block = (|| -> Result<String> {
            let mut t = Table::new(&["r", "osc"]);
            for &r in &radii {
                t.push_numbers(&[r, oscillation(&v, &center, r)?]);
            }
            out.write("tables/osc.csv", &t.to_csv())?;
            Ok(format!("[osc]\nrows={}", radii.len()))
        })();
        emit(&mut out, "osc", block);
    }
    if a.holder {
        emit(&mut out, "holder", holder_fit(&v, &center, &radii).map(|f| f.to_report().to_string()).map_err(Into::into));
    }
    if a.caccioppoli {
        let block = (|| -> Result<String> {
            let f = lagrangian(&a.lagrangian, dim, a.p, None, None, None)?;
            let slope =
                gradient(&v).norm_squared().values().iter().filter(|x| x.is_finite()).fold(0.0f64, |m, x| m.max(x.sqrt()));
            let window = ellipticity_bounds(&f, &GradientRegion::cube(dim, slope.max(1e-3)), 256, a.common.seed)?;
            Ok(caccioppoli_audit(&window, &v, a.r_in, a.r_out)?.to_string())
        })();
        emit(&mut out, "caccioppoli", block);
    }
    if a.courant_lebesgue {
        emit(&mut out, "courant_lebesgue", report(courant_lebesgue_check(&v, a.cl_r)));
    }
    if a.maxprinciple {
        let balls: Vec<(Vec<f64>, f64)> = radii.iter().map(|&r| (center.clone(), r)).collect();
        emit(&mut out, "max_principle", report(max_principle_check(&v, &balls)));
    }
    if a.l2linf {
        emit(&mut out, "l2_linf", report(l2_linf_check(&v, a.cap)));
    }
    if a.harnack {
        emit(&mut out, "harnack", harnack_ratio(&v).map(|r| format!("[harnack]\nratio={r}")).map_err(Into::into));
    }
    if a.energy_decay {
        let block = (|| -> Result<String> {
            let ks: Vec<u32> = a.ks.split(',').map(|k| k.trim().parse()).collect::<std::result::Result<_, _>>()?;
            let d = energy_decay(&v, &ks)?;
            let mut t = Table::new(&["r", "energy"]);
            for (r, e) in d.radii.iter().zip(&d.energies) {
                t.push_numbers(&[*r, *e]);
            }
            out.write("tables/energy_decay.csv", &t.to_csv())?;
            let mut rep = ProbeReport::new("energy_decay").with("exponent", d.exponent).with("alpha", d.exponent / 2.0);
            if d.constant {
                rep.note("constant");
            }
            Ok(rep.to_string())
        })();
        emit(&mut out, "energy_decay", block);
    }
    if a.cloud || a.chop_line.is_some() || a.chop_circle.is_some() {
        let block = cloud(&a, &v, &center, &out);
        emit(&mut out, "cloud", block);
    }
    out.finish()?;
    Ok(Outcome::Done)
}

fn report(r: varreg::Result<ProbeReport>) -> Result<String> {
    Ok(r?.to_string())
}

/// A probe that cannot run on this field leaves an `error=` block instead of
/// aborting the others.
fn emit(out: &mut Output, name: &str, block: Result<String>) {
    match block {
        Ok(b) => out.section(b),
        Err(e) => out.section(format!("[{name}]\nerror={e:#}")),
    }
}

fn cloud(a: &Args, v: &varreg::ScalarField, center: &[f64], out: &Output) -> Result<String> {
    let c = gradient_cloud(v, center, a.r)?;
    let dim = center.len();
    let cols: Vec<String> = (1..=dim).map(|i| format!("p{i}")).collect();
    let mut t = Table::new(&cols);
    for p in &c.points {
        t.push_numbers(p);
    }
    out.write("tables/cloud.csv", &t.to_csv())?;
    let mut rep = ProbeReport::new("cloud").with("points", c.points.len() as f64).with("diameter", c.diameter).with("r", c.r);
    let mut overlays = Vec::new();
    if let Some(s) = &a.chop_line {
        let l = parse_list(s)?;
        if l.len() != dim + 1 {
            bail!("--chop-line needs {} numbers", dim + 1);
        }
        let class = chop_halfplane(&c, &l[..dim], l[dim], a.gap)?;
        rep.note(format!("chop_line={class}"));
        if dim == 2 {
            overlays.push(Overlay::Line { normal: [l[0], l[1]], offset: l[2] });
        }
    }
    if let Some(s) = &a.chop_circle {
        let l = parse_list(s)?;
        if l.len() != dim + 2 {
            bail!("--chop-circle needs {} numbers", dim + 2);
        }
        let class = chop_circle(&c, &l[..dim], l[dim], l[dim + 1])?;
        rep.note(format!("chop_circle={class}"));
        if dim == 2 {
            for r in [l[2], l[3]] {
                overlays.push(Overlay::Circle { center: [l[0], l[1]], radius: r });
            }
        }
    }
    if dim >= 2 {
        let plot = ScatterPlot {
            title: format!("gradient image of B_{}", a.r),
            x_label: "p1".into(),
            y_label: "p2".into(),
            points: c.points.iter().map(|p| [p[0], p[1]]).collect(),
            highlighted: Vec::new(),
            overlays,
        };
        out.write("plots/cloud.svg", &plot.to_svg())?;
    }
    Ok(rep.to_string())
}
