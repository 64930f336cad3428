use anyhow::{bail, Result};
use clap::Subcommand;
use varreg::hedgehog::{
    clifford_distance, cloud_from_points, elliptic_solvability_check, four_d_example, hessian_spectrum,
    normal_correspondence_check, radial_homogeneous_solution, sphere_samples, zero_homogeneous_counterexample,
};
use varreg::io::{field_to_string, ScatterPlot};
use varreg::ProbeReport;

use crate::output::Output;
use crate::{Common, Outcome};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// The four-dimensional one-homogeneous example and its hedgehog.
    Fourd {
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Samples closer than this to the Clifford torus are dropped.
        #[arg(long, default_value_t = 0.05)]
        band: f64,
        /// Gradient coordinates shown in the plot, 1-based.
        #[arg(long, default_value = "1,3")]
        axes: String,
        /// Eigenvalue ratio cap for the elliptic solvability check.
        #[arg(long, default_value_t = 1e3)]
        ratio_cap: f64,
        #[command(flatten)]
        common: Common,
    },
    /// u = |x|^α g(x/|x|) solving a radially anisotropic equation.
    Radial {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// x₃/|x| on a 3D ball grid.
    Zerohom {
        #[arg(long, default_value_t = 65)]
        res: usize,
        #[command(flatten)]
        common: Common,
    },
}

pub fn run(a: Args) -> Result<Outcome> {
    match a.command {
        Cmd::Fourd { samples, band, axes, ratio_cap, common } => fourd(samples, band, &axes, ratio_cap, &common)?,
        Cmd::Radial { alpha, k, n, common } => {
            let sol = radial_homogeneous_solution(alpha, k, n)?;
            let mut out = Output::create(&common.out)?;
            out.line("function", sol.function.label());
            out.line("mu", sol.mu);
            out.line("lambda_g", sol.lambda_g);
            out.section(sol.report);
            out.finish()?;
        }
        Cmd::Zerohom { res, common } => {
            let (v, report) = zero_homogeneous_counterexample(res)?;
            let mut out = Output::create(&common.out)?;
            out.write("v.csv", &field_to_string(&v))?;
            out.section(report);
            out.finish()?;
        }
    }
    Ok(Outcome::Done)
}

fn fourd(samples: usize, band: f64, axes: &str, ratio_cap: f64, common: &Common) -> Result<()> {
    let ax: Vec<usize> = axes.split(',').map(|s| s.trim().parse::<usize>()).collect::<std::result::Result<_, _>>()?;
    if ax.len() != 2 || ax.iter().any(|&i| !(1..=4).contains(&i)) {
        bail!("--axes takes two indices in 1..=4, got {axes}");
    }
    if !(band >= 0.0) {
        bail!("--band must be non-negative");
    }
    let u = four_d_example();
    let all = sphere_samples(4, samples, common.seed);

    // u(tx) = t u(x) at dyadic t is exact in floating point.
    let mut exact = 0usize;
    for x in &all {
        let ux = u.value(x)?;
        let ok = [0.5, 2.0, 4.0].iter().all(|&t| {
            let tx: Vec<f64> = x.iter().map(|c| t * c).collect();
            u.value(&tx).is_ok_and(|v| v == t * ux)
        });
        exact += ok as usize;
    }
    let homogeneity = ProbeReport::new("homogeneity")
        .with("samples", all.len() as f64)
        .with("exact", exact as f64)
        .decide(exact as f64 - all.len() as f64);

    let away: Vec<Vec<f64>> = all.into_iter().filter(|x| clifford_distance(x) > band).collect();
    let cloud = cloud_from_points(&u, away.clone())?;
    let spectrum = hessian_spectrum(&u, &[1.0, 0.0, 0.0, 0.0])?;

    let mut out = Output::create(&common.out)?;
    out.write("tables/hedgehog.csv", &cloud.to_table().to_csv())?;
    let (i, j) = (ax[0] - 1, ax[1] - 1);
    let mut points = Vec::new();
    let mut highlighted = Vec::new();
    for (p, s) in cloud.images.iter().zip(&cloud.singular) {
        if *s { &mut highlighted } else { &mut points }.push([p[i], p[j]]);
    }
    let plot = ScatterPlot {
        title: "hedgehog of the 4D example".into(),
        x_label: format!("p{}", ax[0]),
        y_label: format!("p{}", ax[1]),
        points,
        highlighted,
        overlays: Vec::new(),
    };
    out.write("plots/hedgehog.svg", &plot.to_svg())?;

    out.line("function", u.label());
    out.line("samples", samples);
    out.line("band", band);
    out.line("kept", away.len());
    out.line("seed", common.seed);
    out.line("spectrum_e1", spectrum.iter().map(|l| format!("{l:.6}")).collect::<Vec<_>>().join(","));
    out.section(homogeneity);
    out.section(normal_correspondence_check(&cloud)?);
    out.section(elliptic_solvability_check(&u, &away, ratio_cap)?);
    out.finish()
}
