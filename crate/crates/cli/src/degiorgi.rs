use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Subcommand;
use varreg::degiorgi::{
    geometric_threshold, measure_profile, oscillation_drop, scaling_class_audit, seq_lemma_geometric, seq_lemma_quadratic,
    v_profile,
};
use varreg::io::{load_field, Table};

use crate::output::Output;
use crate::{parse_range, Common, Outcome};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Iterate a_{k+1} = C^k a_k^{1+δ} and bisect the convergence threshold.
    Seq1 {
        #[arg(long = "C")]
        c: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        a0: f64,
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Iterate a_{k+1} = a_k − c a_k² and check a_k ≤ 1/(1+ck).
    Seq2 {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[arg(long, default_value_t = 10_000)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Level-set profiles V(s), W(s) of a saved field.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        /// Heights, `a:step:b` or a comma list.
        #[arg(long, default_value = "0:0.125:1")]
        s: String,
        /// Zero-set fraction required by the oscillation-drop check.
        #[arg(long)]
        delta_frac: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Threshold a0* over a grid of (C, δ).
    Sweep {
        #[arg(long = "C", default_value = "1.5:0.5:4")]
        c: String,
        #[arg(long, default_value = "0.25:0.25:1")]
        delta: String,
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
}

pub fn run(a: Args) -> Result<Outcome> {
    match a.command {
        Cmd::Seq1 { c, delta, a0, k, common } => {
            let trace = seq_lemma_geometric(c, delta, a0, k)?;
            let mut out = Output::create(&common.out)?;
            out.write("tables/trace.csv", &trace.to_table().to_csv())?;
            out.line("verdict", trace.verdict);
            out.line("threshold_oracle", c.powf(-1.0 / (delta * delta)));
            out.section(trace.to_report());
            out.finish()?;
        }
        Cmd::Seq2 { c, a0, k, common } => {
            let trace = seq_lemma_quadratic(c, a0, k)?;
            let mut out = Output::create(&common.out)?;
            out.write("tables/trace.csv", &trace.to_table().to_csv())?;
            out.line("verdict", trace.verdict);
            out.section(trace.to_report());
            out.finish()?;
        }
        Cmd::Profile { input, s, delta_frac, common } => {
            let v = load_field(&input).with_context(|| format!("reading {}", input.display()))?;
            let heights = parse_range(&s)?;
            let vp = v_profile(&v, &heights)?;
            let wp = measure_profile(&v, &heights)?;
            let mut out = Output::create(&common.out)?;
            out.write("tables/v_profile.csv", &vp.to_table().to_csv())?;
            out.write("tables/w_profile.csv", &wp.to_table().to_csv())?;
            out.line("input", input.display());
            if let Some(c) = wp.pair_constant {
                out.line("measure_pair_constant", c);
            }
            out.section(scaling_class_audit(&vp, v.grid().dim()));
            if let Some(d) = delta_frac {
                out.section(oscillation_drop(&v, d)?);
            }
            out.finish()?;
        }
        Cmd::Sweep { c, delta, k, common } => {
            let cs = parse_range(&c)?;
            let ds = parse_range(&delta)?;
            let mut cols = vec!["C".to_string()];
            cols.extend(ds.iter().map(|d| format!("delta={d}")));
            let mut t = Table::new(&cols);
            for &ci in &cs {
                let mut row = vec![ci];
                for &di in &ds {
                    row.push(geometric_threshold(ci, di, k)?);
                }
                t.push_numbers(&row);
            }
            let mut out = Output::create(&common.out)?;
            out.write("tables/threshold.csv", &t.to_csv())?;
            out.line("rows", cs.len());
            out.line("columns", ds.len());
            out.line("k", k);
            out.finish()?;
        }
    }
    Ok(Outcome::Done)
}
