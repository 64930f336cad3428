#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod degiorgi;
mod hedgehog;
mod output;
mod probe;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "varreg", version, about = "Minimize convex variational integrals and probe the minimizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize J(u) = ∫ F(∇u) with Dirichlet data.
    Solve(solve::Args),
    /// Run regularity probes on a saved field.
    Probe(probe::Args),
    /// Sequence lemmas, threshold sweeps and level-set profiles.
    Degiorgi(degiorgi::Args),
    /// One-homogeneous fixtures and hedgehog checks.
    Hedgehog(hedgehog::Args),
}

/// Shared by every command.
#[derive(clap::Args, Clone)]
pub struct Common {
    /// Output directory; nothing is written outside it.
    #[arg(long, default_value = "varreg-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Probe(a) => probe::run(a),
        Command::Degiorgi(a) => degiorgi::run(a),
        Command::Hedgehog(a) => hedgehog::run(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| anyhow::anyhow!("`{t}`: {e}"))).collect()
}

/// `dyadic:K` or a comma list.
pub fn parse_radii(s: &str) -> Result<Vec<f64>> {
    if let Some(k) = s.strip_prefix("dyadic:") {
        let k: usize = k.parse()?;
        if k == 0 {
            bail!("dyadic:K needs K >= 1");
        }
        return Ok(varreg::probe::dyadic_radii(k));
    }
    parse_list(s)
}

/// `a:step:b` inclusive, or a comma list.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, step, b): (f64, f64, f64) = (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
        if !(step > 0.0) || b < a {
            bail!("bad range {s}");
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    parse_list(s)
}
