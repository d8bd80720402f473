//! Experiment runner for the black soliton laboratory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Check;
use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "blacksol", version, about = "Black soliton stability experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config; defaults apply to anything missing.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Half width L of the domain [-L, L].
    #[arg(long = "grid.L", global = true)]
    pub grid_l: Option<f64>,
    /// Number of grid nodes.
    #[arg(long = "grid.N", global = true)]
    pub grid_n: Option<usize>,
    /// Window radius of the local distance.
    #[arg(long = "R", global = true)]
    pub radius: Option<f64>,
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Identity and property checks over seeded ensembles.
    VerifyLemmas,
    /// Lowest eigenpairs of K+ and K-.
    Spectrum {
        /// Repeat over the configured half widths.
        #[arg(long)]
        sweep: bool,
    },
    /// Perturb, evolve and track over the delta ladder.
    Stability,
    /// gap / d_R^2 over a seeded ensemble.
    Coercivity {
        /// Skip the projections and push samples along u0' (negative control).
        #[arg(long)]
        no_orthogonality: bool,
    },
    /// Plain evolution with observer dumps.
    Simulate,
}

impl Cli {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            half_width: self.grid_l,
            points: self.grid_n,
            radius: self.radius,
        });
        match self.command {
            Command::Spectrum { sweep: true } => config.spectrum.sweep = true,
            Command::Coercivity { no_orthogonality: true } => config.coercivity.orthogonality = false,
            _ => {}
        }
        config.validate()?;
        Ok(config)
    }
}

fn report(name: &str, checks: &[Check], quiet: bool) -> u8 {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}/{}", c.group, c.name))
        .collect();
    if failed.is_empty() {
        if !quiet {
            println!("{name}: all {} checks passed", checks.len());
        }
        0
    } else {
        eprintln!("{name}: failed checks: {}", failed.join(", "));
        1
    }
}

/// Runs one parsed invocation and returns the process exit code.
pub fn execute(cli: &Cli) -> u8 {
    let outcome = cli.resolve().and_then(|config| {
        let code = match cli.command {
            Command::VerifyLemmas => report("verify-lemmas", &commands::verify::run(&config)?.checks, cli.quiet),
            Command::Spectrum { .. } => report("spectrum", &commands::spectrum::run(&config)?.checks, cli.quiet),
            Command::Stability => report("stability", &commands::stability::run(&config)?.checks, cli.quiet),
            Command::Coercivity { .. } => report("coercivity", &commands::coercivity::run(&config)?.checks, cli.quiet),
            Command::Simulate => {
                let s = commands::simulate::run(&config)?;
                if !cli.quiet {
                    println!("simulate: {} steps, {} stamps", s.steps, s.stamps);
                }
                0
            }
        };
        if !cli.quiet {
            println!("outputs in {}", config.output_dir.display());
        }
        Ok(code)
    });
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
