//! Command-line front end: config parsing, subcommands and exit codes.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::CommandOutput;
use crate::config::{load_config, parse_list, validate_run_id};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "boostbif", version, about = "Bifurcation analysis of PWM-controlled boost converters")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Prefix for output files (overrides `[output] run_id`).
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Worker threads for the sweep seeding pass; 1 runs serially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Averaged-model critical conditions.
    Analyze,
    /// Coexisting operating points at one reference.
    Steady {
        #[arg(long)]
        vr: Option<f64>,
    },
    /// Cycle-by-cycle simulation of the switched model.
    Simulate {
        #[arg(long)]
        vr: Option<f64>,
        #[arg(long)]
        cycles: Option<usize>,
        /// Initial state, comma separated, one value per state.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
    /// Periodic-orbit continuation over the reference and bifurcation location.
    Sweep {
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Averaged pole loci over the duty ratio.
    Poles {
        #[arg(long)]
        d_from: Option<f64>,
        #[arg(long)]
        d_to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn required(v: Option<f64>, key: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::validation(key, "not given on the command line or in the config"))
}

/// Loads the config, applies overrides and runs the subcommand.
pub fn run(cli: Cli) -> Result<CommandOutput, CliError> {
    let path = cli.config.ok_or_else(|| CliError::validation("config", "--config is required"))?;
    let mut cfg = load_config(&path)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(id) = cli.run_id {
        validate_run_id(&id)?;
        cfg.run_id = id;
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::validation("jobs", "must be at least 1"));
        }
        cfg.solver.jobs = j;
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;

    match cli.command {
        Command::Analyze => commands::analyze(&cfg),
        Command::Steady { vr } => {
            let v_r = required(vr.or(cfg.steady.v_r), "vr")?;
            commands::steady(&cfg, v_r)
        }
        Command::Simulate { vr, cycles, x0 } => {
            let v_r = required(vr.or(cfg.simulate.v_r), "vr")?;
            let x0 = match x0 {
                Some(s) => Some(parse_list(&s).map_err(|m| CliError::validation("x0", m))?),
                None => cfg.simulate.x0.clone(),
            };
            let cycles = cycles.unwrap_or(cfg.simulate.cycles);
            if cycles == 0 {
                return Err(CliError::validation("cycles", "must be at least 1"));
            }
            commands::simulate(&cfg, v_r, cycles, x0)
        }
        Command::Sweep { from, to, points } => {
            let (f, t, n) = (from.unwrap_or(cfg.sweep.from), to.unwrap_or(cfg.sweep.to), points.unwrap_or(cfg.sweep.points));
            commands::run_sweep(&cfg, f, t, n)
        }
        Command::Poles { d_from, d_to, points } => {
            let (f, t, n) = (
                d_from.unwrap_or(cfg.poles.d_from),
                d_to.unwrap_or(cfg.poles.d_to),
                points.unwrap_or(cfg.poles.points),
            );
            commands::poles(&cfg, f, t, n)
        }
    }
}
