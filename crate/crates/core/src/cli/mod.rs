//! The `twinbeam` command-line tool. Commands are plain functions so they
//! can be driven from tests as well as from `main`.

mod commands;
mod scan;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    calibrate_stacks, calibration_report, calibration_table, cmd_calibrate, cmd_center,
    cmd_center_stores, cmd_coherence, cmd_simulate, coherence_from_stack, point_arithmetic,
    CalibrateOutput, CenterOutput, CoherenceOutput, Report, SimulateOutput,
};
pub use scan::{simulate_axis_scan, simulate_double_scan, AxisScan, ScanPass};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::io::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Twin-beam CCD quantum-efficiency calibration"
)]
pub struct Cli {
    /// Run every loop on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a frame store (and optionally a background store).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        background: Option<PathBuf>,
    },
    /// Correlation map and coherence radius of an unbinned store.
    Coherence {
        #[arg(long)]
        store: PathBuf,
        /// Defaults to the store's sidecar.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Centering scan: simulated from a config, or fitted over stores.
    Center(CenterArgs),
    /// Efficiency from nested region sizes, or from supplied numbers.
    Calibrate(CalibrateArgs),
    /// List configuration keys.
    Keys,
}

#[derive(Debug, Args)]
pub struct CenterArgs {
    /// Simulate an x-then-y scan from this config.
    #[arg(long, conflicts_with = "store")]
    pub config: Option<PathBuf>,
    /// `DISPLACEMENT_UM=PATH`, repeated once per scan position.
    #[arg(long, value_parser = parse_scan_store, allow_hyphen_values = true)]
    pub store: Vec<(f64, PathBuf)>,
    /// Config for store scans; defaults to the first store's sidecar.
    #[arg(long, requires = "store")]
    pub store_config: Option<PathBuf>,
    /// CSV for a store scan, or the x-scan CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// y-scan CSV for simulated scans.
    #[arg(long)]
    pub out_y: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, requires_all = ["background", "out"])]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Direct mode (no stores): balancing factor.
    #[arg(long, conflicts_with = "store", requires_all = ["sigma", "a_coeff"])]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub a_coeff: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub u_alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub u_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub u_a: f64,
}

fn parse_scan_store(s: &str) -> std::result::Result<(f64, PathBuf), String> {
    let (d, p) = s
        .split_once('=')
        .ok_or_else(|| format!("expected DISPLACEMENT_UM=PATH, got `{s}`"))?;
    let d: f64 = d
        .trim()
        .parse()
        .map_err(|e| format!("displacement `{d}`: {e}"))?;
    Ok((d, PathBuf::from(p)))
}

/// Runs a parsed command and returns its stdout text.
pub fn run(cli: Cli) -> Result<String> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match cli.command {
        Command::Simulate {
            config,
            out,
            background,
        } => {
            let config = ExperimentConfig::from_file(&config)?;
            Ok(cmd_simulate(&config, &out, background.as_deref(), exec)?
                .report
                .render())
        }
        Command::Coherence { store, config, out } => {
            Ok(cmd_coherence(&store, config.as_deref(), &out, exec)?
                .report
                .render())
        }
        Command::Center(a) => {
            if let Some(cfg) = a.config {
                let out_y = a
                    .out_y
                    .ok_or_else(|| Error::invalid("out-y", "required for a simulated scan"))?;
                let config = ExperimentConfig::from_file(&cfg)?;
                Ok(cmd_center(&config, &a.out, &out_y, exec)?.report.render())
            } else {
                Ok(
                    cmd_center_stores(&a.store, a.store_config.as_deref(), &a.out)?
                        .1
                        .render(),
                )
            }
        }
        Command::Calibrate(a) => {
            if let (Some(alpha), Some(sigma), Some(ac)) = (a.alpha, a.sigma, a.a_coeff) {
                return Ok(
                    point_arithmetic(alpha, a.u_alpha, sigma, a.u_sigma, ac, a.u_a)?.render(),
                );
            }
            match (a.store, a.background, a.out) {
                (Some(s), Some(b), Some(o)) => {
                    Ok(cmd_calibrate(&s, &b, a.config.as_deref(), &o, exec)?
                        .report
                        .render())
                }
                _ => Err(Error::invalid(
                    "calibrate",
                    "give --store, --background and --out, or --alpha, --sigma and --a-coeff",
                )),
            }
        }
        Command::Keys => Ok(ExperimentConfig::key_reference()),
    }
}

/// The single machine-parsable line printed for a failed command.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ").replace('"', "'");
    format!(
        "error kind={} code={} msg=\"{msg}\"",
        e.kind(),
        e.exit_code()
    )
}
