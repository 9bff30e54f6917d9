//! Command-line front end for `xcposc`.
//!
//! Exit codes: 0 when the requested check passes, 2 when it runs but fails,
//! 1 on any error.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;
pub mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use xcposc::sim::Classification;

use crate::config::DesignConfig;
use crate::output::sibling;

#[derive(Debug, Parser)]
#[command(name = "xcposc", version, about = "Design and verify cross-coupled-pair oscillation controllers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Design configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Print a JSON summary on stdout.
    #[arg(long)]
    pub json: bool,
    /// Print the parsed configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dominance, equilibria and instability checks; JSON report on stdout.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Simulate even when the config has no sim block.
        #[arg(long)]
        simulate: bool,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the shifted inverse-loop curve and the disk boundary.
    Nyquist {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Disk boundary CSV; defaults to `<out>.disk.csv`.
        #[arg(long)]
        disk_out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Export the positive-feedback root locus.
    Rootlocus {
        #[command(flatten)]
        common: Common,
        /// Largest gain; defaults to 2/G(0), or 10 K when G(0) = 0.
        #[arg(long)]
        kmax: Option<f64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Simulate the closed loop; metrics JSON on stdout.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Analyze once per value of a numeric config parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path such as `xcp.I`, `controller.r` or `controller.inv_rc`.
        #[arg(long)]
        param: String,
        /// `start:stop:step`, stop included.
        #[arg(long)]
        range: String,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Analyze { common, .. }
            | Command::Nyquist { common, .. }
            | Command::Rootlocus { common, .. }
            | Command::Simulate { common, .. }
            | Command::Sweep { common, .. } => common,
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn pass_code(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let common = cli.command.common();
    let config = DesignConfig::load(&common.config)?;
    if common.dump_config {
        emit(&config.to_json())?;
        return Ok(ExitCode::SUCCESS);
    }
    let json = common.json;

    match &cli.command {
        Command::Analyze { simulate, out, .. } => {
            let design = config.build()?;
            let report = report::analyze(&design, *simulate)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(out) = out {
                output::write_atomic(out, format!("{text}\n").as_bytes())?;
            }
            emit(&text)?;
            Ok(pass_code(report.verdict.oscillation_certified))
        }
        Command::Nyquist { out, disk_out, svg, .. } => {
            let design = config.build()?;
            let disk_out = disk_out.clone().unwrap_or_else(|| sibling(out, "disk"));
            let summary = commands::nyquist(&design, out, &disk_out, svg.as_deref())?;
            if json {
                print_json(&summary)?;
            } else {
                emit(&format!(
                    "{} samples, winding {}, disk margin {:.6} (K = {:.4})",
                    summary.samples, summary.winding, summary.margin, summary.k
                ))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Rootlocus { kmax, steps, out, svg, .. } => {
            let design = config.build()?;
            let locus = commands::rootlocus(&design, *kmax, *steps, out, svg.as_deref())?;
            if json {
                print_json(&locus)?;
            } else {
                emit(&format!(
                    "{} gains up to {}",
                    locus.gains.len(),
                    locus.gains.last().copied().unwrap_or(0.0)
                ))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { out, svg, .. } => {
            let design = config.build()?;
            let run = commands::simulation(&design, out.as_deref(), svg.as_deref())?;
            print_json(&run.metrics)?;
            Ok(pass_code(run.metrics.classification == Classification::LimitCycle))
        }
        Command::Sweep { param, range, out, .. } => {
            let rows = commands::sweep(&config, param, range, out)?;
            if json {
                print_json(&rows)?;
            } else {
                let passing = rows.iter().filter(|r| r.certified).count();
                emit(&format!("{passing} of {} values certified", rows.len()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
