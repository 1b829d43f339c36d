use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use cac_cli::pipeline::{self, SCAN_WARNING};
use cac_cli::RunConfig;
use clap::{Parser, Subcommand};

/// Casimir forces by stress-tensor integration along complex-frequency contours.
#[derive(Parser)]
#[command(name = "cac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; omitted sections take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory [default: config `output`, else ./out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads. Results are identical for any value.
    #[arg(long, global = true, env = "CAC_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,

    /// Grid resolution(s) per unit separation; two values enable Richardson extrapolation.
    #[arg(long, global = true, value_delimiter = ',', value_name = "R[,R2]")]
    resolution: Option<Vec<usize>>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Integrate the force for each configured contour and resolution.
    Force,
    /// Physicality of the equivalent media behind the contours.
    ContourTable,
    /// Coarse map of dF/dω over the complex frequency plane.
    OmegaScan,
    /// Bandwidth report, antenna plan and synthetic S-matrix for the fluid experiment.
    ExperimentPlan,
    /// Run the oracle suite.
    Oracles,
}

fn single(r: &[usize], what: &str) -> Result<usize> {
    match r {
        [one] => Ok(*one),
        _ => bail!("{what} takes a single --resolution, got {r:?}"),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(r) = &cli.resolution {
        match cli.command {
            Command::Force => config.resolutions = r.clone(),
            Command::OmegaScan => config.scan.resolution = single(r, "omega-scan")?,
            Command::ExperimentPlan => config.experiment.resolution = single(r, "experiment-plan")?,
            Command::ContourTable | Command::Oracles => {}
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let jobs = cli.jobs.map(|j| j as usize).or(config.jobs);

    pipeline::with_jobs(jobs, || -> Result<ExitCode> {
        match cli.command {
            Command::Force => {
                let report = pipeline::run_force(&config, &out)?;
                for c in &report.contours {
                    for r in &c.runs {
                        println!(
                            "{:<28} R={:<4} F_x = {:.6}  tail = {:.2e}  nodes = {}  converged = {}",
                            c.contour,
                            r.resolution,
                            r.result.force,
                            r.result.tail,
                            r.result.node_count(),
                            r.result.converged
                        );
                    }
                    if let Some(x) = &c.extrapolated {
                        println!("{:<28} Richardson {:?}: F_x = {:.6}", c.contour, x.resolutions, x.force);
                    }
                }
                if !report.converged() {
                    for line in report.diagnostics() {
                        eprintln!("not converged: {line}");
                    }
                    return Ok(ExitCode::from(2));
                }
            }
            Command::ContourTable => {
                for r in pipeline::run_contour_table(&config, &out)? {
                    println!("{:<44} physical = {:?}  {}", r.contour, r.physical, r.witness);
                }
            }
            Command::OmegaScan => {
                eprintln!("warning: {SCAN_WARNING}");
                let points = pipeline::run_omega_scan(&config, &out)?;
                let failed = points.iter().filter(|p| p.status.starts_with("failed")).count();
                println!("{} points, {} failed", points.len(), failed);
            }
            Command::ExperimentPlan => {
                let r = pipeline::run_experiment_plan(&config, &out)?;
                println!(
                    "F = {:.4e} N/m; xi_{:.0} = {:.3} GHz; {} antennas x {} orientations",
                    r.force_per_length_si,
                    100.0 * r.fraction,
                    r.xi_fraction_hz / 1e9,
                    r.antenna_positions,
                    r.orientations
                );
                for n in &r.notes {
                    println!("note: {n}");
                }
            }
            Command::Oracles => {
                let reports = pipeline::run_oracles(&config, &out)?;
                let mut ok = true;
                for r in &reports {
                    println!(
                        "{} {:<60} err = {:.2e} (tol {:.0e})",
                        if r.pass { "PASS" } else { "FAIL" },
                        r.quantity,
                        r.rel_error,
                        r.tolerance
                    );
                    ok &= r.pass;
                }
                if !ok {
                    return Ok(ExitCode::from(3));
                }
            }
        }
        Ok(ExitCode::SUCCESS)
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
