//! `thbch`: batch front end of the adaptive Cahn-Hilliard solver.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use thbch::driver::{self, compare_runs, SimulationConfig};
use thbch::{check_admissible, HierarchicalMesh, HierarchicalSpace, Simulation};

#[derive(Parser)]
#[command(name = "thbch", version, about = "Adaptive THB-spline Cahn-Hilliard solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write only the initial condition (manifest and snapshot 0).
    Project {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Relative L2 error of a run against a reference run per snapshot.
    Compare { run_dir: PathBuf, ref_dir: PathBuf },
    /// Check admissibility of a mesh dump.
    CheckMesh {
        dump: PathBuf,
        /// Admissibility class; defaults to the degree in the dump.
        #[arg(long)]
        mu: Option<usize>,
    },
}

fn load(config: &PathBuf, output: Option<PathBuf>) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::from_file(config)
        .with_context(|| format!("loading configuration {}", config.display()))?;
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, output } => {
            let cfg = load(&config, output)?;
            let dir = cfg.output_dir.clone();
            let summary = driver::run(cfg, Some(&dir)).context("simulation failed")?;
            let last = summary.records.last();
            println!(
                "completed {} steps; final dofs {}, energy {:.6e}; outputs in {}",
                summary.records.len(),
                summary.simulation.space().num_functions(),
                last.map_or(summary.simulation.energy(), |r| r.energy),
                dir.display()
            );
        }
        Command::Project { config, output } => {
            let cfg = load(&config, output)?;
            let dir = cfg.output_dir.clone();
            let sim = Simulation::new(cfg)?;
            driver::write_outputs(&dir, &sim, &[])?;
            println!(
                "initial condition with {} dofs written to {}",
                sim.space().num_functions(),
                dir.display()
            );
        }
        Command::Compare { run_dir, ref_dir } => {
            let rows = compare_runs(&run_dir, &ref_dir)?;
            if rows.is_empty() {
                bail!("no common snapshots between {} and {}", run_dir.display(), ref_dir.display());
            }
            println!("step,time,error");
            for (step, time, err) in rows {
                println!("{step},{time:.10e},{err:.10e}");
            }
        }
        Command::CheckMesh { dump, mu } => {
            let text = std::fs::read_to_string(&dump).with_context(|| format!("reading {}", dump.display()))?;
            let mesh = HierarchicalMesh::from_dump(&text)?;
            let mu = mu.unwrap_or(mesh.degree());
            let space = HierarchicalSpace::new(mesh, true)?;
            let report = check_admissible(&space, mu);
            if report.admissible {
                println!(
                    "admissible (mu = {mu}): {} active cells, {} functions",
                    space.cells().len(),
                    space.num_functions()
                );
            } else {
                println!("not admissible (mu = {mu}); offending cells (level i j: min..max function level):");
                for (c, lo, hi) in &report.offending {
                    println!("{} {} {}: {lo}..{hi}", c.level, c.i, c.j);
                }
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
