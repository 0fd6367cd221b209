//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neumann_pme::harness::{run, run_sweep, ExperimentConfig, Pipeline, Report};

#[derive(Parser)]
#[command(
    name = "pmelab",
    version,
    about = "Neumann porous-media solver, particle system and verification harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Implicit finite-volume solve on the half-line.
    Pde(Common),
    /// Particle ensembles for every configured scheme.
    Particle(Common),
    /// PDE solve plus the test-function residual suite.
    Verify(Common),
    /// PDE and particles, compared snapshot by snapshot.
    Compare(Common),
    /// Direct half-line solve against the mirror route.
    RouteCheck(Common),
    /// Repeat the configured pipelines over the `[sweep]` values.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(cmd: Command) -> Result<Report, Box<dyn std::error::Error>> {
    let (common, pipelines) = match cmd {
        Command::Pde(c) => (c, Some(vec![Pipeline::Pde])),
        Command::Particle(c) => (c, Some(vec![Pipeline::Particle])),
        Command::Verify(c) => (c, Some(vec![Pipeline::Pde, Pipeline::Verify])),
        Command::Compare(c) => (
            c,
            Some(vec![Pipeline::Pde, Pipeline::Particle, Pipeline::Compare]),
        ),
        Command::RouteCheck(c) => (c, Some(vec![Pipeline::Route])),
        Command::Sweep(c) => (c, None),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.particle.seed = None;
    }
    Ok(match pipelines {
        Some(p) => {
            cfg.pipelines = p;
            run(&cfg, &common.out)?
        }
        None => run_sweep(&cfg, &common.out)?,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(report) => {
            for m in &report.metrics {
                let status = match m.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "info",
                };
                println!("{status:4}  {:<48} {:.6e}", m.name, m.value);
            }
            println!(
                "config {}  {}",
                &report.config_hash[..12],
                if report.passed {
                    "all tolerances met"
                } else {
                    "tolerance failures"
                }
            );
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
