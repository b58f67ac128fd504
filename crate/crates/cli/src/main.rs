use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use markov_pide_cli::{commands, demo, init_threads, Failure, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "markov-pide",
    version,
    about = "Monte Carlo and PIDE solvers for Markov-modulated point processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the model coefficients and check the standing assumptions.
    Validate(Args),
    /// Write reference- and physical-measure trajectories.
    Simulate(Args),
    /// Monte Carlo estimates of the value function at the probes.
    Estimate(Args),
    /// Solve the backward equation on the configured grid.
    Solve(Args),
    /// Cross-check Monte Carlo against the grid solution, plus the regularity ladder.
    Compare(Args),
    /// Run the acceptance suite on the cox model and print the pass/fail table.
    Demo(DemoArgs),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DemoArgs {
    /// Only `seed` and `simulation.n_paths` are read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEMO_SEED: u64 = 42;
const DEMO_PATHS: usize = 20_000;

fn load(args: &Args) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    Overrides {
        seed: args.seed,
        out: args.out.clone(),
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Validate(a) => commands::validate(&load(&a)?),
        Command::Simulate(a) => commands::simulate(&load(&a)?),
        Command::Estimate(a) => commands::estimate(&load(&a)?),
        Command::Solve(a) => commands::solve(&load(&a)?),
        Command::Compare(a) => commands::compare(&load(&a)?),
        Command::Demo(a) => {
            let cfg = a.config.as_deref().map(RunConfig::load).transpose()?;
            let seed = a.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(DEMO_SEED);
            let n = cfg.as_ref().map_or(DEMO_PATHS, |c| c.simulation.n_paths);
            println!("acceptance suite on cox, seed {seed}, {n} paths");
            let rows = demo::run(seed, n);
            let table = demo::table(&rows);
            print!("{table}");
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("demo.txt"), &table)?;
            }
            if rows.iter().all(|r| r.pass) {
                Ok(())
            } else {
                Err(Failure::Check("demo suite has failing criteria".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
