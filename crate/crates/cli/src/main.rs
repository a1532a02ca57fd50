mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Context, Overrides, Suite};

/// Position-auction experiments: run mechanisms, tabulate equilibrium bids,
/// verify equilibrium identities and simulate revenue.
#[derive(Debug, Parser)]
#[command(name = "posauc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured mechanism on explicit values and bids.
    Run(Common),
    /// Build and write the equilibrium bid table.
    Tabulate(Common),
    /// Run a verification suite; exits nonzero when it fails.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Paired Monte Carlo revenue of first-price equilibrium bids and truthful VCG.
    Simulate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo rounds; overrides `samples`.
    #[arg(long)]
    samples: Option<usize>,
    /// Bid-table points for tabulate/simulate, valuation points for verify.
    #[arg(long)]
    grid: Option<usize>,
    /// Record wall-clock start and end times in summary.json.
    #[arg(long)]
    timestamps: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            samples: self.samples,
            grid: self.grid,
            timestamps: self.timestamps,
        }
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let (common, suite) = match &cli.command {
        Command::Run(c) | Command::Tabulate(c) | Command::Simulate(c) => (c, None),
        Command::Verify { suite, common } => (common, Some(*suite)),
    };
    let loaded = config::load(&common.config)?;
    let ctx = Context::new(&loaded, common.overrides());
    match cli.command {
        Command::Run(_) => {
            commands::run(&ctx)?;
        }
        Command::Tabulate(_) => {
            commands::tabulate(&ctx)?;
        }
        Command::Simulate(_) => {
            commands::simulate(&ctx)?;
        }
        Command::Verify { .. } => {
            let (_, passed) = commands::verify(&ctx, suite.expect("verify has a suite"))?;
            if !passed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
