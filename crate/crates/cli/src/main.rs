//! Command-line driver for the hard-sphere cluster gas library.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cluster_gas::config::Format;

#[derive(Parser, Debug)]
#[command(name = "cluster-gas", version, about = "Hard-sphere dynamics, cluster paths and their low-density limits")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML (or .json) run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured number of runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Worker threads (all cores when unset).
    #[arg(long, global = true, env = "CLUSTER_GAS_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write every trajectory breakpoint (`simulate`).
    #[arg(long, global = true)]
    pub dump_trajectories: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// MD runs: collision logs, cluster summaries, optional trajectories.
    Simulate,
    /// Ensemble cluster statistics and the largest-cluster sweep.
    Clusters,
    /// Cluster-expansion estimators from the `[expansion]` section.
    Expansion,
    /// DSMC run from the `[dsmc]` section.
    Dsmc,
    /// Coagulation run from the `[coagulation]` section.
    Coagulate,
    /// Cross-model acceptance pipelines and their metric table.
    Compare {
        /// Reduced ensemble sizes.
        #[arg(long)]
        quick: bool,
        /// Criterion ids to run (all when empty).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
    },
    /// Deterministic oracle suites.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cli.common),
        Command::Clusters => commands::clusters(&cli.common),
        Command::Expansion => commands::expansion(&cli.common),
        Command::Dsmc => commands::dsmc(&cli.common),
        Command::Coagulate => commands::coagulate(&cli.common),
        Command::Compare { quick, criteria } => commands::compare(&cli.common, quick, &criteria),
        Command::Validate => commands::validate(&cli.common),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
