//! Command-line front end for the consensus simulation laboratory.
//!
//! Five subcommands cover the experiment surface: `simulate` (one run plus
//! full analysis), `compare` (adaptive vs standard on the same setup),
//! `sweep` (convergence time against the reciprocal control gain), `cost`
//! (running performance cost against its guaranteed bound), and
//! `topology-info` (graph summary as JSON).
//!
//! Settings come from an optional JSON config file with flag overrides;
//! flags win. Exit codes: 0 success, 2 validation error, 3 numerical
//! failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Overrides};
use error::Result;

#[derive(Parser)]
#[command(
    name = "conlab",
    version,
    about = "Simulation and verification laboratory for adaptive guaranteed-performance consensus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol simulation with full analysis
    Simulate(RunArgs),
    /// Run adaptive and standard protocols on the same setup and compare
    Compare(RunArgs),
    /// Sweep the control gain and fit convergence time against 1/alpha
    Sweep(SweepArgs),
    /// Trace the running performance cost against its guaranteed bound
    Cost(CostArgs),
    /// Print a topology summary as JSON
    TopologyInfo(TopologyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    /// Builtin name (p2, path6, cycle6, star6, complete6, paper6) or
    /// edge-list file path
    #[arg(long)]
    topology: Option<String>,

    /// Comma-separated initial agent states
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,

    /// Control gain
    #[arg(long)]
    alpha: Option<f64>,

    /// Performance coefficient
    #[arg(long)]
    zeta: Option<f64>,

    /// Protocol mode: adaptive or standard
    #[arg(long)]
    mode: Option<String>,

    /// Integrator step size
    #[arg(long)]
    step: Option<f64>,

    /// Simulation horizon in seconds (default derived from the topology)
    #[arg(long)]
    horizon: Option<f64>,

    /// Keep every N-th integrator step in the outputs
    #[arg(long)]
    stride: Option<usize>,

    /// Consensus threshold on the largest pairwise gap
    #[arg(long)]
    eps: Option<f64>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Re-read written CSVs and verify the float round-trip
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Export every pair's weight column, not only edges
    #[arg(long)]
    all_pairs: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated control gains, at least four
    #[arg(long)]
    alphas: Option<String>,

    /// Set each member's zeta to ratio * alpha (default 0.5 unless --zeta
    /// is given)
    #[arg(long)]
    zeta_ratio: Option<f64>,
}

#[derive(Args)]
struct CostArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Evaluation horizon H for the running cost (default 3)
    #[arg(long)]
    cost_horizon: Option<f64>,
}

#[derive(Args)]
struct TopologyArgs {
    /// JSON config file naming the topology
    #[arg(long)]
    config: Option<PathBuf>,

    /// Builtin name or edge-list file path
    #[arg(long)]
    topology: Option<String>,
}

fn overrides_from(common: &CommonArgs) -> Result<Overrides> {
    Ok(Overrides {
        topology: common.topology.clone(),
        x0: common
            .x0
            .as_deref()
            .map(|s| config::parse_number_list("x0", s))
            .transpose()?,
        alpha: common.alpha,
        zeta: common.zeta,
        mode: common.mode.as_deref().map(config::parse_mode).transpose()?,
        step: common.step,
        horizon: common.horizon,
        stride: common.stride,
        eps: common.eps,
        out: common.out.clone(),
        ..Overrides::default()
    })
}

fn file_config_from(common: &CommonArgs) -> Result<FileConfig> {
    match &common.config {
        Some(path) => config::read_config_file(path),
        None => Ok(FileConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let exp = config::resolve(
                file_config_from(&args.common)?,
                overrides_from(&args.common)?,
            )?;
            commands::cmd_simulate(&exp, args.all_pairs, args.common.validate)
        }
        Command::Compare(args) => {
            let exp = config::resolve(
                file_config_from(&args.common)?,
                overrides_from(&args.common)?,
            )?;
            commands::cmd_compare(&exp, args.all_pairs, args.common.validate)
        }
        Command::Sweep(args) => {
            let mut overrides = overrides_from(&args.common)?;
            overrides.alphas = args
                .alphas
                .as_deref()
                .map(|s| config::parse_number_list("alphas", s))
                .transpose()?;
            overrides.zeta_ratio = args.zeta_ratio;
            let exp = config::resolve(file_config_from(&args.common)?, overrides)?;
            commands::cmd_sweep(&exp, args.common.validate)
        }
        Command::Cost(args) => {
            let mut overrides = overrides_from(&args.common)?;
            overrides.cost_horizon = args.cost_horizon;
            let exp = config::resolve(file_config_from(&args.common)?, overrides)?;
            commands::cmd_cost(&exp, args.common.validate)
        }
        Command::TopologyInfo(args) => {
            let file = match &args.config {
                Some(path) => config::read_config_file(path)?,
                None => FileConfig::default(),
            };
            let source = args
                .topology
                .or(file.topology)
                .unwrap_or_else(|| config::DEFAULT_TOPOLOGY.to_string());
            commands::cmd_topology_info(&source)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
