//! Command-line front end for the gft crate: estimates disparity matrices,
//! routes training orders through the disparity graph, trains models along
//! the routed paths, and runs the bundled two-source simulation. Every
//! artifact embeds the fully resolved configuration and all seeds; identical
//! config and data produce byte-identical output sets.

mod commands;
mod config;
mod pipeline;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "gft",
    version,
    about = "Gradual fine-tuning across source domains: distances, routing, training, simulation"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Estimate the pairwise disparity matrix; write it as CSV and JSON.
    Distances,
    /// Route a training order through the disparity graph.
    Route,
    /// Train along the routed path and both baselines; report accuracies.
    Train,
    /// Run the bundled two-source comparison scenario.
    Simulate,
    /// Train on every suffix of the routed path.
    Ablate,
}

/// A failed invocation: either a usage problem diagnosed by the CLI itself
/// or a library error, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Lib(gft::Error),
}

impl CmdError {
    /// 2 input error, 3 routing infeasible, 4 evaluation impossible,
    /// 1 internal error.
    fn code(&self) -> u8 {
        use gft::Error::*;
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Lib(err) => match err {
                Io { .. }
                | MalformedRow { .. }
                | DimensionMismatch { .. }
                | InvalidLabel { .. }
                | InvalidArgument(_)
                | NotPositiveDefinite
                | NonFiniteCost { .. }
                | MissingSize(_)
                | UnknownDomain(_) => 2,
                NearestNeighborDeadEnd { .. } | NoCandidatePaths | ExhaustiveSearchTooLarge { .. } => 3,
                Unlabeled { .. } | EmptyEvaluation | PathTooSmall(_) => 4,
                WeightSum { .. }
                | UnequalCloudSizes { .. }
                | ExactSolverTooLarge { .. }
                | NanLoss { .. }
                | Serialization(_) => 1,
            },
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(msg) => write!(f, "{msg}"),
            CmdError::Lib(err) => write!(f, "{err}"),
        }
    }
}

impl From<gft::Error> for CmdError {
    fn from(err: gft::Error) -> Self {
        CmdError::Lib(err)
    }
}

/// Applies the `GFT_ROUTER_THREADS` cap to the global thread pool before
/// any parallel work runs. Unset or empty keeps the default parallelism.
fn init_thread_pool() -> Result<(), CmdError> {
    let Ok(raw) = std::env::var("GFT_ROUTER_THREADS") else {
        return Ok(());
    };
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(());
    }
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CmdError::Usage(format!(
                "GFT_ROUTER_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|err| CmdError::Usage(format!("failed to apply GFT_ROUTER_THREADS: {err}")))
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    init_thread_pool()?;
    let config = config::resolve(&cli.overrides)?;
    match cli.command {
        Command::Distances => commands::distances(&config),
        Command::Route => commands::route(&config),
        Command::Train => commands::train(&config),
        Command::Simulate => commands::simulate(&config),
        Command::Ablate => commands::ablate(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}
