mod compensate;
mod config;
mod estimate;
mod eval;
mod inputs;
mod segment;
mod synth;
mod table;
mod viz;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

/// Camera rotation and translation estimation from optical flow, rotation
/// compensation and moving-object segmentation.
#[derive(Debug, Parser)]
#[command(name = "rotcomp", version)]
struct Cli {
    /// TOML file with a table per subcommand holding defaults for its flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a reproducible synthetic corpus.
    Synth(synth::SynthArgs),
    /// Build a likelihood lookup table.
    Table(table::TableArgs),
    /// Estimate camera motion for every frame of one or more scenes.
    Estimate(estimate::EstimateArgs),
    /// Remove the rotational component from a flow file.
    Compensate(compensate::CompensateArgs),
    /// Segment independently moving objects.
    Segment(segment::SegmentArgs),
    /// Compare estimates and masks with ground truth.
    Eval(eval::EvalArgs),
    /// Colour-code a flow file as PNG.
    Viz(viz::VizArgs),
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref().map(config::load).transpose()?;
    let cfg = cfg.as_ref();
    match cli.command {
        Command::Synth(a) => synth::run(config::resolve(a, "synth", cfg)?),
        Command::Table(a) => table::run(config::resolve(a, "table", cfg)?),
        Command::Estimate(a) => estimate::run(config::resolve(a, "estimate", cfg)?),
        Command::Compensate(a) => compensate::run(config::resolve(a, "compensate", cfg)?),
        Command::Segment(a) => segment::run(config::resolve(a, "segment", cfg)?),
        Command::Eval(a) => eval::run(config::resolve(a, "eval", cfg)?),
        Command::Viz(a) => viz::run(config::resolve(a, "viz", cfg)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rotcomp: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
