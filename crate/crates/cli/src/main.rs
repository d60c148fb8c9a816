//! `evpose`: the command-line frontend tying the pipeline stages together.
//!
//! Every subcommand reads and writes the plain-text formats defined by the
//! core crate, so stages can be run separately, inspected, and replayed. Any
//! error exits nonzero with a message on stderr.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod align;
mod commands;
mod report;

#[derive(Parser)]
#[command(name = "evpose", about = "Event-camera 2D human pose estimation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic walking-figure event stream with ground truth.
    Synth(commands::SynthArgs),
    /// Accumulate an event file and fit one line segment per block.
    DetectLines(commands::DetectLinesArgs),
    /// Merge a segment file into a pose graph with proximity augmentation.
    BuildGraph(commands::BuildGraphArgs),
    /// Train the network on an event file with ground-truth poses.
    Train(commands::TrainArgs),
    /// Score a prediction file against ground truth (PCK, MPJPE).
    Eval(commands::EvalArgs),
    /// Measure per-stage pipeline latency and emit a key/value report.
    Bench(commands::BenchArgs),
    /// Render overlay images of predictions, ground truth, and the surface.
    Visualize(commands::VisualizeArgs),
    /// Run the full pipeline over an event file, emitting poses.
    Run(commands::RunArgs),
    /// Validate externally converted event/pose exports into native files.
    Ingest(commands::IngestArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::DetectLines(args) => commands::detect_lines(args),
        Command::BuildGraph(args) => commands::build_graph(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Bench(args) => commands::bench(args),
        Command::Visualize(args) => commands::visualize(args),
        Command::Run(args) => commands::run(args),
        Command::Ingest(args) => commands::ingest(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
