//! `dnp` — dense neural patterns and the regionlets cascade detector.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/processing error.

mod commands;
mod model;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "dnp",
    version,
    about = "Dense neural patterns: geometry, extraction, detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the receptive-field geometry table of a net
    Table(commands::TableArgs),
    /// Forward one input-sized image through the net and save the layer maps
    Forward(commands::ForwardArgs),
    /// Dense whole-image feature extraction by network-convolution
    Extract(commands::ExtractArgs),
    /// Generate a synthetic detection dataset
    Synth(commands::SynthArgs),
    /// Train a boosting-cascade detector
    Train(commands::TrainArgs),
    /// Run a trained detector over a dataset split
    Detect(commands::DetectArgs),
    /// Score detections against ground truth (average precision)
    Eval(commands::EvalArgs),
    /// Model-convolution accounting: dense vs per-region
    Bench(commands::BenchArgs),
    /// Selected-dimension histogram and top-response patches
    Visualize(commands::VisualizeArgs),
}

fn main() {
    // die quietly when the read end of a pipe closes (e.g. `dnp table | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are not usage errors
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.print().expect("write to stdout");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Table(args) => commands::table(args),
        Command::Forward(args) => commands::forward(args),
        Command::Extract(args) => commands::extract(args),
        Command::Synth(args) => commands::synth(args),
        Command::Train(args) => commands::train(args),
        Command::Detect(args) => commands::detect(args),
        Command::Eval(args) => commands::eval(args),
        Command::Bench(args) => commands::bench(args),
        Command::Visualize(args) => commands::visualize(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}
