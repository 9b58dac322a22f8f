//! `pcrecon` — command-line harness around the reconstruction toolkit.
//!
//! Every subcommand resolves a full [`config::RunConfig`] (defaults, then an
//! optional JSON config file, then individual flags) and echoes it before
//! doing any work, so a run can always be reproduced from its own output.
//! Exit codes are a stable contract for scripting:
//!
//! * `0` — success
//! * `1` — usage error (bad flags, invalid configuration)
//! * `2` — data error (missing or malformed files, mismatched pairs)
//! * `3` — numerical failure (non-finite values, diverged training)

mod commands;
mod config;
mod image;
mod manifest;

use clap::{Parser, Subcommand};
use pcrecon::Error;

#[derive(Parser)]
#[command(
    name = "pcrecon",
    version,
    about = "Single-image-to-point-cloud reconstruction harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic dataset (meshes, silhouettes, poses).
    GenFixtures(commands::gen_fixtures::Args),
    /// Rotate, normalize, scale, downsample and perturb raw samples.
    Preprocess(commands::preprocess::Args),
    /// Train a model on a preprocessed dataset (resumes from checkpoints).
    Train(commands::train::Args),
    /// Reconstruct point clouds for dataset images with a trained model.
    Infer(commands::infer::Args),
    /// Compare predicted clouds against ground truth and report metrics.
    Eval(commands::eval::Args),
    /// Train and evaluate one run per value along a configuration axis.
    Ablate(commands::ablate::Args),
    /// Sample points from a mesh surface (uniform or Lloyd-relaxed).
    SampleMesh(commands::sample_mesh::Args),
    /// Verify analytic gradients against finite differences.
    GradCheck(commands::grad_check::Args),
    /// Convert training logs and ablation tables to CSV and gnuplot data.
    Plot(commands::plot::Args),
}

/// Maps library errors onto the documented exit codes.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::NonPositiveTau { .. } | Error::NotPerfectSquare { .. } => 1,
        Error::NonFinite { .. } | Error::DivergedLoss { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> pcrecon::Result<()> {
    match cli.command {
        Command::GenFixtures(args) => commands::gen_fixtures::run(args),
        Command::Preprocess(args) => commands::preprocess::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Infer(args) => commands::infer::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
        Command::SampleMesh(args) => commands::sample_mesh::run(args),
        Command::GradCheck(args) => commands::grad_check::run(args),
        Command::Plot(args) => commands::plot::run(args),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2 on its own; route usage problems to 1 and
            // let --help/--version print normally.
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
