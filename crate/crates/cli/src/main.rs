//! Batch front-end for the toolkit: simulate the beam oracle, fit curvature
//! coefficients from boundary poses, reproduce the regression study, generate
//! datasets, train and evaluate the neural models, and emit plot files.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 numerical failure,
//! 4 I/O or schema failure. Diagnostics go to standard error.

mod commands;
mod config;
mod svg;

use clap::{Parser, Subcommand};
use clothoid_arm::Error;

#[derive(Parser)]
#[command(
    name = "clothoid-arm",
    version,
    about = "Planar soft-actuator modeling toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the beam equilibrium and write the deformed shape as CSV.
    Simulate(commands::SimulateArgs),
    /// Recover curvature coefficients from a boundary-pose JSON request.
    Fit(commands::FitArgs),
    /// Sweep pressures and loads, fitting linear and quadratic curvature
    /// profiles; write per-cell and summary R^2 tables.
    Study(commands::StudyArgs),
    /// Sweep the pressure/payload grid and write the labeled dataset.
    Generate(commands::GenerateArgs),
    /// Train a forward or inverse model on a dataset.
    Train(commands::TrainArgs),
    /// Evaluate trained models on the held-out split.
    Eval(commands::EvalArgs),
    /// Render a shape CSV as a standalone SVG.
    Plot(commands::PlotArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Study(args) => commands::study(args),
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Plot(args) => commands::plot(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidParams(_)
        | Error::Data(_)
        | Error::RoleMismatch(_)
        | Error::ArcOutOfRange { .. } => 2,
        Error::NoConvergence { .. }
        | Error::Divergence(_)
        | Error::InfeasibleBoundary { .. }
        | Error::DegenerateFit(_) => 3,
        Error::Io(_)
        | Error::Json(_)
        | Error::SchemaVersionMismatch { .. }
        | Error::MalformedRecord { .. } => 4,
    }
}
