//! `depthsplat`: ingest COLMAP datasets, train depth-regularized Gaussian
//! splats, render, evaluate and run the verification harnesses.

mod commands;
mod config;
mod provenance;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ab, eval, gradcheck, ingest, render, synth, train};

#[derive(Debug, Parser)]
#[command(name = "depthsplat", version, about = "Few-view Gaussian splatting with depth priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset directory and preview the train/test split.
    Ingest(ingest::IngestArgs),
    /// Train a cloud on a dataset.
    Train(train::TrainArgs),
    /// Render a view of a checkpoint.
    Render(render::RenderArgs),
    /// Evaluate a checkpoint on the test views.
    Eval(eval::EvalArgs),
    /// Finite-difference check of the analytic gradients.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Write a synthetic dataset with exact depth maps.
    Synth(synth::SynthArgs),
    /// Paired runs with and without the depth loss on synthetic scenes.
    Ab(ab::AbArgs),
}

/// Exit status: 0 success, 1 validation error, 2 runtime failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    let runtime = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<depthsplat_core::Error>(),
            Some(depthsplat_core::Error::NonFiniteLoss { .. } | depthsplat_core::Error::MismatchedIntermediates(_))
        )
    });
    if runtime {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = config::init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Train(a) => train::run(a),
        Command::Render(a) => render::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Ab(a) => ab::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
