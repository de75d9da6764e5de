//! `viscal`: simulate, train, predict, verify and report visibility
//! post-processing experiments.

mod commands;
mod config;
mod layout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use viscal::training::{ModelKind, SchemeKind};

use commands::{Outcome, RunContext};
use config::RunConfig;
use layout::Layout;

#[derive(Parser)]
#[command(name = "viscal", version, about = "Post-processing of discrete visibility ensemble forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory holding data/, params/, predictions/, verification/ and report/.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// polr or mlp.
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    /// local, semi_local or regional.
    #[arg(long, global = true)]
    scheme: Option<SchemeKind>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write a synthetic dataset and its manifest.
    Simulate,
    /// Fit one model per (target date, lead time, scope) and save the parameters.
    Train,
    /// Predict the verification cases with saved parameters, plus the references.
    Predict,
    /// Score all prediction sets against the climatology and raw references.
    Verify,
    /// Lead-time curves and ratio tables from the verification scores.
    Report,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some()
            || c.downcast_ref::<viscal::Error>().is_some_and(|e| !e.is_validation())
    });
    if io {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::error!("cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = RunConfig::load(cli.config.as_deref()).and_then(|cfg| {
        let ctx = RunContext { cfg, layout: Layout::new(&cli.out), seed: cli.seed, model: cli.model, scheme: cli.scheme };
        match cli.command {
            Command::Simulate => commands::simulate(&ctx),
            Command::Train => commands::train(&ctx),
            Command::Predict => commands::predict(&ctx),
            Command::Verify => commands::verify(&ctx),
            Command::Report => commands::report(&ctx),
        }
    });
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::PartialFailure) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
