//! Command-line entry point: simulation, training, inference and evaluation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use muse::eval::Task;

#[derive(Parser)]
#[command(name = "muse", version, about = "Multi-speaker separation and target speaker extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed applied to every section.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate mixtures and write manifests plus audio.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train stage 1 (separation and counting) or stage 2 (extraction).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: Option<u8>,
        /// Checkpoint to start from; required for stage 2.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Training manifests, replacing the configured ones.
        #[arg(long)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Separate every speaker of a mixture.
    Separate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        /// Force this many outputs instead of estimating the count.
        #[arg(long)]
        oracle_n: Option<usize>,
        mixture: PathBuf,
    },
    /// Extract the speaker of an enrollment utterance from a mixture.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        oracle_n: Option<usize>,
        mixture: PathBuf,
        enrollment: PathBuf,
    },
    /// Score a checkpoint on a manifest and write report files and plots.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        task: Option<Task>,
        /// Use the true speaker count of every example.
        #[arg(long)]
        oracle_n: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common } => commands::simulate(&common),
        Command::Train {
            common,
            stage,
            init,
            manifest,
            max_steps,
        } => commands::train(&common, stage, init, manifest, max_steps),
        Command::Separate {
            common,
            ckpt,
            oracle_n,
            mixture,
        } => commands::separate(&common, &ckpt, oracle_n, &mixture),
        Command::Extract {
            common,
            ckpt,
            oracle_n,
            mixture,
            enrollment,
        } => commands::extract(&common, &ckpt, oracle_n, &mixture, &enrollment),
        Command::Evaluate {
            common,
            ckpt,
            manifest,
            task,
            oracle_n,
        } => commands::evaluate(&common, &ckpt, manifest, task, oracle_n),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", msg.join(": ").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
