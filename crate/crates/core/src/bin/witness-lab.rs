//! `witness-lab <subcommand> --config <file> [--seed-offset N] [--out DIR]`
//!
//! Prints a JSON summary of the written files on success. On failure prints a
//! JSON error document and exits with 2 (bad input) or 1 (run failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use witness_lab::harness::{exit_code, run, ErrorReport, ExperimentConfig, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "witness-lab", version, about = "Seeded experiments for model-based exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact planning on the environment model.
    Plan(Common),
    /// Exact and estimated witnessed misfit at one level.
    Misfit(Common),
    /// Pairwise matrices and their numerical ranks.
    Rank(Common),
    /// The elimination learner.
    RunMain(Common),
    /// The elimination learner wrapped in the doubling schedule.
    RunDoubling(Common),
    /// The factored elimination learner.
    RunFactored(Common),
    /// Model-based versus profile-restricted learning on the separation family.
    SeparationDemo(Common),
    /// Scheffé-set class versus the TV ball.
    ScheffeCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Plan(c) => (ExperimentKind::Plan, c),
            Command::Misfit(c) => (ExperimentKind::Misfit, c),
            Command::Rank(c) => (ExperimentKind::Rank, c),
            Command::RunMain(c) => (ExperimentKind::RunMain, c),
            Command::RunDoubling(c) => (ExperimentKind::RunDoubling, c),
            Command::RunFactored(c) => (ExperimentKind::RunFactored, c),
            Command::SeparationDemo(c) => (ExperimentKind::SeparationDemo, c),
            Command::ScheffeCheck(c) => (ExperimentKind::ScheffeCheck, c),
        }
    }
}

fn main() -> ExitCode {
    let (kind, common) = Cli::parse().command.split();
    let result = ExperimentConfig::load(&common.config).and_then(|cfg| {
        let overrides = Overrides {
            seed_offset: common.seed_offset,
            out: common.out,
        };
        run(kind, &cfg, &overrides)
    });
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("summary serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", serde_json::to_string(&ErrorReport::of(&e)).expect("error report serialises"));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
