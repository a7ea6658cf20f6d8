//! `lastmile`: annotate synthetic data, train the instruction-conditioned
//! policy, plan, evaluate, run data ablations and plot trajectories.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

const USAGE_EXIT: u8 = 1;
const RUNTIME_EXIT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lastmile",
    version,
    about = "Language-conditioned last-mile navigation toolkit",
    after_help = "Every setting is a flat config key. `lastmile <COMMAND> --print-config` lists all keys with their effective values."
)]
struct Cli {
    /// Flat TOML config file.
    #[arg(long, short = 'c', global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key (repeatable), e.g. `--set lambda_col=2`.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print the effective config as TOML and exit without running.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Render, segment, label and prompt frames into a JSON Lines dataset.
    Annotate,
    /// Pretrain and/or finetune the policy; writes a checkpoint and loss CSV.
    Train,
    /// Run an episode suite with the policy or the planner; writes a report.
    Eval,
    /// Drive the lattice planner in a world file; writes a per-step cost trace.
    Plan,
    /// Held-out pose error against training-set fraction.
    Ablate,
    /// Run one suite episode and write its trajectory as CSV and SVG.
    Plot,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE_EXIT);
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let result = match cli.command {
        Command::Annotate => commands::annotate(&cfg),
        Command::Train => commands::train_cmd(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Plan => commands::plan(&cfg),
        Command::Ablate => commands::ablate(&cfg),
        Command::Plot => commands::plot(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME_EXIT)
        }
    }
}
