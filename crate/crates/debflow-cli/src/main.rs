//! `debflow` — CLI for configuring, running, inspecting, and replaying
//! workflow optimizations.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

mod commands;
mod provider_flag;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "debflow",
    version,
    about = "Debate-driven optimizer for LLM agentic workflows"
)]
struct Cli {
    /// Run directory all artifacts live under.
    #[arg(long, global = true, default_value = "runs/default")]
    run_dir: PathBuf,

    /// Provider: `scripted:<script.json>`, `http`, or `http:<base_url>`.
    #[arg(long, global = true)]
    provider: Option<String>,

    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a run directory with config, prompts, and a seed workflow.
    Init {
        /// Template: math, qa, general, or demo (fully scripted, offline).
        #[arg(long, default_value = "general")]
        template: String,
    },
    /// Run (or resume) an optimization to its iteration/dollar budget.
    Optimize {
        /// Use this config file instead of the one in the run directory
        /// (it is copied there as the effective config).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_iterations: Option<u64>,
        #[arg(long)]
        budget_usd: Option<f64>,
        /// Continue a previously started run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score one workflow file against one task file.
    Eval {
        #[arg(long)]
        workflow: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
    },
    /// Render run artifacts: candidates, genes, debates, or best.
    Inspect {
        /// One of: candidates, genes, debates, best.
        what: String,
    },
    /// Re-execute one iteration from logged responses and verify
    /// byte-identical trajectories.
    Replay {
        #[arg(long)]
        iteration: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Init { template } => commands::init(&cli, template),
        Command::Optimize {
            config,
            max_iterations,
            budget_usd,
            resume,
        } => commands::optimize(
            &cli,
            config.as_deref(),
            *max_iterations,
            *budget_usd,
            *resume,
        ),
        Command::Eval { workflow, tasks } => commands::eval(&cli, workflow, tasks),
        Command::Inspect { what } => commands::inspect(&cli, what),
        Command::Replay { iteration } => commands::replay(&cli, *iteration),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
