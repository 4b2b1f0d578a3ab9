//! Subcommand bodies. Each returns the process exit code; anyhow errors
//! map to exit 1 in `main`.

use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::json;

use debflow_core::demo;
use debflow_core::evaluator::{evaluate_workflow, DefaultScorer, EvalSettings, ScorerRegistry};
use debflow_core::optimizer::{optimize as run_optimize, Candidate, OptimizeError, RunConfig};
use debflow_core::prompts;
use debflow_core::provider::{with_retry, Metered, UsageLedger};
use debflow_core::replay::replay_iteration;
use debflow_core::rundir::{LockGuard, RunDir};
use debflow_core::runlog::{read_events, RunEvent};
use debflow_core::workflow::{io_workflow, validate_graph, ModelSet, WorkflowGraph, IO_PROMPT};

use crate::provider_flag::build_provider;
use crate::Cli;

const OK: ExitCode = ExitCode::SUCCESS;

fn short(fingerprint: &str) -> &str {
    &fingerprint[..fingerprint.len().min(12)]
}

pub fn init(cli: &Cli, template: &str) -> Result<ExitCode> {
    let dir = &cli.run_dir;
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied {
            bail!(
                "run directory {} is not empty; pick a fresh directory",
                dir.display()
            );
        }
    }
    if template == "demo" {
        demo::write_demo_run_dir(dir)?;
        if !cli.json {
            println!("initialized demo run in {}", dir.display());
            println!(
                "run it offline with: debflow optimize --run-dir {} --provider scripted:script.json",
                dir.display()
            );
        }
    } else {
        let mut config = RunConfig::default();
        match template {
            "math" => {
                config.default_scorer = DefaultScorer::ExactMatch;
                config.task_brief =
                    "Mathematical reasoning problems; the reply must be the bare final answer."
                        .into();
            }
            "qa" => {
                config.default_scorer = DefaultScorer::F1;
                config.task_brief =
                    "Question answering over short passages; reply with a concise answer span."
                        .into();
            }
            "general" => {}
            other => bail!("unknown template `{other}`: expected math, qa, general, or demo"),
        }
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let run_dir = RunDir::new(dir);
        std::fs::create_dir_all(dir)?;
        run_dir.write_json(&run_dir.config_path(), &config)?;
        prompts::write_default_prompts(&run_dir.prompts_dir())?;
        run_dir.write_json(
            &run_dir.seed_workflow_path(),
            &io_workflow(&config.default_model, IO_PROMPT),
        )?;
        if !cli.json {
            println!("initialized {} run in {}", template, dir.display());
            println!(
                "add validation tasks at {}",
                dir.join(&config.validation_tasks).display()
            );
        }
    }
    if cli.json {
        println!(
            "{}",
            json!({"run_dir": dir.display().to_string(), "template": template})
        );
    }
    Ok(OK)
}

pub fn optimize(
    cli: &Cli,
    config_override: Option<&Path>,
    max_iterations: Option<u64>,
    budget_usd: Option<f64>,
    resume: bool,
) -> Result<ExitCode> {
    let run_dir = RunDir::new(&cli.run_dir);
    if !run_dir.config_path().exists() && config_override.is_none() {
        bail!(
            "{} is not an initialized run directory (no config.json); run `debflow init` first",
            cli.run_dir.display()
        );
    }

    // Apply overrides to the effective config and persist it so the run
    // directory records exactly what ran.
    let config_path = config_override
        .map(Path::to_path_buf)
        .unwrap_or(run_dir.config_path());
    let text = std::fs::read_to_string(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = max_iterations {
        config.max_iterations = n;
    }
    if let Some(budget) = budget_usd {
        config.budget_usd = Some(budget);
    }
    run_dir.write_json(&run_dir.config_path(), &config)?;

    let provider = build_provider(cli.provider.as_deref(), &cli.run_dir)?;
    let _lock = LockGuard::acquire(&run_dir)?;
    let registry = ScorerRegistry::new();
    let report = match run_optimize(&cli.run_dir, provider, &registry, resume) {
        Ok(report) => report,
        Err(OptimizeError::Config(msg)) if msg.contains("rerun with resume") => {
            bail!("{msg}; pass --resume to continue this run directory")
        }
        Err(e) => return Err(e.into()),
    };

    if cli.json {
        println!(
            "{}",
            json!({
                "best_score": report.best.score,
                "best_fingerprint": report.best.fingerprint,
                "iterations_completed": report.iterations_completed,
                "pool_size": report.pool_size,
                "stop_reason": report.stop_reason,
                "total_cost_usd": report.total_spent_usd,
            })
        );
    } else {
        println!(
            "finished after {} iterations ({})",
            report.iterations_completed, report.stop_reason
        );
        println!("best score:       {:.4}", report.best.score);
        println!("best fingerprint: {}", report.best.fingerprint);
        println!("pool size:        {}", report.pool_size);
        println!("total cost:       ${:.6}", report.total_spent_usd);
    }
    Ok(OK)
}

pub fn eval(cli: &Cli, workflow_path: &Path, tasks_path: &Path) -> Result<ExitCode> {
    let run_dir = RunDir::new(&cli.run_dir);
    let config: RunConfig = run_dir.read_json(&run_dir.config_path()).with_context(|| {
        format!(
            "{} is not an initialized run directory",
            cli.run_dir.display()
        )
    })?;

    let workflow: WorkflowGraph = run_dir
        .read_json(workflow_path)
        .with_context(|| format!("reading workflow {}", workflow_path.display()))?;
    let models = ModelSet::named(config.models.iter().cloned());
    let report = validate_graph(&workflow, &models);
    if !report.ok {
        bail!("workflow {} is invalid: {report}", workflow_path.display());
    }

    let tasks_text = std::fs::read_to_string(tasks_path)
        .with_context(|| format!("reading tasks {}", tasks_path.display()))?;
    let tasks = debflow_core::evaluator::parse_task_set(&tasks_text)
        .with_context(|| format!("parsing tasks {}", tasks_path.display()))?;

    let base = build_provider(cli.provider.as_deref(), &cli.run_dir)?;
    let ledger = std::sync::Arc::new(UsageLedger::new(config.prices.clone()));
    let provider = Metered::new(
        with_retry(base, config.retry),
        std::sync::Arc::clone(&ledger),
    );
    let settings = EvalSettings {
        default_scorer: config.default_scorer,
        code_scorer: config.code_scorer.clone(),
        ..EvalSettings::default()
    };
    let outcome = evaluate_workflow(
        &workflow,
        &tasks,
        &provider,
        &ScorerRegistry::new(),
        &settings,
    )?;

    if cli.json {
        println!(
            "{}",
            json!({
                "aggregate": outcome.report.aggregate,
                "completed": outcome.report.completed_count,
                "failed": outcome.report.failed_count,
                "per_task": outcome.report.per_task,
                "cost_usd": ledger.total_cost_usd(),
            })
        );
    } else {
        for task in &outcome.report.per_task {
            println!("{:<12} {:.4}", task.task_id, task.score);
        }
        println!("aggregate:  {:.4}", outcome.report.aggregate);
        println!("completed:  {}", outcome.report.completed_count);
        println!("failed:     {}", outcome.report.failed_count);
        println!("cost:       ${:.6}", ledger.total_cost_usd());
    }
    Ok(OK)
}

pub fn inspect(cli: &Cli, what: &str) -> Result<ExitCode> {
    let run_dir = RunDir::new(&cli.run_dir);
    match what {
        "candidates" => {
            let state: debflow_core::rundir::RunState = run_dir
                .read_json(&run_dir.state_path())
                .context("no optimizer state in this run directory")?;
            let mut candidates = Vec::new();
            for fingerprint in &state.pool {
                let c: Candidate = run_dir.read_json(&run_dir.candidate_path(fingerprint))?;
                candidates.push(c);
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&candidates)?);
            } else {
                println!(
                    "{:<5} {:<8} {:<10} {:<14} {:<14}",
                    "iter", "score", "cost_usd", "fingerprint", "parent"
                );
                for c in &candidates {
                    println!(
                        "{:<5} {:<8.4} {:<10.6} {:<14} {:<14}",
                        c.lineage.iteration,
                        c.score,
                        c.cost_usd,
                        short(&c.fingerprint),
                        c.lineage.parent.as_deref().map(short).unwrap_or("-"),
                    );
                }
            }
        }
        "genes" => {
            let events = read_events(&run_dir.runlog_path()).context("no run log yet")?;
            let genes: Vec<_> = events
                .iter()
                .filter_map(|e| match e {
                    RunEvent::GeneStored {
                        iteration, gene, ..
                    } => Some((iteration, gene)),
                    _ => None,
                })
                .collect();
            if cli.json {
                let payload: Vec<_> = genes
                    .iter()
                    .map(|(i, g)| json!({"iteration": i, "gene": g}))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&payload)?);
            } else {
                println!(
                    "{:<5} {:<14} {:<16} {:<20} directive",
                    "iter", "id", "category", "nodes"
                );
                for (iteration, gene) in &genes {
                    println!(
                        "{:<5} {:<14} {:<16} {:<20} {}",
                        iteration,
                        gene.id,
                        format!("{:?}", gene.error_category),
                        gene.failing_node_ids.join(","),
                        gene.directive
                    );
                }
            }
        }
        "debates" => {
            let events = read_events(&run_dir.runlog_path()).context("no run log yet")?;
            if cli.json {
                let payload: Vec<_> = events
                    .iter()
                    .filter(|e| matches!(e, RunEvent::DebateHeld { .. }))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&payload)?);
            } else {
                println!(
                    "{:<5} {:<7} {:<6} {:<12} {:<14} {:<14}",
                    "iter", "rounds", "calls", "final_judge", "parent", "result"
                );
                for event in &events {
                    if let RunEvent::DebateHeld {
                        iteration,
                        rounds,
                        provider_calls,
                        decided_by_final_judge,
                        parent,
                        result_fingerprint,
                        ..
                    } = event
                    {
                        println!(
                            "{:<5} {:<7} {:<6} {:<12} {:<14} {:<14}",
                            iteration,
                            rounds,
                            provider_calls,
                            decided_by_final_judge,
                            short(parent),
                            short(result_fingerprint)
                        );
                    }
                }
            }
        }
        "best" => {
            let best: Candidate = run_dir
                .read_json(&run_dir.best_path())
                .context("no best candidate recorded yet")?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&best)?);
            } else {
                println!("score:       {:.4}", best.score);
                println!("fingerprint: {}", best.fingerprint);
                println!("iteration:   {}", best.lineage.iteration);
                println!("nodes:       {}", best.graph.nodes.len());
            }
        }
        other => {
            bail!("unknown inspect target `{other}`: expected candidates, genes, debates, or best")
        }
    }
    Ok(OK)
}

pub fn replay(cli: &Cli, iteration: u64) -> Result<ExitCode> {
    let report = replay_iteration(&cli.run_dir, iteration)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else if report.identical {
        println!(
            "replay of iteration {iteration}: identical ({} trajectories)",
            report.tasks_replayed
        );
    } else if let Some(d) = &report.divergence {
        println!(
            "replay of iteration {iteration}: DIVERGED at task {} node {} field {}",
            d.task_id,
            d.node_id.as_deref().unwrap_or("-"),
            d.field
        );
        println!("  logged:   {}", d.logged);
        println!("  replayed: {}", d.replayed);
    }
    Ok(if report.identical {
        OK
    } else {
        ExitCode::from(1)
    })
}
