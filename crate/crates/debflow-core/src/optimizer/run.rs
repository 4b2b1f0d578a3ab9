//! The optimize loop: select → debate → evaluate → feed back, with every
//! step persisted so an aborted run can resume from its run directory.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::debate::{run_debate, DebateConfig, DebateContext, DebateError, RoleTemplates};
use crate::evaluator::{evaluate_workflow, EvalError, EvalSettings, ScorerRegistry, TaskRun};
use crate::executor::{ExecutorOptions, TaskInstance};
use crate::memory::{
    extract_initial_gene, refine_gene, FeedbackError, FeedbackSettings, MemoryStore,
};
use crate::prompts;
use crate::provider::{with_retry, LedgerSnapshot, Metered, Provider, UsageLedger};
use crate::rundir::{RunDir, RunState};
use crate::runlog::{now_ms, RunEvent, RunLogger};
use crate::workflow::{io_workflow, validate_graph, ModelSet, WorkflowGraph, IO_PROMPT};

use super::{select_candidate, Candidate, Lineage, OptimizeError, RunConfig};

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub best: Candidate,
    pub iterations_completed: u64,
    pub pool_size: usize,
    pub stop_reason: String,
    pub ledger: LedgerSnapshot,
    pub total_spent_usd: f64,
}

struct Engine<'a> {
    run_dir: &'a RunDir,
    config: &'a RunConfig,
    provider: &'a dyn Provider,
    ledger: &'a UsageLedger,
    logger: &'a RunLogger,
    registry: &'a ScorerRegistry,
    models: ModelSet,
    tasks: Vec<TaskInstance>,
    gene_extract_template: String,
    gene_refine_template: String,
    memory: MemoryStore,
    pool: Vec<Candidate>,
    state: RunState,
    /// Spend carried in from previous sessions of this run directory.
    base_spent_usd: f64,
}

impl<'a> Engine<'a> {
    fn total_spent(&self) -> f64 {
        self.base_spent_usd + self.ledger.total_cost_usd()
    }

    fn over_budget(&self) -> bool {
        matches!(self.config.budget_usd, Some(budget) if self.total_spent() >= budget)
    }

    fn persist_state(&mut self) -> Result<(), OptimizeError> {
        self.state.spent_usd = self.total_spent();
        self.run_dir
            .write_json(&self.run_dir.state_path(), &self.state)?;
        std::fs::write(self.run_dir.memory_path(), self.memory.to_json_pretty())?;
        Ok(())
    }

    /// Argmax over the pool; earlier insertion wins ties.
    fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, candidate) in self.pool.iter().enumerate() {
            if candidate.score > self.pool[best].score {
                best = i;
            }
        }
        best
    }

    fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            executor: ExecutorOptions {
                default_temperature: self.config.temperature,
                ..ExecutorOptions::default()
            },
            default_scorer: self.config.default_scorer,
            code_scorer: self.config.code_scorer.clone(),
        }
    }

    fn feedback_settings(&self) -> FeedbackSettings {
        FeedbackSettings {
            model: self.config.default_model.clone(),
            temperature: self.config.temperature,
            trajectory_char_budget: self.config.gene_char_budget,
        }
    }

    /// Evaluates a graph, inserts the resulting candidate, updates best,
    /// and runs the failure-feedback pass.
    fn evaluate_candidate(
        &mut self,
        graph: WorkflowGraph,
        parent: Option<String>,
        iteration: u64,
    ) -> Result<(), OptimizeError> {
        let fingerprint = graph.fingerprint();
        let cost_before = self.ledger.total_cost_usd();
        let outcome = evaluate_workflow(
            &graph,
            &self.tasks,
            self.provider,
            self.registry,
            &self.eval_settings(),
        )?;
        let cost_usd = self.ledger.total_cost_usd() - cost_before;

        for run in &outcome.runs {
            self.logger.append(&RunEvent::TrajectoryRecorded {
                ts: now_ms(),
                iteration,
                fingerprint: fingerprint.clone(),
                score: run.score,
                trajectory: run.trajectory.clone(),
            })?;
        }
        self.logger.append(&RunEvent::CandidateEvaluated {
            ts: now_ms(),
            iteration,
            fingerprint: fingerprint.clone(),
            score: outcome.report.aggregate,
            cost_usd,
            completed: outcome.report.completed_count,
            failed: outcome.report.failed_count,
        })?;

        let candidate = Candidate {
            score: outcome.report.aggregate,
            fingerprint: fingerprint.clone(),
            lineage: Lineage { parent, iteration },
            cost_usd,
            graph,
        };
        self.run_dir
            .write_json(&self.run_dir.candidate_path(&fingerprint), &candidate)?;

        let had_better =
            !self.pool.is_empty() && self.pool[self.best_index()].score >= candidate.score;
        self.pool.push(candidate);
        self.state.pool.push(fingerprint.clone());
        if !had_better {
            let best = &self.pool[self.best_index()];
            self.logger.append(&RunEvent::BestUpdated {
                ts: now_ms(),
                iteration,
                fingerprint: best.fingerprint.clone(),
                score: best.score,
            })?;
            self.run_dir.write_json(&self.run_dir.best_path(), best)?;
        }

        if !self.over_budget() {
            self.feedback_pass(&outcome.runs, iteration)?;
        }
        Ok(())
    }

    /// Failure analysis over this evaluation's imperfect runs, oldest task
    /// first, capped by `max_genes_per_iteration`. Unparseable analyses are
    /// skipped (the llm_call log still shows the attempts); provider
    /// failures abort the run.
    fn feedback_pass(&mut self, runs: &[TaskRun], iteration: u64) -> Result<(), OptimizeError> {
        let Some(candidate) = self.pool.last() else {
            return Ok(());
        };
        let graph = candidate.graph.clone();
        let settings = self.feedback_settings();
        let mut analyzed = 0usize;
        for run in runs {
            if analyzed >= self.config.max_genes_per_iteration {
                break;
            }
            if run.score >= 1.0 {
                continue;
            }
            let initial = match extract_initial_gene(
                &run.trajectory,
                &graph,
                &run.task,
                run.score,
                iteration,
                self.provider,
                &self.gene_extract_template,
                &settings,
            ) {
                Ok(gene) => gene,
                Err(FeedbackError::NothingToAnalyze) => continue,
                Err(FeedbackError::GeneParseFailure { .. }) => {
                    analyzed += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let dominant = refine_gene(
                initial,
                &mut self.memory,
                self.provider,
                &self.gene_refine_template,
                &settings,
            )?;
            self.logger.append(&RunEvent::GeneStored {
                ts: now_ms(),
                iteration,
                gene: dominant,
            })?;
            analyzed += 1;
        }
        Ok(())
    }
}

fn load_seed_workflow(
    run_dir: &RunDir,
    config: &RunConfig,
) -> Result<WorkflowGraph, OptimizeError> {
    let path = run_dir.seed_workflow_path();
    if path.exists() {
        Ok(run_dir.read_json(&path)?)
    } else {
        Ok(io_workflow(&config.default_model, IO_PROMPT))
    }
}

fn load_tasks(run_dir: &RunDir, config: &RunConfig) -> Result<Vec<TaskInstance>, OptimizeError> {
    let path = run_dir.root().join(&config.validation_tasks);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("task file {}: {e}", path.display())))?;
    let tasks = crate::evaluator::parse_task_set(&text)?;
    if tasks.is_empty() {
        return Err(EvalError::EmptyTaskSet.into());
    }
    Ok(tasks)
}

/// Runs (or resumes) an optimization inside `run_dir`, driving every LLM
/// call through `base_provider` wrapped with the configured retry policy
/// and cost metering. Returns the best candidate at stop time.
pub fn optimize(
    run_dir_path: &Path,
    base_provider: Box<dyn Provider>,
    registry: &ScorerRegistry,
    resume: bool,
) -> Result<OptimizeReport, OptimizeError> {
    let run_dir = RunDir::new(run_dir_path);
    let config: RunConfig = run_dir.read_json(&run_dir.config_path())?;
    config.validate()?;

    let templates = RoleTemplates::load(&run_dir.prompts_dir())?;
    let debate_config = DebateConfig::new(config.debate, templates)?;
    let gene_extract_template = prompts::load_prompt(&run_dir.prompts_dir(), "gene_extract")?;
    let gene_refine_template = prompts::load_prompt(&run_dir.prompts_dir(), "gene_refine")?;
    let tasks = load_tasks(&run_dir, &config)?;

    let state_exists = run_dir.state_path().exists();
    if state_exists && !resume {
        return Err(OptimizeError::Config(
            "run directory already contains optimizer state; rerun with resume to continue".into(),
        ));
    }
    if resume && !state_exists {
        return Err(OptimizeError::Config(
            "nothing to resume: no state.json".into(),
        ));
    }

    let ledger = Arc::new(UsageLedger::new(config.prices.clone()));
    let logger = Arc::new(RunLogger::open_append(&run_dir.runlog_path())?);
    let provider = Metered::new(with_retry(base_provider, config.retry), Arc::clone(&ledger))
        .with_observer(Arc::clone(&logger) as Arc<dyn crate::provider::UsageObserver>);

    let models = ModelSet::named(config.models.iter().cloned());
    let (state, memory, pool) = if resume {
        let state: RunState = run_dir.read_json(&run_dir.state_path())?;
        let memory = if run_dir.memory_path().exists() {
            MemoryStore::from_json(&std::fs::read_to_string(run_dir.memory_path())?)?
        } else {
            MemoryStore::new(config.memory.short_capacity, config.memory.long_capacity)
        };
        let mut pool = Vec::with_capacity(state.pool.len());
        for fingerprint in &state.pool {
            pool.push(run_dir.read_json::<Candidate>(&run_dir.candidate_path(fingerprint))?);
        }
        (state, memory, pool)
    } else {
        (
            RunState::default(),
            MemoryStore::new(config.memory.short_capacity, config.memory.long_capacity),
            Vec::new(),
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..state.draws_consumed {
        let _: f64 = rng.gen();
    }

    logger.append(&RunEvent::RunStarted {
        ts: now_ms(),
        seed: config.seed,
        max_iterations: config.max_iterations,
        resumed: resume,
    })?;

    let mut engine = Engine {
        run_dir: &run_dir,
        config: &config,
        provider: &provider,
        ledger: &ledger,
        logger: &logger,
        registry,
        models,
        tasks,
        gene_extract_template,
        gene_refine_template,
        memory,
        pool,
        state,
        base_spent_usd: 0.0,
    };
    engine.base_spent_usd = engine.state.spent_usd;

    // Iteration 0: the seed workflow gets a score before any debate runs.
    if engine.pool.is_empty() {
        let seed_graph = load_seed_workflow(&run_dir, &config)?;
        let report = validate_graph(&seed_graph, &engine.models);
        if !report.ok {
            return Err(OptimizeError::InvalidSeedWorkflow(report));
        }
        engine.evaluate_candidate(seed_graph, None, 0)?;
        engine.persist_state()?;
    }

    let mut stop_reason = "max_iterations";
    let first_iteration = engine.state.iterations_completed + 1;
    for iteration in first_iteration..=config.max_iterations {
        if engine.over_budget() {
            stop_reason = "budget";
            break;
        }
        let scores: Vec<f64> = engine.pool.iter().map(|c| c.score).collect();
        let index = select_candidate(&scores, config.lambda, config.alpha, &mut rng)?;
        let parent = engine.pool[index].clone();
        let gene = engine.memory.dominant_gene_for(&parent.graph).cloned();

        let ctx = DebateContext {
            task_brief: &config.task_brief,
            gene: gene.as_ref(),
            models: &engine.models,
            model: &config.default_model,
            temperature: config.temperature,
        };
        let debate = match run_debate(&parent.graph, &ctx, &debate_config, &provider) {
            Ok(outcome) => outcome,
            Err(err @ (DebateError::Failed | DebateError::ProposalParse { .. })) => {
                logger.append(&RunEvent::IterationSkipped {
                    ts: now_ms(),
                    iteration,
                    reason: err.to_string(),
                })?;
                engine.state.iterations_completed = iteration;
                engine.state.draws_consumed = iteration;
                engine.persist_state()?;
                continue;
            }
            Err(err) => {
                // Hard failure: persist everything and surface the error;
                // the run directory stays resumable.
                engine.persist_state()?;
                return Err(err.into());
            }
        };
        let result_fingerprint = debate.graph.fingerprint();
        logger.append(&RunEvent::DebateHeld {
            ts: now_ms(),
            iteration,
            parent: parent.fingerprint.clone(),
            result_fingerprint: result_fingerprint.clone(),
            rounds: debate.rounds_executed,
            provider_calls: debate.provider_calls,
            decided_by_final_judge: debate.decided_by_final_judge,
            proposals: debate.state.proposals.clone(),
            transcript: debate.transcript.clone(),
        })?;

        if engine
            .pool
            .iter()
            .any(|c| c.fingerprint == result_fingerprint)
        {
            logger.append(&RunEvent::Collision {
                ts: now_ms(),
                iteration,
                fingerprint: result_fingerprint,
            })?;
            engine.state.iterations_completed = iteration;
            engine.state.draws_consumed = iteration;
            engine.persist_state()?;
            continue;
        }

        if engine.over_budget() {
            // The debate landed over the cap: stop before paying for an
            // evaluation the budget cannot cover.
            logger.append(&RunEvent::IterationSkipped {
                ts: now_ms(),
                iteration,
                reason: "budget exhausted before evaluation".into(),
            })?;
            stop_reason = "budget";
            engine.state.iterations_completed = iteration;
            engine.state.draws_consumed = iteration;
            engine.persist_state()?;
            break;
        }

        match engine.evaluate_candidate(debate.graph, Some(parent.fingerprint.clone()), iteration) {
            Ok(()) => {}
            Err(e) => {
                engine.persist_state()?;
                return Err(e);
            }
        }
        engine.state.iterations_completed = iteration;
        engine.state.draws_consumed = iteration;
        engine.persist_state()?;
    }

    engine.state.finished = true;
    engine.persist_state()?;

    let best = engine.pool[engine.best_index()].clone();
    run_dir.write_json(&run_dir.best_path(), &best)?;
    logger.append(&RunEvent::RunFinished {
        ts: now_ms(),
        iterations_completed: engine.state.iterations_completed,
        best_fingerprint: best.fingerprint.clone(),
        best_score: best.score,
        stop_reason: stop_reason.to_string(),
        ledger: ledger.snapshot(),
    })?;

    Ok(OptimizeReport {
        best,
        iterations_completed: engine.state.iterations_completed,
        pool_size: engine.pool.len(),
        stop_reason: stop_reason.to_string(),
        ledger: ledger.snapshot(),
        total_spent_usd: engine.total_spent(),
    })
}
