//! Scoring: exact match, token-level F1, and workflow evaluation over a
//! task set.
//!
//! Task routing by domain tag: math → exact match, qa → F1, code → a
//! registered plug-in scorer, other → the configured default scorer.
//! Failed trajectories score 0 — excluding them would reward fragile
//! workflows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{
    execute_workflow, DomainTag, ExecutorOptions, OverallStatus, TaskInstance, Trajectory,
};
use crate::provider::Provider;
use crate::workflow::{GraphError, WorkflowGraph};

/// Exact-match normalization: trim, collapse internal whitespace, strip a
/// trailing period, case-fold, then canonicalize pure numeric strings
/// (drop a leading `+`, trailing zeros after a decimal point, and a bare
/// trailing decimal point).
pub fn normalize_answer(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed.strip_suffix('.').unwrap_or(&collapsed);
    let folded = trimmed.to_lowercase();
    canonicalize_numeric(&folded)
}

fn canonicalize_numeric(text: &str) -> String {
    let unsigned = text.strip_prefix(['+', '-']).unwrap_or(text);
    let is_numeric = !unsigned.is_empty()
        && unsigned.chars().all(|c| c.is_ascii_digit() || c == '.')
        && unsigned.chars().filter(|c| *c == '.').count() <= 1
        && unsigned.chars().any(|c| c.is_ascii_digit());
    if !is_numeric {
        return text.to_string();
    }
    let mut out = text.strip_prefix('+').unwrap_or(text).to_string();
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

/// 1 iff the normalized forms are equal, else 0.
pub fn score_exact_match(pred: &str, gold: &str) -> f64 {
    if normalize_answer(pred) == normalize_answer(gold) {
        1.0
    } else {
        0.0
    }
}

/// F1 tokenization: case-fold, strip ASCII punctuation from each token,
/// split on whitespace, drop empties.
pub fn f1_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|tok| {
            tok.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .collect::<String>()
        })
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Token-level F1 with multiset overlap. Both sides empty → 1; one side
/// empty → 0.
pub fn score_f1(pred: &str, gold: &str) -> f64 {
    let pred_tokens = f1_tokens(pred);
    let gold_tokens = f1_tokens(gold);
    match (pred_tokens.is_empty(), gold_tokens.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut gold_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in &gold_tokens {
        *gold_counts.entry(tok.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for tok in &pred_tokens {
        if let Some(count) = gold_counts.get_mut(tok.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// A pluggable scorer, registered by name (used for `code` tasks, where
/// pass@1 needs an execution sandbox this crate deliberately does not ship).
pub trait Scorer: Send + Sync {
    fn score(&self, pred: &str, gold: &str) -> f64;
}

impl<F> Scorer for F
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    fn score(&self, pred: &str, gold: &str) -> f64 {
        self(pred, gold)
    }
}

#[derive(Default)]
pub struct ScorerRegistry {
    scorers: BTreeMap<String, Box<dyn Scorer>>,
}

impl ScorerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, scorer: Box<dyn Scorer>) {
        self.scorers.insert(name.into(), scorer);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Scorer> {
        self.scorers.get(name).map(|b| b.as_ref())
    }
}

/// Which built-in scorer handles `other`-tagged tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultScorer {
    ExactMatch,
    F1,
}

impl DefaultScorer {
    fn apply(&self, pred: &str, gold: &str) -> f64 {
        match self {
            DefaultScorer::ExactMatch => score_exact_match(pred, gold),
            DefaultScorer::F1 => score_f1(pred, gold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub score: f64,
}

/// Aggregate over every task, failures included at score 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_task: Vec<TaskScore>,
    pub aggregate: f64,
    pub completed_count: usize,
    pub failed_count: usize,
}

/// One executed task plus its score; the raw material forwarded to
/// failure analysis.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub task: TaskInstance,
    pub trajectory: Trajectory,
    pub score: f64,
}

#[derive(Debug)]
pub struct EvaluationOutcome {
    pub report: ScoreReport,
    pub runs: Vec<TaskRun>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("task set is empty")]
    EmptyTaskSet,
    #[error("no scorer registered for `{name}` tasks")]
    ScorerUnavailable { name: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub struct EvalSettings {
    pub executor: ExecutorOptions,
    pub default_scorer: DefaultScorer,
    /// Registry name of the plug-in scoring `code` tasks.
    pub code_scorer: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            executor: ExecutorOptions::default(),
            default_scorer: DefaultScorer::ExactMatch,
            code_scorer: "code".into(),
        }
    }
}

/// Executes the graph on every task and scores each final answer by the
/// task's domain tag.
pub fn evaluate_workflow(
    graph: &WorkflowGraph,
    tasks: &[TaskInstance],
    provider: &dyn Provider,
    registry: &ScorerRegistry,
    settings: &EvalSettings,
) -> Result<EvaluationOutcome, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::EmptyTaskSet);
    }
    // Surface a missing code scorer before burning any provider calls.
    if tasks.iter().any(|t| t.domain_tag == DomainTag::Code)
        && registry.get(&settings.code_scorer).is_none()
    {
        return Err(EvalError::ScorerUnavailable {
            name: settings.code_scorer.clone(),
        });
    }

    let mut runs = Vec::with_capacity(tasks.len());
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut completed = 0usize;
    let mut failed = 0usize;
    for task in tasks {
        let trajectory = execute_workflow(graph, task, provider, &settings.executor)?;
        let score = match (&trajectory.overall_status, &trajectory.final_answer) {
            (OverallStatus::Completed, Some(answer)) => {
                completed += 1;
                match task.domain_tag {
                    DomainTag::Math => score_exact_match(answer, &task.gold),
                    DomainTag::Qa => score_f1(answer, &task.gold),
                    DomainTag::Code => registry
                        .get(&settings.code_scorer)
                        .expect("checked above")
                        .score(answer, &task.gold),
                    DomainTag::Other => settings.default_scorer.apply(answer, &task.gold),
                }
            }
            _ => {
                failed += 1;
                0.0
            }
        };
        per_task.push(TaskScore {
            task_id: task.id.clone(),
            score,
        });
        runs.push(TaskRun {
            task: task.clone(),
            trajectory,
            score,
        });
    }
    let aggregate = per_task.iter().map(|t| t.score).sum::<f64>() / per_task.len() as f64;
    Ok(EvaluationOutcome {
        report: ScoreReport {
            per_task,
            aggregate,
            completed_count: completed,
            failed_count: failed,
        },
        runs,
    })
}

/// Parses a JSONL task set: one object per line with fields `id`, `input`,
/// `gold`, `domain_tag`.
pub fn parse_task_set(jsonl: &str) -> Result<Vec<TaskInstance>, serde_json::Error> {
    jsonl
        .lines()
        .filter(|line| !line.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
