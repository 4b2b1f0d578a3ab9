//! The outer search loop: a scored candidate pool, soft mixed-probability
//! selection over it, one debate per iteration, evaluation, and failure
//! feedback — until the iteration or dollar budget runs out.

mod run;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{DebateError, DebateParams};
use crate::evaluator::{DefaultScorer, EvalError};
use crate::memory::FeedbackError;
use crate::provider::{PriceTable, ProviderError, RetryPolicy};
use crate::workflow::{ValidationReport, WorkflowGraph};

pub use run::{optimize, OptimizeReport};

/// A scored member of the candidate pool. The score is set exactly once;
/// re-evaluation would create a new record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub graph: WorkflowGraph,
    pub score: f64,
    pub fingerprint: String,
    pub lineage: Lineage,
    /// Dollars spent evaluating this candidate (not its debate).
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    /// Fingerprint of the candidate the debate started from; None for the
    /// seed workflow.
    pub parent: Option<String>,
    pub iteration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    pub short_capacity: usize,
    pub long_capacity: usize,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            short_capacity: 8,
            long_capacity: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Exploration mass: probability weight given to the uniform limb.
    pub lambda: f64,
    /// Score sharpness in the softmax limb.
    pub alpha: f64,
    pub max_iterations: u64,
    pub budget_usd: Option<f64>,
    /// Task file path, relative to the run directory.
    pub validation_tasks: String,
    pub task_brief: String,
    pub models: Vec<String>,
    pub default_model: String,
    pub temperature: f64,
    pub default_scorer: DefaultScorer,
    /// Registry name of the scorer plug-in used for `code` tasks.
    pub code_scorer: String,
    /// How many imperfect trajectories get failure analysis per iteration.
    pub max_genes_per_iteration: usize,
    pub gene_char_budget: usize,
    pub debate: DebateParams,
    pub memory: MemoryParams,
    pub prices: PriceTable,
    pub retry: RetryPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            lambda: 0.2,
            alpha: 5.0,
            max_iterations: 10,
            budget_usd: None,
            validation_tasks: "tasks.jsonl".into(),
            task_brief: "General problem solving; answer with only the final answer.".into(),
            models: vec!["gpt-4o-mini".into()],
            default_model: "gpt-4o-mini".into(),
            temperature: 1.0,
            default_scorer: DefaultScorer::ExactMatch,
            code_scorer: "code".into(),
            max_genes_per_iteration: 3,
            gene_char_budget: 6000,
            debate: DebateParams::default(),
            memory: MemoryParams::default(),
            prices: PriceTable::default(),
            retry: RetryPolicy::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(OptimizeError::Config("lambda must be in [0, 1]".into()));
        }
        if self.alpha <= 0.0 || !self.alpha.is_finite() {
            return Err(OptimizeError::Config("alpha must be > 0".into()));
        }
        if self.models.is_empty() {
            return Err(OptimizeError::Config("models must be non-empty".into()));
        }
        if !self.models.contains(&self.default_model) {
            return Err(OptimizeError::Config(
                "default_model must be one of the configured models".into(),
            ));
        }
        if let Some(budget) = self.budget_usd {
            if budget < 0.0 || budget.is_nan() {
                return Err(OptimizeError::Config("budget_usd must be >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("seed workflow is invalid: {0}")]
    InvalidSeedWorkflow(ValidationReport),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("debate aborted: {0}")]
    Debate(#[from] DebateError),
    #[error("failure analysis aborted: {0}")]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("selection over an empty candidate pool")]
    EmptyPool,
}

/// The soft mixed selection distribution:
/// `P(i) = lambda / n + (1 - lambda) * exp(alpha * (s_i - s_max)) / sum_j exp(alpha * (s_j - s_max))`.
pub fn mixed_probabilities(
    scores: &[f64],
    lambda: f64,
    alpha: f64,
) -> Result<Vec<f64>, OptimizeError> {
    if scores.is_empty() {
        return Err(OptimizeError::EmptyPool);
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(OptimizeError::Config("lambda must be in [0, 1]".into()));
    }
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(OptimizeError::Config("alpha must be > 0".into()));
    }
    let n = scores.len() as f64;
    let s_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (alpha * (s - s_max)).exp()).collect();
    let denom: f64 = weights.iter().sum();
    Ok(weights
        .into_iter()
        .map(|w| lambda / n + (1.0 - lambda) * w / denom)
        .collect())
}

/// Draws an index from the mixed distribution. Reproducible given the same
/// RNG state and pool ordering.
pub fn select_candidate<R: Rng>(
    scores: &[f64],
    lambda: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<usize, OptimizeError> {
    let probabilities = mixed_probabilities(scores, lambda, alpha)?;
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return Ok(i);
        }
    }
    Ok(probabilities.len() - 1)
}
