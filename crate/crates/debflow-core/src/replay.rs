//! Replay: re-execute one iteration's trajectories from the responses
//! captured in the run log and verify the engine reproduces them byte for
//! byte (latency aside). Divergence means the engine's execution semantics
//! drifted from what the log recorded.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::executor::{execute_workflow, ExecutorOptions, NodeStatus, TaskInstance, Trajectory};
use crate::optimizer::{Candidate, RunConfig};
use crate::provider::{Matcher, ScriptEntry, ScriptedFailure, ScriptedProvider};
use crate::rundir::RunDir;
use crate::runlog::{read_events, RunEvent};
use crate::workflow::GraphError;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no trajectories recorded for iteration {0}")]
    NoTrajectories(u64),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayDivergence {
    pub task_id: String,
    pub node_id: Option<String>,
    pub field: String,
    pub logged: String,
    pub replayed: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub iteration: u64,
    pub tasks_replayed: usize,
    pub identical: bool,
    pub divergence: Option<ReplayDivergence>,
}

/// Builds a provider that serves exactly the responses a logged trajectory
/// recorded, keyed by each node's full rendered prompt.
fn provider_from_trajectory(trajectory: &Trajectory) -> ScriptedProvider {
    let mut entries = Vec::new();
    for record in &trajectory.records {
        match record.status {
            NodeStatus::Success => entries.push(ScriptEntry {
                matcher: Matcher::Substring(record.rendered_prompt.clone()),
                outcome: crate::provider::ScriptedOutcome::Respond {
                    response: record.response.clone(),
                    prompt_tokens: Some(record.prompt_tokens),
                    completion_tokens: Some(record.completion_tokens),
                },
            }),
            NodeStatus::ProviderError => {
                let message = record.error.clone().unwrap_or_default();
                let failure = if let Some(rest) = message.strip_prefix("transport error: ") {
                    ScriptedFailure::Transport(rest.to_string())
                } else if message == "rate limited" {
                    ScriptedFailure::RateLimited
                } else if let Some(rest) = message.strip_prefix("malformed response: ") {
                    ScriptedFailure::Malformed(rest.to_string())
                } else {
                    // Errors from other provider kinds replay as transport
                    // failures carrying the original text.
                    ScriptedFailure::Transport(
                        message
                            .strip_prefix("transport error: ")
                            .unwrap_or(&message)
                            .to_string(),
                    )
                };
                entries.push(ScriptEntry::fail(
                    Matcher::Substring(record.rendered_prompt.clone()),
                    failure,
                ));
            }
            // ParseError happens before any provider call; Skipped never calls.
            NodeStatus::ParseError | NodeStatus::Skipped => {}
        }
    }
    ScriptedProvider::new(entries)
}

fn first_divergence(
    task_id: &str,
    logged: &Trajectory,
    replayed: &Trajectory,
) -> Option<ReplayDivergence> {
    let diverge = |node: Option<&str>, field: &str, a: String, b: String| ReplayDivergence {
        task_id: task_id.to_string(),
        node_id: node.map(str::to_string),
        field: field.to_string(),
        logged: a,
        replayed: b,
    };
    for (lr, rr) in logged.records.iter().zip(replayed.records.iter()) {
        if lr.node_id != rr.node_id {
            return Some(diverge(
                Some(&lr.node_id),
                "node_id",
                lr.node_id.clone(),
                rr.node_id.clone(),
            ));
        }
        if lr.rendered_prompt != rr.rendered_prompt {
            return Some(diverge(
                Some(&lr.node_id),
                "rendered_prompt",
                lr.rendered_prompt.clone(),
                rr.rendered_prompt.clone(),
            ));
        }
        if lr.response != rr.response {
            return Some(diverge(
                Some(&lr.node_id),
                "response",
                lr.response.clone(),
                rr.response.clone(),
            ));
        }
        if lr.status != rr.status {
            return Some(diverge(
                Some(&lr.node_id),
                "status",
                format!("{:?}", lr.status),
                format!("{:?}", rr.status),
            ));
        }
        if lr.error != rr.error {
            return Some(diverge(
                Some(&lr.node_id),
                "error",
                format!("{:?}", lr.error),
                format!("{:?}", rr.error),
            ));
        }
        if (lr.prompt_tokens, lr.completion_tokens) != (rr.prompt_tokens, rr.completion_tokens) {
            return Some(diverge(
                Some(&lr.node_id),
                "token_counts",
                format!("{}/{}", lr.prompt_tokens, lr.completion_tokens),
                format!("{}/{}", rr.prompt_tokens, rr.completion_tokens),
            ));
        }
    }
    if logged.records.len() != replayed.records.len() {
        return Some(diverge(
            None,
            "record_count",
            logged.records.len().to_string(),
            replayed.records.len().to_string(),
        ));
    }
    if logged.final_answer != replayed.final_answer {
        return Some(diverge(
            None,
            "final_answer",
            format!("{:?}", logged.final_answer),
            format!("{:?}", replayed.final_answer),
        ));
    }
    if logged.overall_status != replayed.overall_status {
        return Some(diverge(
            None,
            "overall_status",
            format!("{:?}", logged.overall_status),
            format!("{:?}", replayed.overall_status),
        ));
    }
    None
}

/// Re-executes iteration `iteration` of the run in `run_dir` against
/// providers reconstructed from the log, comparing trajectories
/// byte-for-byte except latency.
pub fn replay_iteration(run_dir_path: &Path, iteration: u64) -> Result<ReplayReport, ReplayError> {
    let run_dir = RunDir::new(run_dir_path);
    let config: RunConfig = run_dir.read_json(&run_dir.config_path())?;
    let events = read_events(&run_dir.runlog_path())?;

    let logged: Vec<(&String, &f64, &Trajectory)> = events
        .iter()
        .filter_map(|e| match e {
            RunEvent::TrajectoryRecorded {
                iteration: it,
                fingerprint,
                score,
                trajectory,
                ..
            } if *it == iteration => Some((fingerprint, score, trajectory)),
            _ => None,
        })
        .collect();
    if logged.is_empty() {
        return Err(ReplayError::NoTrajectories(iteration));
    }

    let fingerprint = logged[0].0.clone();
    let candidate_path = run_dir.candidate_path(&fingerprint);
    if !candidate_path.exists() {
        return Err(ReplayError::MissingArtifact(
            candidate_path.display().to_string(),
        ));
    }
    let candidate: Candidate = run_dir.read_json(&candidate_path)?;

    let tasks_path = run_dir.root().join(&config.validation_tasks);
    let tasks_text = std::fs::read_to_string(&tasks_path)
        .map_err(|_| ReplayError::MissingArtifact(tasks_path.display().to_string()))?;
    let tasks = crate::evaluator::parse_task_set(&tasks_text)
        .map_err(|e| ReplayError::MissingArtifact(format!("tasks file unreadable: {e}")))?;
    let task_by_id = |id: &str| tasks.iter().find(|t| t.id == id);

    let options = ExecutorOptions {
        default_temperature: config.temperature,
        ..ExecutorOptions::default()
    };
    let mut replayed_count = 0usize;
    for (_, _, logged_trajectory) in &logged {
        let task: &TaskInstance = task_by_id(&logged_trajectory.task_id).ok_or_else(|| {
            ReplayError::MissingArtifact(format!(
                "task {} not present in {}",
                logged_trajectory.task_id,
                tasks_path.display()
            ))
        })?;
        let provider = provider_from_trajectory(logged_trajectory);
        let replayed = execute_workflow(&candidate.graph, task, &provider, &options)?;
        replayed_count += 1;
        if replayed.without_latency() != logged_trajectory.without_latency() {
            let divergence = first_divergence(&task.id, logged_trajectory, &replayed);
            return Ok(ReplayReport {
                iteration,
                tasks_replayed: replayed_count,
                identical: false,
                divergence,
            });
        }
    }
    Ok(ReplayReport {
        iteration,
        tasks_replayed: replayed_count,
        identical: true,
        divergence: None,
    })
}
