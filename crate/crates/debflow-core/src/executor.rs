//! Workflow execution: runs a graph on one task in topological order and
//! captures a full trajectory for scoring and failure analysis.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::provider::{ChatMessage, ChatRequest, Provider};
use crate::template;
use crate::workflow::{topological_order, GraphError, OperatorSpec, WorkflowGraph, TASK_INPUT};

pub use crate::template::RenderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Math,
    Qa,
    Code,
    Other,
}

/// One problem with a reference answer. `gold` is visible only to the
/// evaluator and the failure-analysis agent, never to the workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub input: String,
    pub gold: String,
    pub domain_tag: DomainTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeStatus {
    Success,
    ProviderError,
    ParseError,
    Skipped,
}

/// Execution record of a single node: what was sent, what came back, and
/// how it ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: String,
    pub rendered_prompt: String,
    pub response: String,
    pub status: NodeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverallStatus {
    Completed,
    Failed,
}

/// Per-node execution record of one workflow run on one task. Records are
/// stored in topological order regardless of completion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub graph_fingerprint: String,
    pub records: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    pub overall_status: OverallStatus,
}

impl Trajectory {
    /// Copy with every latency zeroed, for byte-comparisons that must
    /// ignore timing.
    pub fn without_latency(&self) -> Trajectory {
        let mut t = self.clone();
        for record in &mut t.records {
            record.latency_ms = 0;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    /// Deterministic: one node at a time in topological order.
    #[default]
    Sequential,
    /// Independent branches run concurrently, level by level. Trajectory
    /// assembly stays order-stable.
    Parallel,
}

#[derive(Debug, Clone, Copy)]
pub struct ExecutorOptions {
    pub mode: ExecutionMode,
    /// Used when an operator does not set its own temperature.
    pub default_temperature: f64,
}

impl Default for ExecutorOptions {
    fn default() -> Self {
        ExecutorOptions {
            mode: ExecutionMode::Sequential,
            default_temperature: 1.0,
        }
    }
}

/// Substitutes bindings into a template. Re-exported surface over the
/// template engine; fails with the offending placeholder's name.
pub fn render_prompt(
    template: &str,
    bindings: &BTreeMap<String, String>,
) -> Result<String, RenderError> {
    template::render(template, bindings)
}

/// Resolves one node's placeholder bindings against the task input and the
/// responses of its predecessors. Among several predecessors exposing the
/// same output name, the lexicographically smallest node id wins.
fn resolve_bindings(
    node: &OperatorSpec,
    graph: &WorkflowGraph,
    task: &TaskInstance,
    responses: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, String>, RenderError> {
    let mut preds: Vec<&str> = graph.predecessors(&node.id);
    preds.sort_unstable();
    let mut resolved = BTreeMap::new();
    for (placeholder, source) in &node.input_bindings {
        if source == TASK_INPUT {
            resolved.insert(placeholder.clone(), task.input.clone());
            continue;
        }
        let supplier = preds.iter().find(|pred| {
            graph
                .node(pred)
                .map(|n| n.output_name == *source)
                .unwrap_or(false)
        });
        match supplier.and_then(|pred| responses.get(*pred)) {
            Some(text) => {
                resolved.insert(placeholder.clone(), text.clone());
            }
            None => return Err(RenderError::MissingBinding(placeholder.clone())),
        }
    }
    Ok(resolved)
}

fn run_node(
    node: &OperatorSpec,
    graph: &WorkflowGraph,
    task: &TaskInstance,
    responses: &BTreeMap<String, String>,
    provider: &dyn Provider,
    options: &ExecutorOptions,
) -> NodeRecord {
    let bindings = match resolve_bindings(node, graph, task, responses) {
        Ok(b) => b,
        Err(e) => {
            return NodeRecord {
                node_id: node.id.clone(),
                rendered_prompt: String::new(),
                response: String::new(),
                status: NodeStatus::ParseError,
                error: Some(e.to_string()),
                prompt_tokens: 0,
                completion_tokens: 0,
                latency_ms: 0,
            }
        }
    };
    let rendered = match render_prompt(&node.prompt_template, &bindings) {
        Ok(r) => r,
        Err(e) => {
            return NodeRecord {
                node_id: node.id.clone(),
                rendered_prompt: String::new(),
                response: String::new(),
                status: NodeStatus::ParseError,
                error: Some(e.to_string()),
                prompt_tokens: 0,
                completion_tokens: 0,
                latency_ms: 0,
            }
        }
    };
    let request = ChatRequest::new(&node.model_ref, vec![ChatMessage::user(rendered.clone())])
        .with_temperature(node.temperature.unwrap_or(options.default_temperature));
    let started = Instant::now();
    match provider.complete(&request) {
        Ok(resp) => NodeRecord {
            node_id: node.id.clone(),
            rendered_prompt: rendered,
            response: resp.content,
            status: NodeStatus::Success,
            error: None,
            prompt_tokens: resp.prompt_tokens,
            completion_tokens: resp.completion_tokens,
            latency_ms: started.elapsed().as_millis() as u64,
        },
        Err(e) => NodeRecord {
            node_id: node.id.clone(),
            rendered_prompt: rendered,
            response: String::new(),
            status: NodeStatus::ProviderError,
            error: Some(e.to_string()),
            prompt_tokens: 0,
            completion_tokens: 0,
            latency_ms: started.elapsed().as_millis() as u64,
        },
    }
}

fn skipped_record(node_id: &str) -> NodeRecord {
    NodeRecord {
        node_id: node_id.to_string(),
        rendered_prompt: String::new(),
        response: String::new(),
        status: NodeStatus::Skipped,
        error: None,
        prompt_tokens: 0,
        completion_tokens: 0,
        latency_ms: 0,
    }
}

/// Runs the graph on one task. Every node yields exactly one record; nodes
/// downstream of a failure are `Skipped`; node failures never propagate as
/// errors — they land in the trajectory. Fails only on a structurally
/// invalid graph (which callers are expected to have validated already).
pub fn execute_workflow(
    graph: &WorkflowGraph,
    task: &TaskInstance,
    provider: &dyn Provider,
    options: &ExecutorOptions,
) -> Result<Trajectory, GraphError> {
    let order = topological_order(graph)?;
    let mut records_by_id: BTreeMap<String, NodeRecord> = BTreeMap::new();
    let mut responses: BTreeMap<String, String> = BTreeMap::new();

    let levels = match options.mode {
        ExecutionMode::Sequential => order.iter().map(|id| vec![id.clone()]).collect::<Vec<_>>(),
        ExecutionMode::Parallel => level_schedule(graph, &order),
    };

    for level in levels {
        let mut runnable = Vec::new();
        for id in level {
            let upstream_ok = graph.predecessors(&id).iter().all(|pred| {
                records_by_id
                    .get(*pred)
                    .map(|r| r.status == NodeStatus::Success)
                    .unwrap_or(false)
            });
            if upstream_ok {
                runnable.push(id);
            } else {
                records_by_id.insert(id.clone(), skipped_record(&id));
            }
        }
        if runnable.is_empty() {
            continue;
        }
        if runnable.len() == 1 {
            let id = &runnable[0];
            let node = graph.node(id).expect("topological order yields known ids");
            let record = run_node(node, graph, task, &responses, provider, options);
            if record.status == NodeStatus::Success {
                responses.insert(id.clone(), record.response.clone());
            }
            records_by_id.insert(id.clone(), record);
        } else {
            let produced: Vec<NodeRecord> = std::thread::scope(|scope| {
                let handles: Vec<_> = runnable
                    .iter()
                    .map(|id| {
                        let node = graph.node(id).expect("known id");
                        let responses = &responses;
                        scope.spawn(move || {
                            run_node(node, graph, task, responses, provider, options)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("node thread"))
                    .collect()
            });
            for record in produced {
                if record.status == NodeStatus::Success {
                    responses.insert(record.node_id.clone(), record.response.clone());
                }
                records_by_id.insert(record.node_id.clone(), record);
            }
        }
    }

    let records: Vec<NodeRecord> = order
        .iter()
        .map(|id| records_by_id.remove(id).expect("one record per node"))
        .collect();
    let exit = records
        .iter()
        .find(|r| r.node_id == graph.exit_id)
        .expect("exit node has a record");
    let (overall_status, final_answer) = if exit.status == NodeStatus::Success {
        (OverallStatus::Completed, Some(exit.response.clone()))
    } else {
        (OverallStatus::Failed, None)
    };
    Ok(Trajectory {
        task_id: task.id.clone(),
        graph_fingerprint: graph.fingerprint(),
        records,
        final_answer,
        overall_status,
    })
}

/// Groups the topological order into depth levels: a node's level is one
/// past its deepest predecessor. Nodes within a level are independent.
fn level_schedule(graph: &WorkflowGraph, order: &[String]) -> Vec<Vec<String>> {
    let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
    let mut levels: Vec<Vec<String>> = Vec::new();
    for id in order {
        let d = graph
            .predecessors(id)
            .iter()
            .map(|pred| depth.get(*pred).copied().unwrap_or(0) + 1)
            .max()
            .unwrap_or(0);
        depth.insert(id.as_str(), d);
        if levels.len() <= d {
            levels.resize_with(d + 1, Vec::new);
        }
        levels[d].push(id.clone());
    }
    levels
}
