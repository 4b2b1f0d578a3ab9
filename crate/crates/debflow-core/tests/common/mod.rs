//! Shared fixtures for integration and acceptance tests: random graph
//! generation with cycle injection, a closure-backed provider, and a
//! debate script builder.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

use debflow_core::debate::Decision;
use debflow_core::provider::{
    ChatRequest, ChatResponse, Matcher, Provider, ProviderError, ScriptEntry,
};
use debflow_core::workflow::{OperatorKind, OperatorSpec, WorkflowGraph, TASK_INPUT};

/// Provider backed by a closure; handy for failure injection.
pub struct FnProvider<F>(pub F);

impl<F> Provider for FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (self.0)(request)
    }
    fn name(&self) -> &str {
        "fn"
    }
}

pub fn ok_response(content: &str) -> ChatResponse {
    ChatResponse {
        content: content.to_string(),
        prompt_tokens: 1,
        completion_tokens: 1,
        provider_latency_ms: 0,
    }
}

/// A node whose prompt is `node <id>: ...` with one placeholder per binding.
pub fn graph_node(id: &str, bindings: &[(String, String)]) -> OperatorSpec {
    let template_refs = bindings
        .iter()
        .map(|(name, _)| format!("{{{name}}}"))
        .collect::<Vec<_>>()
        .join(" ");
    OperatorSpec {
        id: id.to_string(),
        kind: OperatorKind::Custom,
        model_ref: "m".to_string(),
        prompt_template: format!("node {id}: {template_refs}"),
        tool_refs: Vec::new(),
        input_bindings: bindings.iter().cloned().collect(),
        output_name: format!("{id}_out"),
        temperature: None,
    }
}

/// Builds a structurally valid workflow over node ids `n00..n<k>` with the
/// given edge set (edges must respect index order to stay acyclic). Entry
/// nodes (indegree zero) bind the task input; other nodes bind every
/// predecessor's output.
pub fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> WorkflowGraph {
    let id = |i: usize| format!("n{i:02}");
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let preds: Vec<usize> = edges
            .iter()
            .filter(|(_, to)| *to == i)
            .map(|(f, _)| *f)
            .collect();
        let bindings: Vec<(String, String)> = if preds.is_empty() {
            vec![("input".to_string(), TASK_INPUT.to_string())]
        } else {
            preds
                .iter()
                .map(|p| (format!("in_{p:02}"), format!("{}_out", id(*p))))
                .collect()
        };
        nodes.push(graph_node(&id(i), &bindings));
    }
    let entry_ids: Vec<String> = (0..n)
        .filter(|i| edges.iter().all(|(_, to)| to != i))
        .map(id)
        .collect();
    WorkflowGraph {
        nodes,
        edges: edges.iter().map(|(f, t)| (id(*f), id(*t))).collect(),
        entry_ids,
        exit_id: id(n - 1),
    }
}

/// Random valid DAG with 1..=max_nodes nodes.
pub fn random_dag<R: Rng>(rng: &mut R, max_nodes: usize) -> WorkflowGraph {
    let n = rng.gen_range(1..=max_nodes);
    let mut edges = Vec::new();
    for from in 0..n {
        for to in (from + 1)..n {
            if rng.gen_bool(0.35) {
                edges.push((from, to));
            }
        }
    }
    graph_from_edges(n, &edges)
}

/// Deliberately breaks acyclicity: reverses one existing edge (keeping the
/// original) or, in an edgeless graph, adds a self-loop.
pub fn inject_cycle<R: Rng>(rng: &mut R, graph: &mut WorkflowGraph) {
    if graph.edges.is_empty() {
        let id = graph.nodes[0].id.clone();
        graph.edges.push((id.clone(), id));
    } else {
        let (from, to) = graph.edges[rng.gen_range(0..graph.edges.len())].clone();
        graph.edges.push((to, from));
    }
}

/// All nodes reachable from `start` by directed edges (excluding `start`).
pub fn descendants(graph: &WorkflowGraph, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start.to_string()];
    while let Some(current) = stack.pop() {
        for (from, to) in &graph.edges {
            if *from == current && seen.insert(to.clone()) {
                stack.push(to.clone());
            }
        }
    }
    seen
}

/// Every DAG over `n` labeled nodes with edges running low index → high
/// index. Covers all DAGs up to relabeling.
pub fn all_dags_up_to(n_max: usize) -> Vec<WorkflowGraph> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let subsets = 1usize << pairs.len();
        for mask in 0..subsets {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, e)| *e)
                .collect();
            out.push(graph_from_edges(n, &edges));
        }
    }
    out
}

// ----------------------------------------------------------------------
// Debate scripting
// ----------------------------------------------------------------------

pub fn keep_proposal_json(rationale: &str) -> String {
    serde_json::json!({ "rationale": rationale, "edits": [] }).to_string()
}

pub fn verdict_json(decision: Decision) -> String {
    let literal = match decision {
        Decision::ProponentOptimal => "ProponentOptimal",
        Decision::OpponentOptimal => "OpponentOptimal",
        Decision::Continue => "Continue",
    };
    serde_json::json!({"e_p": "p-critique", "e_o": "o-critique", "decision": literal}).to_string()
}

/// Script for a debate with `n` debaters whose judge follows `decisions`
/// round by round (empty-edit proposals throughout). Appends a final-judge
/// entry when every decision is Continue.
pub fn debate_script(n: u32, decisions: &[Decision]) -> Vec<ScriptEntry> {
    let mut entries = Vec::new();
    let mut terminated = false;
    for (round0, decision) in decisions.iter().enumerate() {
        let round = round0 + 1;
        for d in 0..n {
            entries.push(ScriptEntry::respond(
                Matcher::Substring("You are debater".into()),
                format!("r{round} argument {d}"),
            ));
        }
        entries.push(ScriptEntry::respond(
            Matcher::Substring("proponent synthesizer".into()),
            keep_proposal_json(&format!("p{round}")),
        ));
        entries.push(ScriptEntry::respond(
            Matcher::Substring("opponent synthesizer".into()),
            keep_proposal_json(&format!("o{round}")),
        ));
        entries.push(ScriptEntry::respond(
            Matcher::Substring("You are the judge".into()),
            verdict_json(*decision),
        ));
        if *decision != Decision::Continue {
            terminated = true;
            break;
        }
    }
    if !terminated {
        entries.push(ScriptEntry::respond(
            Matcher::Substring("You are the final judge".into()),
            serde_json::json!({"selection": "p1"}).to_string(),
        ));
    }
    entries
}

/// Expected provider calls for `debate_script` runs: rounds × (n + 3),
/// plus the final-judge call when no round terminated.
pub fn expected_debate_calls(n: u32, decisions: &[Decision]) -> (u32, u64) {
    let rounds = decisions
        .iter()
        .position(|d| *d != Decision::Continue)
        .map(|i| i as u32 + 1)
        .unwrap_or(decisions.len() as u32);
    let mut calls = u64::from(rounds) * (u64::from(n) + 3);
    if decisions.iter().all(|d| *d == Decision::Continue) {
        calls += 1;
    }
    (rounds, calls)
}
