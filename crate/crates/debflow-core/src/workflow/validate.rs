//! Graph validation and topological ordering.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::placeholders;

use super::{ModelSet, WorkflowGraph, TASK_INPUT};

/// A single invariant violation, naming the offending node or edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    DuplicateNodeId {
        id: String,
    },
    UnknownEdgeEndpoint {
        from: String,
        to: String,
        missing: String,
    },
    CycleDetected {
        ids: Vec<String>,
    },
    MissingExit {
        exit_id: String,
    },
    EmptyEntryIds,
    UnknownEntryId {
        id: String,
    },
    UnboundPlaceholder {
        node_id: String,
        placeholder: String,
    },
    UnknownModel {
        node_id: String,
        model_ref: String,
    },
    UnsatisfiedBinding {
        node_id: String,
        placeholder: String,
        source: String,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DuplicateNodeId { id } => write!(f, "duplicate node id `{id}`"),
            Violation::UnknownEdgeEndpoint { from, to, missing } => {
                write!(f, "edge ({from}, {to}) references unknown node `{missing}`")
            }
            Violation::CycleDetected { ids } => {
                write!(f, "cycle detected involving nodes [{}]", ids.join(", "))
            }
            Violation::MissingExit { exit_id } => {
                write!(f, "exit node `{exit_id}` does not exist")
            }
            Violation::EmptyEntryIds => write!(f, "entry_ids is empty"),
            Violation::UnknownEntryId { id } => write!(f, "entry node `{id}` does not exist"),
            Violation::UnboundPlaceholder {
                node_id,
                placeholder,
            } => {
                write!(
                    f,
                    "node `{node_id}` has no binding for placeholder `{placeholder}`"
                )
            }
            Violation::UnknownModel { node_id, model_ref } => {
                write!(
                    f,
                    "node `{node_id}` references unconfigured model `{model_ref}`"
                )
            }
            Violation::UnsatisfiedBinding {
                node_id,
                placeholder,
                source,
            } => write!(
                f,
                "node `{node_id}` binds `{placeholder}` to upstream output `{source}` \
                 but no incoming edge provides it"
            ),
        }
    }
}

/// Outcome of validating a graph. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is invalid: {0}")]
    Invalid(ValidationReport),
}

/// Checks every graph invariant: unique node ids, well-formed edges,
/// acyclicity, entry/exit existence, placeholders fully bound, bindings
/// satisfied by incoming edges (or [`TASK_INPUT`]), and model references
/// resolving against `models`.
pub fn validate_graph(graph: &WorkflowGraph, models: &ModelSet) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for node in &graph.nodes {
        if !seen.insert(node.id.as_str()) {
            violations.push(Violation::DuplicateNodeId {
                id: node.id.clone(),
            });
        }
    }
    let ids: BTreeSet<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();

    for (from, to) in &graph.edges {
        for endpoint in [from, to] {
            if !ids.contains(endpoint.as_str()) {
                violations.push(Violation::UnknownEdgeEndpoint {
                    from: from.clone(),
                    to: to.clone(),
                    missing: endpoint.clone(),
                });
            }
        }
    }

    if !ids.contains(graph.exit_id.as_str()) {
        violations.push(Violation::MissingExit {
            exit_id: graph.exit_id.clone(),
        });
    }
    if graph.entry_ids.is_empty() {
        violations.push(Violation::EmptyEntryIds);
    }
    for entry in &graph.entry_ids {
        if !ids.contains(entry.as_str()) {
            violations.push(Violation::UnknownEntryId { id: entry.clone() });
        }
    }

    if let Some(cycle_ids) = find_cycle_nodes(graph) {
        violations.push(Violation::CycleDetected { ids: cycle_ids });
    }

    for node in &graph.nodes {
        for placeholder in placeholders(&node.prompt_template) {
            if !node.input_bindings.contains_key(&placeholder) {
                violations.push(Violation::UnboundPlaceholder {
                    node_id: node.id.clone(),
                    placeholder,
                });
            }
        }
        if !models.contains(&node.model_ref) {
            violations.push(Violation::UnknownModel {
                node_id: node.id.clone(),
                model_ref: node.model_ref.clone(),
            });
        }
        let upstream_outputs: BTreeSet<&str> = graph
            .predecessors(&node.id)
            .into_iter()
            .filter_map(|pred| graph.node(pred))
            .map(|pred| pred.output_name.as_str())
            .collect();
        for (placeholder, source) in &node.input_bindings {
            if source == TASK_INPUT {
                continue;
            }
            if !upstream_outputs.contains(source.as_str()) {
                violations.push(Violation::UnsatisfiedBinding {
                    node_id: node.id.clone(),
                    placeholder: placeholder.clone(),
                    source: source.clone(),
                });
            }
        }
    }

    ValidationReport::from_violations(violations)
}

/// Kahn's algorithm over node ids. Returns the sorted ids of every node
/// left unprocessed (all of them sit on or downstream of a cycle), or
/// `None` when the edge relation is acyclic.
fn find_cycle_nodes(graph: &WorkflowGraph) -> Option<Vec<String>> {
    let ids: BTreeSet<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
    let mut out_edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, to) in &graph.edges {
        if !ids.contains(from.as_str()) || !ids.contains(to.as_str()) {
            continue; // reported separately
        }
        *indegree.get_mut(to.as_str()).unwrap() += 1;
        out_edges
            .entry(from.as_str())
            .or_default()
            .push(to.as_str());
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut processed = 0usize;
    while let Some(id) = ready.pop() {
        processed += 1;
        if let Some(next) = out_edges.get(id) {
            for to in next {
                let d = indegree.get_mut(to).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(to);
                }
            }
        }
        indegree.remove(id);
    }
    if processed == ids.len() {
        None
    } else {
        Some(indegree.keys().map(|id| id.to_string()).collect())
    }
}

/// Deterministic topological order: every edge (u, v) places u before v,
/// with ties broken by lexicographic node id. Rejects structurally invalid
/// graphs (duplicate ids, dangling edges, cycles).
pub fn topological_order(graph: &WorkflowGraph) -> Result<Vec<String>, GraphError> {
    let mut structural = Vec::new();
    let mut seen = BTreeSet::new();
    for node in &graph.nodes {
        if !seen.insert(node.id.as_str()) {
            structural.push(Violation::DuplicateNodeId {
                id: node.id.clone(),
            });
        }
    }
    for (from, to) in &graph.edges {
        for endpoint in [from, to] {
            if !seen.contains(endpoint.as_str()) {
                structural.push(Violation::UnknownEdgeEndpoint {
                    from: from.clone(),
                    to: to.clone(),
                    missing: endpoint.clone(),
                });
            }
        }
    }
    if !structural.is_empty() {
        return Err(GraphError::Invalid(ValidationReport::from_violations(
            structural,
        )));
    }

    let mut indegree: BTreeMap<&str, usize> =
        graph.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
    let mut out_edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, to) in &graph.edges {
        *indegree.get_mut(to.as_str()).unwrap() += 1;
        out_edges
            .entry(from.as_str())
            .or_default()
            .push(to.as_str());
    }

    let mut heap: BinaryHeap<Reverse<&str>> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| Reverse(*id))
        .collect();
    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(Reverse(id)) = heap.pop() {
        order.push(id.to_string());
        if let Some(next) = out_edges.get(id) {
            for to in next {
                let d = indegree.get_mut(to).unwrap();
                *d -= 1;
                if *d == 0 {
                    heap.push(Reverse(*to));
                }
            }
        }
    }
    if order.len() != graph.nodes.len() {
        let leftover: Vec<String> = {
            let done: BTreeSet<&str> = order.iter().map(|s| s.as_str()).collect();
            graph
                .nodes
                .iter()
                .map(|n| n.id.as_str())
                .filter(|id| !done.contains(id))
                .map(|id| id.to_string())
                .collect()
        };
        return Err(GraphError::Invalid(ValidationReport::from_violations(
            vec![Violation::CycleDetected { ids: leftover }],
        )));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::{io_workflow, OperatorKind, OperatorSpec, IO_PROMPT};

    pub(crate) fn plain_node(id: &str, bindings: &[(&str, &str)]) -> OperatorSpec {
        let template = bindings
            .iter()
            .map(|(name, _)| format!("{{{name}}}"))
            .collect::<Vec<_>>()
            .join(" ");
        OperatorSpec {
            id: id.to_string(),
            kind: OperatorKind::Custom,
            model_ref: "m".to_string(),
            prompt_template: format!("node {id}: {template}"),
            tool_refs: Vec::new(),
            input_bindings: bindings
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            output_name: format!("{id}_out"),
            temperature: None,
        }
    }

    fn diamond() -> WorkflowGraph {
        // A feeds B and C; both feed D.
        WorkflowGraph {
            nodes: vec![
                plain_node("A", &[("input", TASK_INPUT)]),
                plain_node("B", &[("a", "A_out")]),
                plain_node("C", &[("a", "A_out")]),
                plain_node("D", &[("b", "B_out"), ("c", "C_out")]),
            ],
            edges: vec![
                ("A".into(), "B".into()),
                ("A".into(), "C".into()),
                ("B".into(), "D".into()),
                ("C".into(), "D".into()),
            ],
            entry_ids: vec!["A".into()],
            exit_id: "D".into(),
        }
    }

    #[test]
    fn single_io_node_is_valid() {
        let g = io_workflow("m", IO_PROMPT);
        let report = validate_graph(&g, &ModelSet::named(["m"]));
        assert!(report.ok, "{report}");
    }

    #[test]
    fn self_loop_reports_cycle_naming_the_node() {
        let mut g = io_workflow("m", IO_PROMPT);
        g.nodes[0].id = "A".into();
        g.entry_ids = vec!["A".into()];
        g.exit_id = "A".into();
        g.edges.push(("A".into(), "A".into()));
        let report = validate_graph(&g, &ModelSet::Any);
        assert!(!report.ok);
        assert!(report.violations.iter().any(
            |v| matches!(v, Violation::CycleDetected { ids } if ids.contains(&"A".to_string()))
        ));
    }

    #[test]
    fn diamond_is_valid() {
        let report = validate_graph(&diamond(), &ModelSet::Any);
        assert!(report.ok, "{report}");
    }

    #[test]
    fn unknown_model_is_flagged() {
        let g = io_workflow("mystery", IO_PROMPT);
        let report = validate_graph(&g, &ModelSet::named(["m"]));
        assert!(!report.ok);
        assert!(matches!(
            &report.violations[0],
            Violation::UnknownModel { node_id, model_ref }
                if node_id == "io" && model_ref == "mystery"
        ));
    }

    #[test]
    fn unsatisfied_binding_is_flagged() {
        let mut g = diamond();
        g.edges.retain(|(from, to)| !(from == "B" && to == "D"));
        let report = validate_graph(&g, &ModelSet::Any);
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::UnsatisfiedBinding { node_id, source, .. }
                if node_id == "D" && source == "B_out"
        )));
    }

    #[test]
    fn unbound_placeholder_is_flagged() {
        let mut g = io_workflow("m", IO_PROMPT);
        g.nodes[0].input_bindings.clear();
        let report = validate_graph(&g, &ModelSet::Any);
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::UnboundPlaceholder { placeholder, .. } if placeholder == "input"
        )));
    }

    #[test]
    fn topo_single_node() {
        let g = io_workflow("m", IO_PROMPT);
        assert_eq!(topological_order(&g).unwrap(), vec!["io".to_string()]);
    }

    #[test]
    fn topo_chain() {
        let g = WorkflowGraph {
            nodes: vec![
                plain_node("A", &[("input", TASK_INPUT)]),
                plain_node("B", &[("a", "A_out")]),
                plain_node("C", &[("b", "B_out")]),
            ],
            edges: vec![("A".into(), "B".into()), ("B".into(), "C".into())],
            entry_ids: vec!["A".into()],
            exit_id: "C".into(),
        };
        assert_eq!(topological_order(&g).unwrap(), vec!["A", "B", "C"]);
    }

    /// Brute-force enumeration of every valid topological order, used as the
    /// oracle for the deterministic tie-break rule.
    fn all_topological_orders(graph: &WorkflowGraph) -> Vec<Vec<String>> {
        fn recurse(
            remaining: &mut Vec<String>,
            edges: &[(String, String)],
            prefix: &mut Vec<String>,
            out: &mut Vec<Vec<String>>,
        ) {
            if remaining.is_empty() {
                out.push(prefix.clone());
                return;
            }
            let candidates: Vec<String> = remaining
                .iter()
                .filter(|id| {
                    edges
                        .iter()
                        .all(|(from, to)| to != *id || !remaining.contains(from))
                })
                .cloned()
                .collect();
            for c in candidates {
                let idx = remaining.iter().position(|x| *x == c).unwrap();
                remaining.remove(idx);
                prefix.push(c.clone());
                recurse(remaining, edges, prefix, out);
                prefix.pop();
                remaining.insert(idx, c);
            }
        }
        let mut remaining: Vec<String> = graph.nodes.iter().map(|n| n.id.clone()).collect();
        let mut out = Vec::new();
        recurse(&mut remaining, &graph.edges, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn topo_diamond_is_lexicographically_least_of_all_valid_orders() {
        let g = diamond();
        let mut oracle = all_topological_orders(&g);
        oracle.sort();
        // Diamond admits exactly two orders: ABCD and ACBD.
        assert_eq!(oracle.len(), 2);
        let got = topological_order(&g).unwrap();
        assert_eq!(got, oracle[0]);
        assert_eq!(got, vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn topo_rejects_cycle() {
        let mut g = diamond();
        g.edges.push(("D".into(), "A".into()));
        assert!(topological_order(&g).is_err());
    }
}
