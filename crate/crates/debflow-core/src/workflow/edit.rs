//! Edits over workflow graphs: the concrete carrier for debate proposals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_graph, ModelSet, OperatorSpec, ValidationReport, Violation, WorkflowGraph};

/// A single structural or textual change to a graph.
///
/// `AddNode` can mark the new node as an entry and/or move the exit to it;
/// the edit-kind set stays closed while still letting an edit sequence
/// grow a graph past its current exit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum WorkflowEdit {
    AddNode {
        node: OperatorSpec,
        #[serde(default)]
        make_entry: bool,
        #[serde(default)]
        make_exit: bool,
    },
    RemoveNode {
        id: String,
    },
    AddEdge {
        from: String,
        to: String,
    },
    RemoveEdge {
        from: String,
        to: String,
    },
    ReplacePrompt {
        id: String,
        prompt_template: String,
        input_bindings: BTreeMap<String, String>,
    },
    ReplaceModel {
        id: String,
        model_ref: String,
    },
}

#[derive(Debug, Error, PartialEq)]
#[error("edit rejected: {report}")]
pub struct EditRejected {
    pub report: ValidationReport,
}

impl EditRejected {
    fn one(violation: Violation) -> Self {
        EditRejected {
            report: ValidationReport {
                ok: false,
                violations: vec![violation],
            },
        }
    }
}

/// Applies the structural change without validating the result.
fn apply_raw(graph: &mut WorkflowGraph, edit: &WorkflowEdit) -> Result<(), EditRejected> {
    match edit {
        WorkflowEdit::AddNode {
            node,
            make_entry,
            make_exit,
        } => {
            if graph.node(&node.id).is_some() {
                return Err(EditRejected::one(Violation::DuplicateNodeId {
                    id: node.id.clone(),
                }));
            }
            graph.nodes.push(node.clone());
            if *make_entry {
                graph.entry_ids.push(node.id.clone());
            }
            if *make_exit {
                graph.exit_id = node.id.clone();
            }
        }
        WorkflowEdit::RemoveNode { id } => {
            if graph.node(id).is_none() {
                return Err(EditRejected::one(Violation::UnknownEdgeEndpoint {
                    from: id.clone(),
                    to: id.clone(),
                    missing: id.clone(),
                }));
            }
            graph.nodes.retain(|n| n.id != *id);
            graph.edges.retain(|(from, to)| from != id && to != id);
            graph.entry_ids.retain(|e| e != id);
        }
        WorkflowEdit::AddEdge { from, to } => {
            for endpoint in [from, to] {
                if graph.node(endpoint).is_none() {
                    return Err(EditRejected::one(Violation::UnknownEdgeEndpoint {
                        from: from.clone(),
                        to: to.clone(),
                        missing: endpoint.clone(),
                    }));
                }
            }
            if graph.edges.iter().any(|(f, t)| f == from && t == to) {
                // Re-adding an existing edge is a no-op rather than an error.
                return Ok(());
            }
            graph.edges.push((from.clone(), to.clone()));
        }
        WorkflowEdit::RemoveEdge { from, to } => {
            let before = graph.edges.len();
            graph.edges.retain(|(f, t)| !(f == from && t == to));
            if graph.edges.len() == before {
                return Err(EditRejected::one(Violation::UnknownEdgeEndpoint {
                    from: from.clone(),
                    to: to.clone(),
                    missing: format!("{from}->{to}"),
                }));
            }
        }
        WorkflowEdit::ReplacePrompt {
            id,
            prompt_template,
            input_bindings,
        } => {
            let node = find_mut(graph, id)?;
            node.prompt_template = prompt_template.clone();
            node.input_bindings = input_bindings.clone();
        }
        WorkflowEdit::ReplaceModel { id, model_ref } => {
            let node = find_mut(graph, id)?;
            node.model_ref = model_ref.clone();
        }
    }
    Ok(())
}

fn find_mut<'g>(
    graph: &'g mut WorkflowGraph,
    id: &str,
) -> Result<&'g mut OperatorSpec, EditRejected> {
    graph.nodes.iter_mut().find(|n| n.id == id).ok_or_else(|| {
        EditRejected::one(Violation::UnknownEdgeEndpoint {
            from: id.to_string(),
            to: id.to_string(),
            missing: id.to_string(),
        })
    })
}

/// Applies one edit and revalidates. The original graph is untouched; the
/// result is returned only if every invariant still holds.
pub fn apply_edit(
    graph: &WorkflowGraph,
    edit: &WorkflowEdit,
    models: &ModelSet,
) -> Result<WorkflowGraph, EditRejected> {
    apply_edits(graph, std::slice::from_ref(edit), models)
}

/// Applies a sequence of edits, validating only the final graph. Edit
/// sequences routinely pass through transiently unsatisfied states (add a
/// node whose bindings are wired up by a later AddEdge), so per-step
/// validation would reject legitimate proposals.
pub fn apply_edits(
    graph: &WorkflowGraph,
    edits: &[WorkflowEdit],
    models: &ModelSet,
) -> Result<WorkflowGraph, EditRejected> {
    let mut next = graph.clone();
    for edit in edits {
        apply_raw(&mut next, edit)?;
    }
    let report = validate_graph(&next, models);
    if !report.ok {
        return Err(EditRejected { report });
    }
    Ok(next)
}
