//! Workflow intermediate representation.
//!
//! A workflow is a DAG of operator nodes. Each node is one LLM invocation:
//! a model, a prompt template, and bindings that wire the template's
//! placeholders to either the task input or an upstream node's output.
//! Graphs are immutable values; edits produce new graphs.
//!
//! The JSON form of [`WorkflowGraph`] (fields `nodes`, `edges`, `entry_ids`,
//! `exit_id`) is the on-disk workflow IR. See `docs/file-formats.md`.

mod edit;
mod fingerprint;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use edit::{apply_edit, apply_edits, EditRejected, WorkflowEdit};
pub use fingerprint::fingerprint;
pub use validate::{topological_order, validate_graph, GraphError, ValidationReport, Violation};

/// Binding source that refers to the task's input text rather than an
/// upstream node output.
pub const TASK_INPUT: &str = "task_input";

/// Semantic tag for an operator node. Kinds carry no executor behavior of
/// their own (behavior lives in the prompt); they classify nodes for
/// debate edits and failure-memory matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    #[serde(rename = "IO")]
    Io,
    Ensemble,
    ReviewAndRevise,
    Custom,
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OperatorKind::Io => "IO",
            OperatorKind::Ensemble => "Ensemble",
            OperatorKind::ReviewAndRevise => "ReviewAndRevise",
            OperatorKind::Custom => "Custom",
        };
        f.write_str(s)
    }
}

/// One operator node: a single LLM invocation with a model, a prompt
/// template, and named input bindings.
///
/// Binding values name either an upstream node's `output_name` or the
/// reserved source [`TASK_INPUT`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub id: String,
    pub kind: OperatorKind,
    pub model_ref: String,
    pub prompt_template: String,
    #[serde(default)]
    pub tool_refs: Vec<String>,
    #[serde(default)]
    pub input_bindings: BTreeMap<String, String>,
    pub output_name: String,
    /// Per-operator sampling temperature; falls back to the run default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

/// A directed acyclic graph of operators. `entry_ids` receive the task
/// input; the output of `exit_id` is the final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowGraph {
    pub nodes: Vec<OperatorSpec>,
    pub edges: Vec<(String, String)>,
    pub entry_ids: Vec<String>,
    pub exit_id: String,
}

impl WorkflowGraph {
    pub fn node(&self, id: &str) -> Option<&OperatorSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Direct predecessors of `id`, in edge order.
    pub fn predecessors(&self, id: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, to)| to == id)
            .map(|(from, _)| from.as_str())
            .collect()
    }

    /// The set of operator kinds present in the graph.
    pub fn kinds(&self) -> BTreeSet<OperatorKind> {
        self.nodes.iter().map(|n| n.kind).collect()
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("workflow graph serializes")
    }
}

/// The configured set of model names a graph's `model_ref`s must resolve
/// against. `Any` accepts every name; use it where no model configuration
/// applies (mostly tests and structural-only validation).
#[derive(Debug, Clone)]
pub enum ModelSet {
    Any,
    Named(BTreeSet<String>),
}

impl ModelSet {
    pub fn named<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ModelSet::Named(names.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, name: &str) -> bool {
        match self {
            ModelSet::Any => true,
            ModelSet::Named(set) => set.contains(name),
        }
    }
}

/// The degenerate single-node workflow that feeds the task input straight
/// into one LLM call. This is the search's starting point.
pub fn io_workflow(model_ref: &str, prompt_template: &str) -> WorkflowGraph {
    let mut bindings = BTreeMap::new();
    bindings.insert("input".to_string(), TASK_INPUT.to_string());
    WorkflowGraph {
        nodes: vec![OperatorSpec {
            id: "io".to_string(),
            kind: OperatorKind::Io,
            model_ref: model_ref.to_string(),
            prompt_template: prompt_template.to_string(),
            tool_refs: Vec::new(),
            input_bindings: bindings,
            output_name: "answer".to_string(),
            temperature: None,
        }],
        edges: Vec::new(),
        entry_ids: vec!["io".to_string()],
        exit_id: "io".to_string(),
    }
}

/// Default prompt for the IO seed workflow. It demands a bare final answer
/// so exact-match scoring has something well-defined to compare.
pub const IO_PROMPT: &str =
    "Solve the task below. Reply with only the final answer, nothing else.\n\n{input}";
