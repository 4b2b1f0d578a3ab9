//! Fine-grained failure feedback: dissect failed trajectories into genes,
//! refine them against long/short memory, serve the dominant gene to the
//! next debate.
//!
//! Matching is categorical (error category + operator-kind overlap), not
//! embedding-based. Memory is mutated only between optimization iterations
//! by a single owner.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{NodeStatus, OverallStatus, TaskInstance, Trajectory};
use crate::provider::{ChatMessage, ChatRequest, Provider, ProviderError};
use crate::structured::parse_structured;
use crate::template::{render, RenderError};
use crate::workflow::{OperatorKind, WorkflowGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCategory {
    ProviderFailure,
    ParseFailure,
    WrongAnswer,
    StructuralGap,
}

impl ErrorCategory {
    fn from_literal(s: &str) -> Option<Self> {
        match s {
            "ProviderFailure" => Some(ErrorCategory::ProviderFailure),
            "ParseFailure" => Some(ErrorCategory::ParseFailure),
            "WrongAnswer" => Some(ErrorCategory::WrongAnswer),
            "StructuralGap" => Some(ErrorCategory::StructuralGap),
            _ => None,
        }
    }
}

/// A structured failure-analysis record. `failing_node_kinds` carries the
/// operator kinds of the failing nodes so recurrence and workflow matching
/// stay resolvable after the source graph is gone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub id: String,
    pub source_task_id: String,
    pub failing_node_ids: Vec<String>,
    pub failing_node_kinds: Vec<OperatorKind>,
    pub error_category: ErrorCategory,
    pub diagnosis: String,
    pub directive: String,
    pub created_at_iteration: u64,
}

impl Gene {
    /// Rendering used inside debate and refinement prompts.
    pub fn prompt_text(&self) -> String {
        format!(
            "category: {:?}\nfailing nodes: [{}]\ndiagnosis: {}\ndirective: {}",
            self.error_category,
            self.failing_node_ids.join(", "),
            self.diagnosis,
            self.directive
        )
    }

    fn kind_overlap(&self, kinds: &BTreeSet<OperatorKind>) -> bool {
        self.failing_node_kinds.iter().any(|k| kinds.contains(k))
    }
}

/// Short-term ring of recent genes plus a capped long-term list of genes
/// promoted by recurrence (same category and overlapping node kinds seen
/// at least twice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    pub short_term: VecDeque<Gene>,
    pub long_term: Vec<Gene>,
    pub short_capacity: usize,
    pub long_capacity: usize,
}

impl Default for MemoryStore {
    fn default() -> Self {
        MemoryStore::new(8, 32)
    }
}

impl MemoryStore {
    pub fn new(short_capacity: usize, long_capacity: usize) -> Self {
        MemoryStore {
            short_term: VecDeque::new(),
            long_term: Vec::new(),
            short_capacity,
            long_capacity,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.short_term.is_empty() && self.long_term.is_empty()
    }

    fn matches(&self, gene: &Gene) -> usize {
        let kinds: BTreeSet<OperatorKind> = gene.failing_node_kinds.iter().copied().collect();
        self.short_term
            .iter()
            .chain(self.long_term.iter())
            .filter(|g| g.error_category == gene.error_category && g.kind_overlap(&kinds))
            .count()
    }

    /// Appends to short-term (evicting the oldest past capacity), then runs
    /// the promotion check against everything remembered.
    pub fn store_gene(&mut self, gene: Gene) {
        self.short_term.push_back(gene.clone());
        while self.short_term.len() > self.short_capacity {
            self.short_term.pop_front();
        }
        let recurrences = self.matches(&gene);
        if recurrences >= 2 && !self.long_term.iter().any(|g| g.id == gene.id) {
            self.long_term.push(gene);
            while self.long_term.len() > self.long_capacity {
                self.long_term.remove(0);
            }
        }
    }

    /// The most recent gene whose failing node kinds intersect the
    /// workflow's operator kinds. Short-term holds the newest genes, so it
    /// is scanned first, newest first.
    pub fn dominant_gene_for(&self, workflow: &WorkflowGraph) -> Option<&Gene> {
        let kinds = workflow.kinds();
        self.short_term
            .iter()
            .rev()
            .find(|g| g.kind_overlap(&kinds))
            .or_else(|| self.long_term.iter().rev().find(|g| g.kind_overlap(&kinds)))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("memory serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("nothing to analyze: trajectory completed with a perfect score")]
    NothingToAnalyze,
    #[error("gene parse failure: {reason}")]
    GeneParseFailure { reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Template(#[from] RenderError),
}

pub struct FeedbackSettings {
    pub model: String,
    pub temperature: f64,
    /// Rough cap on how much trajectory text the analysis prompt carries.
    pub trajectory_char_budget: usize,
}

impl FeedbackSettings {
    pub fn new(model: impl Into<String>) -> Self {
        FeedbackSettings {
            model: model.into(),
            temperature: 1.0,
            trajectory_char_budget: 6000,
        }
    }
}

#[derive(Deserialize)]
struct RawGene {
    failing_node_ids: Vec<String>,
    error_category: String,
    diagnosis: String,
    directive: String,
}

#[derive(Deserialize)]
struct RawRefined {
    error_category: String,
    diagnosis: String,
    directive: String,
}

fn truncate(text: &str, limit: usize) -> String {
    if text.chars().count() <= limit {
        return text.to_string();
    }
    let head: String = text.chars().take(limit).collect();
    format!("{head}…[truncated]")
}

fn trajectory_text(trajectory: &Trajectory, char_budget: usize) -> String {
    let per_record = (char_budget / trajectory.records.len().max(1)).max(200);
    trajectory
        .records
        .iter()
        .map(|r| {
            let mut block = format!(
                "node {} [{:?}]\n  prompt: {}\n",
                r.node_id,
                r.status,
                truncate(&r.rendered_prompt, per_record / 2)
            );
            match r.status {
                NodeStatus::Success => {
                    block.push_str(&format!(
                        "  response: {}\n",
                        truncate(&r.response, per_record / 2)
                    ));
                }
                _ => {
                    let detail = r.error.as_deref().unwrap_or("(no detail)");
                    block.push_str(&format!("  error: {}\n", truncate(detail, per_record / 2)));
                }
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn validate_raw_gene(raw: &RawGene, valid_ids: &BTreeSet<&str>) -> Result<ErrorCategory, String> {
    let category = ErrorCategory::from_literal(&raw.error_category).ok_or_else(|| {
        format!(
            "error_category `{}` is not one of the allowed literals",
            raw.error_category
        )
    })?;
    if raw.directive.trim().is_empty() {
        return Err("directive must be non-empty".to_string());
    }
    for id in &raw.failing_node_ids {
        if !valid_ids.contains(id.as_str()) {
            return Err(format!(
                "failing node id `{id}` is not in the trajectory; valid ids: [{}]",
                valid_ids.iter().copied().collect::<Vec<_>>().join(", ")
            ));
        }
    }
    Ok(category)
}

/// One LLM call over the (truncated) trajectory produces the initial gene.
/// An invalid reply gets a single repair re-ask carrying the validation
/// errors; a second failure is `GeneParseFailure`.
#[allow(clippy::too_many_arguments)]
pub fn extract_initial_gene(
    trajectory: &Trajectory,
    graph: &WorkflowGraph,
    task: &TaskInstance,
    score: f64,
    iteration: u64,
    provider: &dyn Provider,
    extract_template: &str,
    settings: &FeedbackSettings,
) -> Result<Gene, FeedbackError> {
    if trajectory.overall_status == OverallStatus::Completed && score >= 1.0 {
        return Err(FeedbackError::NothingToAnalyze);
    }
    let valid_ids: BTreeSet<&str> = trajectory
        .records
        .iter()
        .map(|r| r.node_id.as_str())
        .collect();
    let mut bindings = BTreeMap::new();
    bindings.insert("task_input".to_string(), task.input.clone());
    bindings.insert("gold".to_string(), task.gold.clone());
    bindings.insert("score".to_string(), format!("{score}"));
    bindings.insert(
        "trajectory".to_string(),
        trajectory_text(trajectory, settings.trajectory_char_budget),
    );
    bindings.insert(
        "valid_node_ids".to_string(),
        valid_ids.iter().copied().collect::<Vec<_>>().join(", "),
    );
    let prompt = render(extract_template, &bindings)?;

    let mut messages = vec![ChatMessage::user(prompt)];
    let mut last_reason = String::new();
    for _attempt in 0..2 {
        let request = ChatRequest::new(&settings.model, messages.clone())
            .with_temperature(settings.temperature);
        let response = provider.complete(&request)?;
        match parse_structured::<RawGene>(&response.content) {
            Ok(raw) => match validate_raw_gene(&raw, &valid_ids) {
                Ok(category) => {
                    let mut kinds: Vec<OperatorKind> = raw
                        .failing_node_ids
                        .iter()
                        .filter_map(|id| graph.node(id).map(|n| n.kind))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    kinds.sort();
                    return Ok(Gene {
                        id: format!("g{iteration}-{}", task.id),
                        source_task_id: task.id.clone(),
                        failing_node_ids: raw.failing_node_ids,
                        failing_node_kinds: kinds,
                        error_category: category,
                        diagnosis: raw.diagnosis,
                        directive: raw.directive,
                        created_at_iteration: iteration,
                    });
                }
                Err(reason) => last_reason = reason,
            },
            Err(reason) => last_reason = reason,
        }
        messages.push(ChatMessage::assistant("(previous reply)"));
        messages.push(ChatMessage::user(format!(
            "Your previous reply could not be used: {last_reason}. \
             Reply again with only the required fenced JSON object."
        )));
    }
    Err(FeedbackError::GeneParseFailure {
        reason: last_reason,
    })
}

fn memory_entries_text(memory: &MemoryStore, gene: &Gene, cap: usize) -> String {
    let kinds: BTreeSet<OperatorKind> = gene.failing_node_kinds.iter().copied().collect();
    let mut relevant: Vec<&Gene> = memory
        .short_term
        .iter()
        .rev()
        .chain(memory.long_term.iter().rev())
        .filter(|g| g.error_category == gene.error_category || g.kind_overlap(&kinds))
        .collect();
    if relevant.is_empty() {
        relevant = memory
            .short_term
            .iter()
            .rev()
            .chain(memory.long_term.iter().rev())
            .collect();
    }
    relevant
        .into_iter()
        .take(cap)
        .map(|g| format!("- [{}] {}", g.id, g.prompt_text().replace('\n', "; ")))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Refines the initial gene against memory. Empty memory is the identity
/// (no LLM call). Refinement only rewrites category, diagnosis, and
/// directive — node ids and kinds stay anchored to the source trajectory.
/// The result (or the fallback) is stored before returning.
pub fn refine_gene(
    initial: Gene,
    memory: &mut MemoryStore,
    provider: &dyn Provider,
    refine_template: &str,
    settings: &FeedbackSettings,
) -> Result<Gene, FeedbackError> {
    if memory.is_empty() {
        memory.store_gene(initial.clone());
        return Ok(initial);
    }
    let mut bindings = BTreeMap::new();
    bindings.insert("gene".to_string(), initial.prompt_text());
    bindings.insert(
        "memory_entries".to_string(),
        memory_entries_text(memory, &initial, 8),
    );
    let prompt = render(refine_template, &bindings)?;
    let request = ChatRequest::new(&settings.model, vec![ChatMessage::user(prompt)])
        .with_temperature(settings.temperature);
    let response = provider.complete(&request)?;

    let refined = match parse_structured::<RawRefined>(&response.content) {
        Ok(raw) => match ErrorCategory::from_literal(&raw.error_category) {
            Some(category) if !raw.directive.trim().is_empty() => Gene {
                error_category: category,
                diagnosis: raw.diagnosis,
                directive: raw.directive,
                ..initial.clone()
            },
            // Best-effort: an unusable refinement falls back to the initial gene.
            _ => initial.clone(),
        },
        Err(_) => initial.clone(),
    };
    memory.store_gene(refined.clone());
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{DomainTag, NodeRecord};
    use crate::prompts::{GENE_EXTRACT, GENE_REFINE};
    use crate::provider::{Matcher, ScriptEntry, ScriptedProvider};
    use crate::workflow::{io_workflow, IO_PROMPT};

    pub(crate) fn gene(
        id: &str,
        category: ErrorCategory,
        kinds: &[OperatorKind],
        iter: u64,
    ) -> Gene {
        Gene {
            id: id.to_string(),
            source_task_id: "t".into(),
            failing_node_ids: vec!["n".into()],
            failing_node_kinds: kinds.to_vec(),
            error_category: category,
            diagnosis: "d".into(),
            directive: "fix it".into(),
            created_at_iteration: iter,
        }
    }

    fn failed_trajectory() -> Trajectory {
        Trajectory {
            task_id: "t1".into(),
            graph_fingerprint: "fp".into(),
            records: vec![NodeRecord {
                node_id: "io".into(),
                rendered_prompt: "p".into(),
                response: String::new(),
                status: NodeStatus::ProviderError,
                error: Some("transport error: down".into()),
                prompt_tokens: 0,
                completion_tokens: 0,
                latency_ms: 0,
            }],
            final_answer: None,
            overall_status: OverallStatus::Failed,
        }
    }

    fn task() -> TaskInstance {
        TaskInstance {
            id: "t1".into(),
            input: "2+2".into(),
            gold: "4".into(),
            domain_tag: DomainTag::Math,
        }
    }

    fn settings() -> FeedbackSettings {
        FeedbackSettings::new("m")
    }

    // ------------------------------------------------------------------
    // store_gene / capacities / promotion
    // ------------------------------------------------------------------

    #[test]
    fn short_term_is_a_ring() {
        let mut memory = MemoryStore::new(3, 32);
        for i in 0..4 {
            memory.store_gene(gene(&format!("g{i}"), ErrorCategory::WrongAnswer, &[], i));
        }
        let ids: Vec<&str> = memory.short_term.iter().map(|g| g.id.as_str()).collect();
        assert_eq!(ids, vec!["g1", "g2", "g3"]);
    }

    #[test]
    fn second_recurrence_promotes_to_long_term() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "g0",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Ensemble],
            0,
        ));
        assert!(memory.long_term.is_empty());
        memory.store_gene(gene(
            "g1",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Ensemble],
            1,
        ));
        assert_eq!(memory.long_term.len(), 1);
        assert_eq!(memory.long_term[0].id, "g1");
    }

    #[test]
    fn long_term_evicts_oldest_past_capacity() {
        let mut memory = MemoryStore::new(8, 2);
        for i in 0..4 {
            memory.store_gene(gene(
                &format!("g{i}"),
                ErrorCategory::ParseFailure,
                &[OperatorKind::Ensemble],
                i,
            ));
        }
        assert_eq!(memory.long_term.len(), 2);
        let ids: Vec<&str> = memory.long_term.iter().map(|g| g.id.as_str()).collect();
        assert_eq!(ids, vec!["g2", "g3"]);
    }

    #[test]
    fn differing_category_does_not_promote() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "g0",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Ensemble],
            0,
        ));
        memory.store_gene(gene(
            "g1",
            ErrorCategory::WrongAnswer,
            &[OperatorKind::Ensemble],
            1,
        ));
        assert!(memory.long_term.is_empty());
    }

    // ------------------------------------------------------------------
    // dominant_gene_for
    // ------------------------------------------------------------------

    #[test]
    fn empty_memory_yields_no_dominant_gene() {
        let memory = MemoryStore::default();
        assert!(memory
            .dominant_gene_for(&io_workflow("m", IO_PROMPT))
            .is_none());
    }

    #[test]
    fn kind_overlap_selects_gene() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "g0",
            ErrorCategory::WrongAnswer,
            &[OperatorKind::Io],
            0,
        ));
        let w = io_workflow("m", IO_PROMPT);
        assert_eq!(memory.dominant_gene_for(&w).unwrap().id, "g0");
    }

    #[test]
    fn more_recent_matching_gene_wins() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "old",
            ErrorCategory::WrongAnswer,
            &[OperatorKind::Io],
            0,
        ));
        memory.store_gene(gene(
            "new",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Io],
            3,
        ));
        let w = io_workflow("m", IO_PROMPT);
        assert_eq!(memory.dominant_gene_for(&w).unwrap().id, "new");
    }

    #[test]
    fn non_overlapping_kinds_are_ignored() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "g0",
            ErrorCategory::WrongAnswer,
            &[OperatorKind::Ensemble],
            0,
        ));
        let w = io_workflow("m", IO_PROMPT); // only an IO node
        assert!(memory.dominant_gene_for(&w).is_none());
    }

    // ------------------------------------------------------------------
    // extract_initial_gene
    // ------------------------------------------------------------------

    fn gene_json(ids: &[&str]) -> String {
        serde_json::json!({
            "failing_node_ids": ids,
            "error_category": "ProviderFailure",
            "diagnosis": "io call failed",
            "directive": "add a retry-tolerant ensemble"
        })
        .to_string()
    }

    #[test]
    fn extracts_gene_from_failed_trajectory() {
        let provider = ScriptedProvider::new(vec![ScriptEntry::respond(
            Matcher::Substring("error-analysis".into()),
            gene_json(&["io"]),
        )]);
        let g = extract_initial_gene(
            &failed_trajectory(),
            &io_workflow("m", IO_PROMPT),
            &task(),
            0.0,
            3,
            &provider,
            GENE_EXTRACT,
            &settings(),
        )
        .unwrap();
        assert_eq!(g.failing_node_ids, vec!["io"]);
        assert_eq!(g.failing_node_kinds, vec![OperatorKind::Io]);
        assert_eq!(g.error_category, ErrorCategory::ProviderFailure);
        assert_eq!(g.created_at_iteration, 3);
        assert_eq!(g.id, "g3-t1");
    }

    #[test]
    fn perfect_completed_trajectory_is_nothing_to_analyze() {
        let mut t = failed_trajectory();
        t.overall_status = OverallStatus::Completed;
        t.records[0].status = NodeStatus::Success;
        t.final_answer = Some("4".into());
        let provider = ScriptedProvider::new(vec![]);
        let err = extract_initial_gene(
            &t,
            &io_workflow("m", IO_PROMPT),
            &task(),
            1.0,
            0,
            &provider,
            GENE_EXTRACT,
            &settings(),
        )
        .unwrap_err();
        assert!(matches!(err, FeedbackError::NothingToAnalyze));
    }

    #[test]
    fn invalid_node_id_triggers_reask_with_valid_list() {
        let provider = ScriptedProvider::new(vec![
            ScriptEntry::respond(
                Matcher::Substring("error-analysis".into()),
                gene_json(&["ghost"]),
            ),
            ScriptEntry::respond(
                Matcher::Substring("valid ids: [io]".into()),
                gene_json(&["io"]),
            ),
        ]);
        let g = extract_initial_gene(
            &failed_trajectory(),
            &io_workflow("m", IO_PROMPT),
            &task(),
            0.0,
            0,
            &provider,
            GENE_EXTRACT,
            &settings(),
        )
        .unwrap();
        assert_eq!(g.failing_node_ids, vec!["io"]);
        assert_eq!(provider.calls(), 2);
    }

    #[test]
    fn two_bad_replies_are_gene_parse_failure() {
        let provider = ScriptedProvider::new(vec![
            ScriptEntry::respond(Matcher::Any, "not json"),
            ScriptEntry::respond(Matcher::Any, "still not json"),
        ]);
        let err = extract_initial_gene(
            &failed_trajectory(),
            &io_workflow("m", IO_PROMPT),
            &task(),
            0.0,
            0,
            &provider,
            GENE_EXTRACT,
            &settings(),
        )
        .unwrap_err();
        assert!(matches!(err, FeedbackError::GeneParseFailure { .. }));
    }

    // ------------------------------------------------------------------
    // refine_gene
    // ------------------------------------------------------------------

    #[test]
    fn empty_memory_refinement_is_identity_without_llm_calls() {
        let mut memory = MemoryStore::default();
        let provider = ScriptedProvider::new(vec![]);
        let g0 = gene("g0", ErrorCategory::WrongAnswer, &[OperatorKind::Io], 0);
        let g = refine_gene(g0.clone(), &mut memory, &provider, GENE_REFINE, &settings()).unwrap();
        assert_eq!(g, g0);
        assert_eq!(provider.calls(), 0);
        assert_eq!(memory.short_term.len(), 1);
    }

    #[test]
    fn refinement_merges_recurring_pattern() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "p1",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Ensemble],
            0,
        ));
        memory.store_gene(gene(
            "p2",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Ensemble],
            1,
        ));
        let refined_json = serde_json::json!({
            "error_category": "ParseFailure",
            "diagnosis": "ensemble nodes keep emitting unparseable output",
            "directive": "constrain the Ensemble prompt to a fixed answer line"
        })
        .to_string();
        let provider = ScriptedProvider::new(vec![ScriptEntry::respond(
            Matcher::Substring("recurring".into()),
            refined_json,
        )]);
        let g0 = gene(
            "g2",
            ErrorCategory::ParseFailure,
            &[OperatorKind::Ensemble],
            2,
        );
        let g = refine_gene(g0, &mut memory, &provider, GENE_REFINE, &settings()).unwrap();
        assert!(g.directive.contains("Ensemble"));
        assert_eq!(g.id, "g2"); // identity fields stay anchored
        assert_eq!(memory.short_term.len(), 3);
    }

    #[test]
    fn unparseable_refinement_falls_back_to_initial() {
        let mut memory = MemoryStore::default();
        memory.store_gene(gene(
            "p1",
            ErrorCategory::WrongAnswer,
            &[OperatorKind::Io],
            0,
        ));
        let provider =
            ScriptedProvider::new(vec![ScriptEntry::respond(Matcher::Any, "plain prose")]);
        let g0 = gene("g1", ErrorCategory::WrongAnswer, &[OperatorKind::Io], 1);
        let g = refine_gene(g0.clone(), &mut memory, &provider, GENE_REFINE, &settings()).unwrap();
        assert_eq!(g, g0);
        // memory unchanged except the g0 insertion
        assert_eq!(memory.short_term.len(), 2);
        assert_eq!(memory.short_term.back().unwrap().id, "g1");
    }

    #[test]
    fn memory_json_round_trip() {
        let mut memory = MemoryStore::new(2, 2);
        memory.store_gene(gene(
            "a",
            ErrorCategory::WrongAnswer,
            &[OperatorKind::Io],
            0,
        ));
        let json = memory.to_json_pretty();
        assert_eq!(MemoryStore::from_json(&json).unwrap(), memory);
    }

    proptest::proptest! {
        #[test]
        fn capacities_hold_under_any_insertion_sequence(
            short_capacity in 1usize..12,
            long_capacity in 1usize..12,
            inserts in proptest::collection::vec((0u8..4, 0u8..4), 0..200),
        ) {
            let kinds = [
                OperatorKind::Io,
                OperatorKind::Ensemble,
                OperatorKind::ReviewAndRevise,
                OperatorKind::Custom,
            ];
            let categories = [
                ErrorCategory::ProviderFailure,
                ErrorCategory::ParseFailure,
                ErrorCategory::WrongAnswer,
                ErrorCategory::StructuralGap,
            ];
            let mut memory = MemoryStore::new(short_capacity, long_capacity);
            for (i, (kind, category)) in inserts.iter().enumerate() {
                memory.store_gene(gene(
                    &format!("g{i}"),
                    categories[*category as usize],
                    &[kinds[*kind as usize]],
                    i as u64,
                ));
                proptest::prop_assert!(memory.short_term.len() <= short_capacity);
                proptest::prop_assert!(memory.long_term.len() <= long_capacity);
            }
        }
    }
}
