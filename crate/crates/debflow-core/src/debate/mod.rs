//! Multi-agent debate over workflow edits.
//!
//! One debate runs up to `max_rounds` rounds. Per round: every debater
//! argues (seeing the history of earlier rounds, the task brief, the
//! dominant gene, and the workflow under optimization), the proponent side
//! synthesizes an edit plan, the opponent side reviews it and answers with
//! its own refined plan, and a judge either adopts one side or lets the
//! debate continue. At the round cap a final judge picks from everything
//! proposed. The returned workflow is always a validated graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::Gene;
use crate::prompts::{self, NO_GENE_PLACEHOLDER};
use crate::provider::{ChatMessage, ChatRequest, ChatResponse, Provider, ProviderError};
use crate::structured::parse_structured;
use crate::template::{render, RenderError};
use crate::workflow::{apply_edits, ModelSet, WorkflowEdit, WorkflowGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Proponent,
    Opponent,
}

/// Numeric shape of a debate, as stored in run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateParams {
    pub n_debaters: u32,
    pub max_rounds: u32,
    pub proponent_count: u32,
    pub opponent_count: u32,
}

impl Default for DebateParams {
    fn default() -> Self {
        DebateParams {
            n_debaters: 4,
            max_rounds: 3,
            proponent_count: 2,
            opponent_count: 2,
        }
    }
}

/// The protocol's prompt set: one template per role.
#[derive(Debug, Clone)]
pub struct RoleTemplates {
    pub debater: String,
    pub proponent_synthesis: String,
    pub opponent_synthesis: String,
    pub judge: String,
    pub final_judge: String,
}

impl RoleTemplates {
    pub fn defaults() -> Self {
        RoleTemplates {
            debater: prompts::DEBATER.to_string(),
            proponent_synthesis: prompts::PROPONENT_SYNTHESIS.to_string(),
            opponent_synthesis: prompts::OPPONENT_SYNTHESIS.to_string(),
            judge: prompts::JUDGE.to_string(),
            final_judge: prompts::FINAL_JUDGE.to_string(),
        }
    }

    /// Loads all five role templates from a `prompts/` directory.
    pub fn load(dir: &std::path::Path) -> std::io::Result<Self> {
        Ok(RoleTemplates {
            debater: prompts::load_prompt(dir, "debater")?,
            proponent_synthesis: prompts::load_prompt(dir, "proponent_synthesis")?,
            opponent_synthesis: prompts::load_prompt(dir, "opponent_synthesis")?,
            judge: prompts::load_prompt(dir, "judge")?,
            final_judge: prompts::load_prompt(dir, "final_judge")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DebateConfig {
    pub params: DebateParams,
    pub templates: RoleTemplates,
}

impl DebateConfig {
    pub fn new(params: DebateParams, templates: RoleTemplates) -> Result<Self, DebateError> {
        let p = &params;
        if p.n_debaters < 2 {
            return Err(DebateError::InvalidConfig("n_debaters must be >= 2".into()));
        }
        if p.max_rounds < 1 {
            return Err(DebateError::InvalidConfig("max_rounds must be >= 1".into()));
        }
        if p.proponent_count < 1 || p.opponent_count < 1 {
            return Err(DebateError::InvalidConfig(
                "both sides need at least one debater".into(),
            ));
        }
        if p.proponent_count + p.opponent_count != p.n_debaters {
            return Err(DebateError::InvalidConfig(
                "proponent_count + opponent_count must equal n_debaters".into(),
            ));
        }
        for (role, text) in [
            ("debater", &templates.debater),
            ("proponent_synthesis", &templates.proponent_synthesis),
            ("opponent_synthesis", &templates.opponent_synthesis),
            ("judge", &templates.judge),
            ("final_judge", &templates.final_judge),
        ] {
            if text.trim().is_empty() {
                return Err(DebateError::InvalidConfig(format!(
                    "template `{role}` is empty"
                )));
            }
        }
        Ok(DebateConfig { params, templates })
    }
}

/// One debater's contribution in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebaterRecord {
    pub debater_index: u32,
    pub side: Side,
    pub round: u32,
    pub argument: String,
}

/// An edit plan: the ordered edits, the arguing side's rationale, and the
/// (already validated) graph they produce when applied to the workflow
/// under optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub edits: Vec<WorkflowEdit>,
    pub rationale: String,
    pub proposed_graph: WorkflowGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledProposal {
    pub label: String,
    pub round: u32,
    pub side: Side,
    pub proposal: Proposal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    ProponentOptimal,
    OpponentOptimal,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub critique_p: String,
    pub critique_o: String,
    pub decision: Decision,
}

/// One round's slice of the history: debater records first, then (once the
/// judge has spoken) the verdict critiques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: u32,
    pub records: Vec<DebaterRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<JudgeVerdict>,
}

/// Round-indexed working memory of one debate. History is append-only:
/// each round's serialized history strictly extends the previous round's.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DebateState {
    pub rounds: Vec<RoundEntry>,
    pub proposals: Vec<LabeledProposal>,
}

impl DebateState {
    /// Serialized history through round `r` inclusive (0 = empty).
    pub fn history_through_round(&self, r: u32) -> String {
        let mut out = String::new();
        for entry in self.rounds.iter().filter(|e| e.round <= r) {
            out.push_str(&format!("[round {}]\n", entry.round));
            for record in &entry.records {
                let side = match record.side {
                    Side::Proponent => "Proponent",
                    Side::Opponent => "Opponent",
                };
                out.push_str(&format!(
                    "({side} {}) {}\n",
                    record.debater_index + 1,
                    record.argument
                ));
            }
            if let Some(verdict) = &entry.verdict {
                out.push_str(&format!(
                    "[judge, round {}] proponent critique: {} | opponent critique: {} | decision: {:?}\n",
                    entry.round, verdict.critique_p, verdict.critique_o, verdict.decision
                ));
            }
        }
        out
    }

    pub fn history(&self) -> String {
        self.history_through_round(u32::MAX)
    }
}

/// Every provider exchange a debate performs, kept for the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateCall {
    pub role: String,
    pub round: u32,
    pub prompt: String,
    pub response: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateOutcome {
    pub graph: WorkflowGraph,
    pub rounds_executed: u32,
    pub provider_calls: u64,
    pub decided_by_final_judge: bool,
    pub state: DebateState,
    pub transcript: Vec<DebateCall>,
}

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("invalid debate configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Template(#[from] RenderError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{side:?} proposal in round {round} failed to parse after a repair re-ask: {reason}")]
    ProposalParse {
        side: Side,
        round: u32,
        reason: String,
    },
    #[error("debate failed: no proposal in any round could be parsed")]
    Failed,
}

/// Everything a debate needs besides the workflow and the config.
pub struct DebateContext<'a> {
    pub task_brief: &'a str,
    pub gene: Option<&'a Gene>,
    pub models: &'a ModelSet,
    /// Model used for all debate-side calls (the optimizer backbone).
    pub model: &'a str,
    pub temperature: f64,
}

#[derive(Deserialize)]
struct RawProposal {
    rationale: String,
    #[serde(default)]
    edits: Vec<WorkflowEdit>,
}

#[derive(Deserialize)]
struct RawVerdict {
    e_p: String,
    e_o: String,
    decision: Decision,
}

#[derive(Deserialize)]
struct RawSelection {
    selection: String,
}

/// One debate in progress. Public operations mirror the protocol steps so
/// they can be exercised (and scripted) individually; [`run_debate`] drives
/// the whole loop.
pub struct DebateSession<'a> {
    config: &'a DebateConfig,
    ctx: &'a DebateContext<'a>,
    provider: &'a dyn Provider,
    workflow: &'a WorkflowGraph,
    workflow_json: String,
    gene_text: String,
    pub state: DebateState,
    transcript: Vec<DebateCall>,
    calls: u64,
}

impl<'a> DebateSession<'a> {
    pub fn new(
        workflow: &'a WorkflowGraph,
        ctx: &'a DebateContext<'a>,
        config: &'a DebateConfig,
        provider: &'a dyn Provider,
    ) -> Self {
        let gene_text = ctx
            .gene
            .map(|g| g.prompt_text())
            .unwrap_or_else(|| NO_GENE_PLACEHOLDER.to_string());
        DebateSession {
            config,
            ctx,
            provider,
            workflow,
            workflow_json: serde_json::to_string(workflow).expect("graph serializes"),
            gene_text,
            state: DebateState::default(),
            transcript: Vec::new(),
            calls: 0,
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn transcript(&self) -> &[DebateCall] {
        &self.transcript
    }

    fn side_of(&self, index: u32) -> Side {
        if index < self.config.params.proponent_count {
            Side::Proponent
        } else {
            Side::Opponent
        }
    }

    fn role_label(&self, index: u32) -> String {
        match self.side_of(index) {
            Side::Proponent => format!(
                "Proponent {} of {}",
                index + 1,
                self.config.params.proponent_count
            ),
            Side::Opponent => format!(
                "Opponent {} of {}",
                index - self.config.params.proponent_count + 1,
                self.config.params.opponent_count
            ),
        }
    }

    fn base_bindings(&self, history: String) -> BTreeMap<String, String> {
        let mut bindings = BTreeMap::new();
        bindings.insert("task_brief".to_string(), self.ctx.task_brief.to_string());
        bindings.insert("workflow".to_string(), self.workflow_json.clone());
        bindings.insert("gene".to_string(), self.gene_text.clone());
        bindings.insert(
            "history".to_string(),
            if history.is_empty() {
                "(none yet)".to_string()
            } else {
                history
            },
        );
        bindings
    }

    fn call(
        &mut self,
        role: &str,
        round: u32,
        messages: Vec<ChatMessage>,
    ) -> Result<ChatResponse, ProviderError> {
        let request = ChatRequest::new(self.ctx.model, messages.clone())
            .with_temperature(self.ctx.temperature);
        self.calls += 1;
        let response = self.provider.complete(&request)?;
        self.transcript.push(DebateCall {
            role: role.to_string(),
            round,
            prompt: request.rendered_text(),
            response: response.content.clone(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
        });
        Ok(response)
    }

    /// One debater's argument for round `round`. The prompt carries the
    /// history of *earlier* rounds only — debaters within a round argue
    /// independently.
    pub fn debater_turn(&mut self, round: u32, index: u32) -> Result<DebaterRecord, DebateError> {
        let mut bindings = self.base_bindings(self.state.history_through_round(round - 1));
        bindings.insert("role".to_string(), self.role_label(index));
        bindings.insert("round".to_string(), round.to_string());
        let prompt = render(&self.config.templates.debater, &bindings)?;
        let label = format!("debater/{}", self.role_label(index));
        let response = self.call(&label, round, vec![ChatMessage::user(prompt)])?;
        let record = DebaterRecord {
            debater_index: index,
            side: self.side_of(index),
            round,
            argument: response.content,
        };
        match self.state.rounds.iter_mut().find(|e| e.round == round) {
            Some(entry) => entry.records.push(record.clone()),
            None => self.state.rounds.push(RoundEntry {
                round,
                records: vec![record.clone()],
                verdict: None,
            }),
        }
        Ok(record)
    }

    fn side_records_text(&self, round: u32, side: Side) -> String {
        self.state
            .rounds
            .iter()
            .find(|e| e.round == round)
            .map(|entry| {
                entry
                    .records
                    .iter()
                    .filter(|r| r.side == side)
                    .map(|r| format!("({}) {}", self.role_label(r.debater_index), r.argument))
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .unwrap_or_default()
    }

    /// Renders a synthesis prompt, asks once, re-asks once with the
    /// validation errors, and gives up with `ProposalParse` after that.
    fn synthesize(
        &mut self,
        round: u32,
        side: Side,
        template: &str,
        extra_bindings: BTreeMap<String, String>,
    ) -> Result<Proposal, DebateError> {
        let mut bindings = self.base_bindings(self.state.history_through_round(round));
        bindings.insert("records".to_string(), self.side_records_text(round, side));
        bindings.insert(
            "edit_contract".to_string(),
            prompts::edit_contract().to_string(),
        );
        bindings.extend(extra_bindings);
        let prompt = render(template, &bindings)?;
        let role = match side {
            Side::Proponent => "proponent_synthesis",
            Side::Opponent => "opponent_synthesis",
        };

        let mut messages = vec![ChatMessage::user(prompt)];
        let mut last_reason = String::new();
        for _attempt in 0..2 {
            let response = self.call(role, round, messages.clone())?;
            match parse_structured::<RawProposal>(&response.content) {
                Ok(raw) => match apply_edits(self.workflow, &raw.edits, self.ctx.models) {
                    Ok(graph) => {
                        let proposal = Proposal {
                            edits: raw.edits,
                            rationale: raw.rationale,
                            proposed_graph: graph,
                        };
                        let label = match side {
                            Side::Proponent => format!("p{round}"),
                            Side::Opponent => format!("o{round}"),
                        };
                        self.state.proposals.push(LabeledProposal {
                            label,
                            round,
                            side,
                            proposal: proposal.clone(),
                        });
                        return Ok(proposal);
                    }
                    Err(rejected) => last_reason = rejected.to_string(),
                },
                Err(reason) => last_reason = reason,
            }
            messages.push(ChatMessage::assistant(
                self.transcript
                    .last()
                    .map(|c| c.response.clone())
                    .unwrap_or_default(),
            ));
            messages.push(ChatMessage::user(format!(
                "Your edit plan could not be used: {last_reason}. \
                 Reply again with only the required fenced JSON object."
            )));
        }
        Err(DebateError::ProposalParse {
            side,
            round,
            reason: last_reason,
        })
    }

    /// Synthesizes the proponents' records into one validated edit plan.
    pub fn synthesize_proponent(&mut self, round: u32) -> Result<Proposal, DebateError> {
        self.synthesize(
            round,
            Side::Proponent,
            &self.config.templates.proponent_synthesis.clone(),
            BTreeMap::new(),
        )
    }

    /// Synthesizes the opponents' refined plan. The prompt carries the
    /// proponent proposal verbatim; concurring (an identical graph) is
    /// allowed.
    pub fn synthesize_opponent(
        &mut self,
        round: u32,
        proponent: &Proposal,
    ) -> Result<Proposal, DebateError> {
        let mut extra = BTreeMap::new();
        extra.insert(
            "proponent_rationale".to_string(),
            proponent.rationale.clone(),
        );
        extra.insert(
            "proponent_edits".to_string(),
            serde_json::to_string(&proponent.edits).expect("edits serialize"),
        );
        self.synthesize(
            round,
            Side::Opponent,
            &self.config.templates.opponent_synthesis.clone(),
            extra,
        )
    }

    fn proposal_text(proposal: &Proposal) -> String {
        format!(
            "Rationale: {}\nEdits: {}",
            proposal.rationale,
            serde_json::to_string(&proposal.edits).expect("edits serialize")
        )
    }

    /// The round verdict. The decision token is constrained to the three
    /// literals; one repair re-ask, then the decision defaults to Continue.
    pub fn judge_round(
        &mut self,
        round: u32,
        proponent: &Proposal,
        opponent: &Proposal,
    ) -> Result<JudgeVerdict, DebateError> {
        let mut bindings = self.base_bindings(self.state.history_through_round(round));
        bindings.insert("proposal_p".to_string(), Self::proposal_text(proponent));
        bindings.insert("proposal_o".to_string(), Self::proposal_text(opponent));
        let prompt = render(&self.config.templates.judge, &bindings)?;

        let mut messages = vec![ChatMessage::user(prompt)];
        let mut verdict = None;
        for _attempt in 0..2 {
            let response = self.call("judge", round, messages.clone())?;
            match parse_structured::<RawVerdict>(&response.content) {
                Ok(raw) => {
                    verdict = Some(JudgeVerdict {
                        critique_p: raw.e_p,
                        critique_o: raw.e_o,
                        decision: raw.decision,
                    });
                    break;
                }
                Err(reason) => {
                    messages.push(ChatMessage::assistant(
                        self.transcript
                            .last()
                            .map(|c| c.response.clone())
                            .unwrap_or_default(),
                    ));
                    messages.push(ChatMessage::user(format!(
                        "Your verdict could not be used: {reason}. Reply again with only the \
                         required fenced JSON object; \"decision\" must be exactly one of \
                         \"ProponentOptimal\", \"OpponentOptimal\", \"Continue\"."
                    )));
                }
            }
        }
        let verdict = verdict.unwrap_or(JudgeVerdict {
            critique_p: String::new(),
            critique_o: String::new(),
            decision: Decision::Continue,
        });
        if let Some(entry) = self.state.rounds.iter_mut().find(|e| e.round == round) {
            entry.verdict = Some(verdict.clone());
        }
        Ok(verdict)
    }

    /// Selects from everything proposed once the round cap is hit. An
    /// unusable selection falls back to the most recent valid proposal.
    pub fn final_judge(&mut self, round: u32) -> Result<Proposal, DebateError> {
        if self.state.proposals.is_empty() {
            return Err(DebateError::Failed);
        }
        let proposals_text = self
            .state
            .proposals
            .iter()
            .map(|lp| format!("[{}]\n{}", lp.label, Self::proposal_text(&lp.proposal)))
            .collect::<Vec<_>>()
            .join("\n\n");
        let mut bindings = self.base_bindings(self.state.history_through_round(round));
        bindings.insert("proposals".to_string(), proposals_text);
        let prompt = render(&self.config.templates.final_judge, &bindings)?;

        let mut messages = vec![ChatMessage::user(prompt)];
        for _attempt in 0..2 {
            let response = self.call("final_judge", round, messages.clone())?;
            match parse_structured::<RawSelection>(&response.content) {
                Ok(raw) => {
                    if let Some(found) = self
                        .state
                        .proposals
                        .iter()
                        .find(|lp| lp.label == raw.selection)
                    {
                        return Ok(found.proposal.clone());
                    }
                    let labels: Vec<&str> = self
                        .state
                        .proposals
                        .iter()
                        .map(|lp| lp.label.as_str())
                        .collect();
                    messages.push(ChatMessage::assistant(response.content.clone()));
                    messages.push(ChatMessage::user(format!(
                        "`{}` is not a candidate label. Valid labels: [{}]. Reply again with \
                         only the required fenced JSON object.",
                        raw.selection,
                        labels.join(", ")
                    )));
                }
                Err(reason) => {
                    messages.push(ChatMessage::assistant(response.content.clone()));
                    messages.push(ChatMessage::user(format!(
                        "Your selection could not be used: {reason}. Reply again with only \
                         the required fenced JSON object."
                    )));
                }
            }
        }
        // Fall back to the latest refinement still on the table.
        Ok(self
            .state
            .proposals
            .last()
            .expect("non-empty")
            .proposal
            .clone())
    }

    fn into_outcome(self, graph: WorkflowGraph, rounds: u32, by_final: bool) -> DebateOutcome {
        DebateOutcome {
            graph,
            rounds_executed: rounds,
            provider_calls: self.calls,
            decided_by_final_judge: by_final,
            state: self.state,
            transcript: self.transcript,
        }
    }
}


/// Runs the full protocol and returns the adopted workflow. A side whose
/// synthesis fails drops out of the round (the judge needs both proposals,
/// so the round auto-continues), but surviving proposals stay eligible for
/// the final judge. `DebateError::Failed` means nothing parseable was ever
/// proposed.
pub fn run_debate(
    workflow: &WorkflowGraph,
    ctx: &DebateContext<'_>,
    config: &DebateConfig,
    provider: &dyn Provider,
) -> Result<DebateOutcome, DebateError> {
    let mut session = DebateSession::new(workflow, ctx, config, provider);
    let max_rounds = config.params.max_rounds;
    for round in 1..=max_rounds {
        for index in 0..config.params.n_debaters {
            session.debater_turn(round, index)?;
        }
        let proponent = match session.synthesize_proponent(round) {
            Ok(p) => Some(p),
            Err(DebateError::ProposalParse { .. }) => None,
            Err(e) => return Err(e),
        };
        let opponent = match &proponent {
            Some(p) => match session.synthesize_opponent(round, p) {
                Ok(o) => Some(o),
                Err(DebateError::ProposalParse { .. }) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        if let (Some(p), Some(o)) = (&proponent, &opponent) {
            let verdict = session.judge_round(round, p, o)?;
            match verdict.decision {
                Decision::ProponentOptimal => {
                    let graph = p.proposed_graph.clone();
                    return Ok(session.into_outcome(graph, round, false));
                }
                Decision::OpponentOptimal => {
                    let graph = o.proposed_graph.clone();
                    return Ok(session.into_outcome(graph, round, false));
                }
                Decision::Continue => {}
            }
        }
    }
    let selected = session.final_judge(max_rounds)?;
    let graph = selected.proposed_graph.clone();
    Ok(session.into_outcome(graph, max_rounds, true))
}
