//! Self-contained demo run: 20 synthetic arithmetic tasks plus a provider
//! script that walks one full optimization offline. The seed IO workflow
//! scores 0.4; the debate proposes an ensemble stage that scores 0.7.
//!
//! `debflow init --template demo` writes all of it, after which
//! `debflow optimize --run-dir <dir> --provider scripted:script.json`
//! runs end to end with no network and no credentials. The same fixture
//! anchors the hermetic end-to-end tests.

use std::collections::BTreeMap;
use std::path::Path;

use crate::debate::DebateParams;
use crate::executor::{DomainTag, TaskInstance};
use crate::optimizer::RunConfig;
use crate::prompts;
use crate::provider::{Matcher, ModelPrice, PriceTable, ScriptEntry};
use crate::rundir::RunDir;
use crate::workflow::{
    apply_edits, io_workflow, ModelSet, OperatorKind, OperatorSpec, WorkflowEdit, WorkflowGraph,
    IO_PROMPT,
};

pub const DEMO_MODEL: &str = "gpt-4o-mini";
/// Tasks the seed IO workflow answers correctly: 8 of 20 → 0.4.
const IO_CORRECT: usize = 8;
/// Tasks the ensemble variant answers correctly: 14 of 20 → 0.7.
const VARIANT_CORRECT: usize = 14;

pub fn demo_tasks() -> Vec<TaskInstance> {
    (1..=20)
        .map(|i| TaskInstance {
            id: format!("t{i:02}"),
            input: format!("demo task q{i:02}"),
            gold: format!("a{i:02}"),
            domain_tag: DomainTag::Math,
        })
        .collect()
}

fn ensemble_node() -> OperatorSpec {
    let mut bindings = BTreeMap::new();
    bindings.insert("draft".to_string(), "answer".to_string());
    bindings.insert("question".to_string(), "task_input".to_string());
    OperatorSpec {
        id: "ens".to_string(),
        kind: OperatorKind::Ensemble,
        model_ref: DEMO_MODEL.to_string(),
        prompt_template:
            "Candidate answer: {draft}\nPick and return only the best final answer for: {question}"
                .to_string(),
        tool_refs: Vec::new(),
        input_bindings: bindings,
        output_name: "final".to_string(),
        temperature: None,
    }
}

fn demo_edits() -> Vec<WorkflowEdit> {
    vec![
        WorkflowEdit::AddNode {
            node: ensemble_node(),
            make_entry: false,
            make_exit: true,
        },
        WorkflowEdit::AddEdge {
            from: "io".to_string(),
            to: "ens".to_string(),
        },
    ]
}

pub fn demo_seed_workflow() -> WorkflowGraph {
    io_workflow(DEMO_MODEL, IO_PROMPT)
}

/// The graph the scripted debate proposes; tests assert the optimizer
/// returns exactly this fingerprint.
pub fn expected_variant_graph() -> WorkflowGraph {
    apply_edits(&demo_seed_workflow(), &demo_edits(), &ModelSet::Any)
        .expect("demo edits produce a valid graph")
}

pub fn demo_config() -> RunConfig {
    let mut prices = BTreeMap::new();
    prices.insert(
        DEMO_MODEL.to_string(),
        ModelPrice {
            prompt_usd_per_million: 0.15,
            completion_usd_per_million: 0.60,
        },
    );
    RunConfig {
        seed: 42,
        max_iterations: 1,
        task_brief: "Short synthetic arithmetic prompts; the reply must be the bare answer token."
            .into(),
        models: vec![DEMO_MODEL.into()],
        default_model: DEMO_MODEL.into(),
        max_genes_per_iteration: 1,
        debate: DebateParams {
            n_debaters: 2,
            max_rounds: 1,
            proponent_count: 1,
            opponent_count: 1,
        },
        prices: PriceTable(prices),
        ..RunConfig::default()
    }
}

fn io_call_matcher(task_index: usize) -> Matcher {
    // IO_PROMPT ends "nothing else.\n\n{input}", so this pins the io node's
    // call for one specific task.
    Matcher::Substring(format!("nothing else.\n\ndemo task q{task_index:02}"))
}

fn ensemble_call_matcher(task_index: usize) -> Matcher {
    Matcher::Substring(format!("best final answer for: demo task q{task_index:02}"))
}

fn gene_json(node_id: &str, diagnosis: &str, directive: &str) -> String {
    serde_json::json!({
        "failing_node_ids": [node_id],
        "error_category": "WrongAnswer",
        "diagnosis": diagnosis,
        "directive": directive,
    })
    .to_string()
}

/// The full provider script for one optimization pass over the demo tasks.
pub fn demo_script() -> Vec<ScriptEntry> {
    let mut entries = Vec::new();

    // Iteration 0: the IO seed answers 20 tasks, 8 correctly.
    for i in 1..=20usize {
        let response = if i <= IO_CORRECT {
            format!("a{i:02}")
        } else {
            format!("guess-{i:02}")
        };
        entries.push(ScriptEntry::respond(io_call_matcher(i), response));
    }
    // Failure analysis of the first imperfect task (t09); memory is empty,
    // so refinement is the identity and makes no call.
    entries.push(ScriptEntry::respond(
        Matcher::Substring("error-analysis agent".into()),
        gene_json(
            "io",
            "a single direct call answers multi-step tasks in one shot",
            "aggregate multiple candidate answers before finalizing",
        ),
    ));

    // Iteration 1: a one-round debate with one debater per side.
    entries.push(ScriptEntry::respond(
        Matcher::Substring("You are debater".into()),
        "The failure signal shows one-shot answers missing; we should aggregate drafts.",
    ));
    entries.push(ScriptEntry::respond(
        Matcher::Substring("You are debater".into()),
        "Agreed the workflow is too shallow, but any added stage must keep the bare-answer contract.",
    ));
    let proposal = serde_json::json!({
        "rationale": "Route the draft through an ensemble stage that re-reads the question and returns the best final answer.",
        "edits": demo_edits(),
    })
    .to_string();
    entries.push(ScriptEntry::respond(
        Matcher::Substring("proponent synthesizer".into()),
        proposal.clone(),
    ));
    entries.push(ScriptEntry::respond(
        Matcher::Substring("opponent synthesizer".into()),
        proposal,
    ));
    entries.push(ScriptEntry::respond(
        Matcher::Substring("You are the judge".into()),
        serde_json::json!({
            "e_p": "directly addresses the aggregation gap named in the failure signal",
            "e_o": "concurs with the proponent plan",
            "decision": "ProponentOptimal",
        })
        .to_string(),
    ));

    // The two-node variant answers 20 tasks (io draft, then ensemble), 14
    // correctly.
    for i in 1..=20usize {
        entries.push(ScriptEntry::respond(
            io_call_matcher(i),
            format!("draft-{i:02}"),
        ));
        let response = if i <= VARIANT_CORRECT {
            format!("a{i:02}")
        } else {
            format!("guess-{i:02}")
        };
        entries.push(ScriptEntry::respond(ensemble_call_matcher(i), response));
    }
    // Failure analysis of the variant's first imperfect task (t15), then one
    // refinement call (memory now holds the iteration-0 gene).
    entries.push(ScriptEntry::respond(
        Matcher::Substring("error-analysis agent".into()),
        gene_json(
            "ens",
            "the ensemble stage still trusts a bad draft on the hardest tasks",
            "feed the ensemble more than one draft",
        ),
    ));
    entries.push(ScriptEntry::respond(
        Matcher::Substring("recurring".into()),
        serde_json::json!({
            "error_category": "WrongAnswer",
            "diagnosis": "wrong answers recur when only one draft feeds the final stage",
            "directive": "widen the ensemble input beyond a single draft",
        })
        .to_string(),
    ));

    entries
}

/// Writes a ready-to-run demo into `dir`: config, prompts, seed workflow,
/// tasks, and the provider script.
pub fn write_demo_run_dir(dir: &Path) -> std::io::Result<()> {
    let run_dir = RunDir::new(dir);
    std::fs::create_dir_all(dir)?;
    run_dir.write_json(&run_dir.config_path(), &demo_config())?;
    prompts::write_default_prompts(&run_dir.prompts_dir())?;
    run_dir.write_json(&run_dir.seed_workflow_path(), &demo_seed_workflow())?;
    let tasks = demo_tasks()
        .iter()
        .map(|t| serde_json::to_string(t).expect("task serializes"))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.join("tasks.jsonl"), tasks + "\n")?;
    run_dir.write_json(&dir.join("script.json"), &demo_script())?;
    Ok(())
}
