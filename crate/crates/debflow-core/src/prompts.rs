//! Default prompt templates, written to `<run_dir>/prompts/` at init time
//! and loaded back by role name. Each template's placeholders are filled
//! by the engine; literal JSON braces in the text pass through untouched.

use std::io;
use std::path::Path;

/// Role name → default template text. Files are named `<role>.txt`.
pub const ROLE_TEMPLATES: &[(&str, &str)] = &[
    ("debater", DEBATER),
    ("proponent_synthesis", PROPONENT_SYNTHESIS),
    ("opponent_synthesis", OPPONENT_SYNTHESIS),
    ("judge", JUDGE),
    ("final_judge", FINAL_JUDGE),
    ("gene_extract", GENE_EXTRACT),
    ("gene_refine", GENE_REFINE),
];

pub const DEBATER: &str = "\
You are debater {role} in round {round} of a structured debate about how to improve an LLM workflow.

Task domain:
{task_brief}

Current workflow (JSON):
{workflow}

Known failure signal:
{gene}

Debate history so far:
{history}

Argue for the single most valuable change to this workflow: add, remove, or rewire operator nodes, rewrite a prompt, or swap a model. Ground your argument in the failure signal and the task domain. Keep it under 150 words.
";

const EDIT_CONTRACT: &str = r#"Reply with a single fenced JSON object:

```json
{"rationale": "<why this edit plan>", "edits": []}
```

Each element of "edits" takes one of these forms:
{"kind": "AddNode", "node": {"id": "...", "kind": "IO" | "Ensemble" | "ReviewAndRevise" | "Custom", "model_ref": "...", "prompt_template": "... may use placeholders ...", "tool_refs": [], "input_bindings": {"placeholder_name": "task_input or an upstream output name"}, "output_name": "..."}, "make_entry": false, "make_exit": false}
{"kind": "RemoveNode", "id": "..."}
{"kind": "AddEdge", "from": "...", "to": "..."}
{"kind": "RemoveEdge", "from": "...", "to": "..."}
{"kind": "ReplacePrompt", "id": "...", "prompt_template": "...", "input_bindings": {"placeholder_name": "source"}}
{"kind": "ReplaceModel", "id": "...", "model_ref": "..."}

Set "make_exit" to true when the new node should produce the final answer. An empty edits list keeps the workflow as it is."#;

pub const PROPONENT_SYNTHESIS: &str = "\
You are the proponent synthesizer in a workflow-improvement debate. Distill your side's arguments into one concrete edit plan.

Task domain:
{task_brief}

Current workflow (JSON):
{workflow}

Known failure signal:
{gene}

Debate history:
{history}

Proponent arguments this round:
{records}

{edit_contract}
";

pub const OPPONENT_SYNTHESIS: &str = "\
You are the opponent synthesizer in a workflow-improvement debate. The proponents have made their proposal; critique it and reply with your side's refined edit plan. Adopting their plan unchanged is allowed when it is already right.

Task domain:
{task_brief}

Current workflow (JSON):
{workflow}

Known failure signal:
{gene}

Debate history:
{history}

Opponent arguments this round:
{records}

Proponent proposal under review:
Rationale: {proponent_rationale}
Edits: {proponent_edits}

{edit_contract}
";

pub const JUDGE: &str = r#"You are the judge of a workflow-improvement debate. Weigh both solutions against the task domain and the failure signal.

Task domain:
{task_brief}

Known failure signal:
{gene}

Debate history:
{history}

Proponent solution:
{proposal_p}

Opponent solution:
{proposal_o}

Reply with a single fenced JSON object:

```json
{"e_p": "<strengths and weaknesses of the proponent solution>", "e_o": "<strengths and weaknesses of the opponent solution>", "decision": "Continue"}
```

"decision" must be exactly one of "ProponentOptimal", "OpponentOptimal", or "Continue". Use "Continue" only when neither solution is fit to adopt; when both qualify, pick the stronger side.
"#;

pub const FINAL_JUDGE: &str = r#"You are the final judge of a workflow-improvement debate that reached its round limit without a verdict. Select the best solution from the full history.

Task domain:
{task_brief}

Known failure signal:
{gene}

Debate history:
{history}

Candidate solutions:
{proposals}

Reply with a single fenced JSON object naming the winning candidate by its label:

```json
{"selection": "p1"}
```
"#;

pub const GENE_EXTRACT: &str = r#"You are an error-analysis agent. A workflow run on the task below did not fully succeed. Identify the failure-causing steps.

Task input:
{task_input}

Reference answer:
{gold}

Score achieved: {score}

Execution trace, one block per node:
{trajectory}

Valid node ids: {valid_node_ids}

Reply with a single fenced JSON object:

```json
{"failing_node_ids": ["..."], "error_category": "WrongAnswer", "diagnosis": "<what went wrong and where>", "directive": "<one actionable correction for the next workflow revision>"}
```

"error_category" must be exactly one of "ProviderFailure", "ParseFailure", "WrongAnswer", "StructuralGap". Every entry of "failing_node_ids" must come from the valid node ids listed above.
"#;

pub const GENE_REFINE: &str = r#"You refine failure analyses against past failure records, so recurring problems get fixed once instead of rediscovered.

New failure record:
{gene}

Past records:
{memory_entries}

Merge the new record with any recurring pattern you see. Reply with a single fenced JSON object:

```json
{"error_category": "WrongAnswer", "diagnosis": "<merged diagnosis>", "directive": "<directive that subsumes the recurring pattern>"}
```

"error_category" must be exactly one of "ProviderFailure", "ParseFailure", "WrongAnswer", "StructuralGap".
"#;

/// Text rendered into debate prompts when no failure signal exists yet.
pub const NO_GENE_PLACEHOLDER: &str = "(no prior failure signal)";

/// The `{edit_contract}` block shared by both synthesis templates.
pub fn edit_contract() -> &'static str {
    EDIT_CONTRACT
}

/// Writes the default template files into `dir` (created if needed).
pub fn write_default_prompts(dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (role, text) in ROLE_TEMPLATES {
        std::fs::write(dir.join(format!("{role}.txt")), text)?;
    }
    Ok(())
}

/// Loads one role template from `dir`.
pub fn load_prompt(dir: &Path, role: &str) -> io::Result<String> {
    std::fs::read_to_string(dir.join(format!("{role}.txt")))
}
