//! Append-only JSONL run log: one event object per line.
//!
//! The log is both the run's audit trail and the input to `inspect` and
//! `replay`. Every provider response is mirrored here (`llm_call`), which
//! is what makes ledger-conservation checks possible after the fact.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::debate::{DebateCall, LabeledProposal};
use crate::executor::Trajectory;
use crate::memory::Gene;
use crate::provider::{ChatResponse, LedgerSnapshot, UsageObserver};

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    RunStarted {
        ts: u64,
        seed: u64,
        max_iterations: u64,
        resumed: bool,
    },
    LlmCall {
        ts: u64,
        model: String,
        prompt_tokens: u64,
        completion_tokens: u64,
        cost_usd: f64,
    },
    CandidateEvaluated {
        ts: u64,
        iteration: u64,
        fingerprint: String,
        score: f64,
        cost_usd: f64,
        completed: usize,
        failed: usize,
    },
    TrajectoryRecorded {
        ts: u64,
        iteration: u64,
        fingerprint: String,
        score: f64,
        trajectory: Trajectory,
    },
    DebateHeld {
        ts: u64,
        iteration: u64,
        parent: String,
        result_fingerprint: String,
        rounds: u32,
        provider_calls: u64,
        decided_by_final_judge: bool,
        proposals: Vec<LabeledProposal>,
        transcript: Vec<DebateCall>,
    },
    GeneStored {
        ts: u64,
        iteration: u64,
        gene: Gene,
    },
    Collision {
        ts: u64,
        iteration: u64,
        fingerprint: String,
    },
    BestUpdated {
        ts: u64,
        iteration: u64,
        fingerprint: String,
        score: f64,
    },
    IterationSkipped {
        ts: u64,
        iteration: u64,
        reason: String,
    },
    RunFinished {
        ts: u64,
        iterations_completed: u64,
        best_fingerprint: String,
        best_score: f64,
        stop_reason: String,
        ledger: LedgerSnapshot,
    },
}

/// Serialized writer over the run log file. Appends flush line by line so
/// an aborted run still leaves a readable log.
pub struct RunLogger {
    path: PathBuf,
    writer: Mutex<BufWriter<File>>,
}

impl RunLogger {
    pub fn open_append(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RunLogger {
            path: path.to_path_buf(),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, event: &RunEvent) -> std::io::Result<()> {
        let line = serde_json::to_string(event)?;
        let mut writer = self.writer.lock().unwrap();
        writeln!(writer, "{line}")?;
        writer.flush()
    }
}

impl UsageObserver for RunLogger {
    fn on_response(&self, model: &str, response: &ChatResponse, cost_usd: f64) {
        let _ = self.append(&RunEvent::LlmCall {
            ts: now_ms(),
            model: model.to_string(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
            cost_usd,
        });
    }
}

/// Parses every event in a run log.
pub fn read_events(path: &Path) -> std::io::Result<Vec<RunEvent>> {
    let text = std::fs::read_to_string(path)?;
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: RunEvent = serde_json::from_str(line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), lineno + 1),
            )
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Removes every timing field (`ts`, `latency_ms`, `provider_latency_ms`)
/// recursively, leaving the deterministic payload. Two runs with the same
/// seed, config, and script must agree on this projection line for line.
pub fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("ts");
            map.remove("latency_ms");
            map.remove("provider_latency_ms");
            for (_, v) in map.iter_mut() {
                strip_timing(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items.iter_mut() {
                strip_timing(v);
            }
        }
        _ => {}
    }
}

/// The run log as timing-stripped JSON values, for determinism comparisons.
pub fn normalized_lines(path: &Path) -> std::io::Result<Vec<serde_json::Value>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        strip_timing(&mut value);
        lines.push(value);
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_and_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runlog.jsonl");
        let logger = RunLogger::open_append(&path).unwrap();
        logger
            .append(&RunEvent::RunStarted {
                ts: 1,
                seed: 42,
                max_iterations: 10,
                resumed: false,
            })
            .unwrap();
        logger
            .append(&RunEvent::Collision {
                ts: 2,
                iteration: 3,
                fingerprint: "abc".into(),
            })
            .unwrap();
        let events = read_events(&path).unwrap();
        assert_eq!(events.len(), 2);
        assert!(matches!(
            events[1],
            RunEvent::Collision { iteration: 3, .. }
        ));
    }

    #[test]
    fn strip_timing_removes_nested_fields() {
        let mut v = serde_json::json!({
            "event": "trajectory_recorded",
            "ts": 123,
            "trajectory": {
                "records": [{"node_id": "a", "latency_ms": 9, "provider_latency_ms": 3}]
            }
        });
        strip_timing(&mut v);
        assert_eq!(
            v,
            serde_json::json!({
                "event": "trajectory_recorded",
                "trajectory": {"records": [{"node_id": "a"}]}
            })
        );
    }

    #[test]
    fn llm_call_events_come_from_the_usage_observer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runlog.jsonl");
        let logger = RunLogger::open_append(&path).unwrap();
        let response = ChatResponse {
            content: "x".into(),
            prompt_tokens: 10,
            completion_tokens: 5,
            provider_latency_ms: 0,
        };
        logger.on_response("m", &response, 0.001);
        let events = read_events(&path).unwrap();
        assert!(
            matches!(&events[0], RunEvent::LlmCall { model, prompt_tokens: 10, completion_tokens: 5, .. } if model == "m")
        );
    }
}
