//! Run-directory layout and persisted optimizer state.
//!
//! ```text
//! <run_dir>/
//!   config.json          run configuration
//!   prompts/<role>.txt   prompt templates
//!   seed_workflow.json   iteration-0 workflow
//!   tasks.jsonl          validation tasks (path set in config)
//!   runlog.jsonl         append-only event log
//!   memory.json          failure memory
//!   candidates/<fp>.json scored candidates
//!   best.json            current argmax candidate
//!   state.json           resume bookkeeping
//!   .lock                held while an optimize is running
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn prompts_dir(&self) -> PathBuf {
        self.root.join("prompts")
    }
    pub fn seed_workflow_path(&self) -> PathBuf {
        self.root.join("seed_workflow.json")
    }
    pub fn runlog_path(&self) -> PathBuf {
        self.root.join("runlog.jsonl")
    }
    pub fn memory_path(&self) -> PathBuf {
        self.root.join("memory.json")
    }
    pub fn candidates_dir(&self) -> PathBuf {
        self.root.join("candidates")
    }
    pub fn candidate_path(&self, fingerprint: &str) -> PathBuf {
        self.candidates_dir().join(format!("{fingerprint}.json"))
    }
    pub fn best_path(&self) -> PathBuf {
        self.root.join("best.json")
    }
    pub fn state_path(&self) -> PathBuf {
        self.root.join("state.json")
    }
    pub fn lock_path(&self) -> PathBuf {
        self.root.join(".lock")
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let json = serde_json::to_string_pretty(value)?;
        fs::write(path, json)
    }

    pub fn read_json<T: DeserializeOwned>(&self, path: &Path) -> std::io::Result<T> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            )
        })
    }
}

/// Everything needed to pick a run back up after an abort: how far it got,
/// how many RNG draws to replay, the pool in insertion order, and the spend
/// carried over from earlier sessions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub iterations_completed: u64,
    pub draws_consumed: u64,
    pub pool: Vec<String>,
    pub spent_usd: f64,
    pub finished: bool,
}

/// Exclusive-creation lock file. One optimize per run directory; dropping
/// the guard releases the lock.
pub struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    pub fn acquire(run_dir: &RunDir) -> std::io::Result<LockGuard> {
        fs::create_dir_all(run_dir.root())?;
        let path = run_dir.lock_path();
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!(
                    "another optimize appears to be running (lock file {} exists); \
                     remove it if that run is dead",
                    path.display()
                ),
            )),
            Err(e) => Err(e),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = RunDir::new(dir.path());
        let guard = LockGuard::acquire(&run_dir).unwrap();
        assert!(LockGuard::acquire(&run_dir).is_err());
        drop(guard);
        assert!(LockGuard::acquire(&run_dir).is_ok());
    }

    #[test]
    fn state_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = RunDir::new(dir.path());
        let state = RunState {
            iterations_completed: 3,
            draws_consumed: 3,
            pool: vec!["a".into(), "b".into()],
            spent_usd: 0.5,
            finished: false,
        };
        run_dir.write_json(&run_dir.state_path(), &state).unwrap();
        let back: RunState = run_dir.read_json(&run_dir.state_path()).unwrap();
        assert_eq!(back, state);
    }
}
