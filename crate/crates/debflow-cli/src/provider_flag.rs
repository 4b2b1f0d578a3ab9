//! Parsing of the `--provider` flag into a live provider.

use std::path::Path;

use anyhow::{bail, Context, Result};
use debflow_core::provider::{HttpConfig, HttpProvider, Provider, ScriptedProvider};

/// `scripted:<path>` loads a JSON script (relative paths resolve against
/// the run directory first, then the working directory). `http` reads
/// `DEBFLOW_BASE_URL`; a literal `http(s)://…` value pins the endpoint.
/// Defaults to `http`.
pub fn build_provider(flag: Option<&str>, run_dir: &Path) -> Result<Box<dyn Provider>> {
    let flag = flag.unwrap_or("http");
    if let Some(script_path) = flag.strip_prefix("scripted:") {
        let in_run_dir = run_dir.join(script_path);
        let path = if in_run_dir.exists() {
            in_run_dir
        } else {
            Path::new(script_path).to_path_buf()
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading provider script {}", path.display()))?;
        let provider = ScriptedProvider::from_json(&text)
            .with_context(|| format!("parsing provider script {}", path.display()))?;
        return Ok(Box::new(provider));
    }
    if flag == "http" {
        let config = HttpConfig::from_env(None).context("configuring HTTP provider")?;
        return Ok(Box::new(HttpProvider::new(config)));
    }
    if flag.starts_with("http://") || flag.starts_with("https://") {
        let mut config = HttpConfig::new(flag);
        config.api_key = std::env::var("DEBFLOW_API_KEY").ok();
        return Ok(Box::new(HttpProvider::new(config)));
    }
    bail!("unknown provider `{flag}`: expected `scripted:<file>`, `http`, or a base URL")
}
