//! Prompt template placeholders.
//!
//! A placeholder is `{name}` where `name` is an identifier
//! (`[A-Za-z_][A-Za-z0-9_]*`). Anything else — `{"json": ...}`, `{}`,
//! `{ spaced }` — is literal text, so prompts can embed JSON examples
//! without escaping. Substitution is single-pass: placeholder syntax
//! inside a substituted value is not re-expanded.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("missing binding for placeholder `{0}`")]
    MissingBinding(String),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Scans `template` and yields each placeholder occurrence as
/// `(byte_start, byte_end, name)` where the range covers `{name}`.
fn scan(template: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let bytes = template.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        let rest = &template[i + 1..];
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if is_ident_start(c) => {
                let mut end = None;
                for (j, c) in template[i + 1..].char_indices() {
                    if c == '}' {
                        end = Some(i + 1 + j);
                        break;
                    }
                    if !is_ident_continue(c) {
                        break;
                    }
                }
                if let Some(close) = end {
                    let name = &template[i + 1..close];
                    out.push((i, close + 1, name));
                    i = close + 1;
                    continue;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    out
}

/// The set of placeholder names appearing in `template`.
pub fn placeholders(template: &str) -> BTreeSet<String> {
    scan(template)
        .into_iter()
        .map(|(_, _, name)| name.to_string())
        .collect()
}

/// Substitutes every placeholder with its binding. Fails on the first
/// placeholder without a binding; all other text passes through verbatim.
pub fn render(template: &str, bindings: &BTreeMap<String, String>) -> Result<String, RenderError> {
    let spans = scan(template);
    let mut out = String::with_capacity(template.len());
    let mut cursor = 0;
    for (start, end, name) in spans {
        let value = bindings
            .get(name)
            .ok_or_else(|| RenderError::MissingBinding(name.to_string()))?;
        out.push_str(&template[cursor..start]);
        out.push_str(value);
        cursor = end;
    }
    out.push_str(&template[cursor..]);
    Ok(out)
}
