//! Extraction of structured JSON from free-form model output.
//!
//! The output contract everywhere is one fenced JSON object. Extraction
//! prefers a ```json fence, then any fence containing an object, then the
//! first balanced top-level object in the raw text.

use serde::de::DeserializeOwned;

/// Pulls the most plausible JSON object out of `text`, or `None`.
pub fn extract_json_object(text: &str) -> Option<String> {
    if let Some(block) = fenced_block(text) {
        if let Some(obj) = first_balanced_object(block) {
            return Some(obj.to_string());
        }
    }
    first_balanced_object(text).map(str::to_string)
}

fn fenced_block(text: &str) -> Option<&str> {
    let mut search_from = 0;
    while let Some(open_rel) = text[search_from..].find("```") {
        let open = search_from + open_rel;
        let content_start = text[open + 3..]
            .find('\n')
            .map(|nl| open + 3 + nl + 1)
            .unwrap_or(open + 3);
        let close = text[content_start..].find("```")?;
        let block = &text[content_start..content_start + close];
        if block.contains('{') {
            return Some(block);
        }
        search_from = content_start + close + 3;
    }
    None
}

/// Scans for the first `{` and returns the slice up to its balanced
/// closing brace, string-literal aware.
fn first_balanced_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts and deserializes the JSON object, with a human-readable reason
/// on failure (fed back to the model in repair re-asks).
pub fn parse_structured<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let json =
        extract_json_object(text).ok_or_else(|| "no JSON object found in the reply".to_string())?;
    serde_json::from_str(&json).map_err(|e| format!("JSON did not match the expected shape: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Deserialize, PartialEq, Debug)]
    struct Verdict {
        decision: String,
    }

    #[test]
    fn extracts_from_json_fence() {
        let text = "Reasoning first.\n```json\n{\"decision\": \"Continue\"}\n```\ntrailing";
        let v: Verdict = parse_structured(text).unwrap();
        assert_eq!(v.decision, "Continue");
    }

    #[test]
    fn extracts_bare_object() {
        let v: Verdict = parse_structured("sure: {\"decision\": \"Continue\"} done").unwrap();
        assert_eq!(v.decision, "Continue");
    }

    #[test]
    fn nested_braces_and_strings_balance() {
        let text = r#"{"decision": "has } brace and {nested: true} inside"}"#;
        let obj = extract_json_object(text).unwrap();
        assert_eq!(obj, text);
    }

    #[test]
    fn plain_fence_without_language_tag() {
        let text = "```\n{\"decision\": \"Continue\"}\n```";
        let v: Verdict = parse_structured(text).unwrap();
        assert_eq!(v.decision, "Continue");
    }

    #[test]
    fn missing_object_reports_reason() {
        let err = parse_structured::<Verdict>("no json here at all").unwrap_err();
        assert!(err.contains("no JSON object"));
    }

    #[test]
    fn wrong_shape_reports_reason() {
        let err = parse_structured::<Verdict>("{\"other\": 1}").unwrap_err();
        assert!(err.contains("expected shape"));
    }

    #[test]
    fn prefers_fence_over_earlier_prose_braces() {
        let text = "ignore {this} prose\n```json\n{\"decision\": \"Continue\"}\n```";
        let v: Verdict = parse_structured(text).unwrap();
        assert_eq!(v.decision, "Continue");
    }
}
