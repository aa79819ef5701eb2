//! Meta-prompt templates with `{placeholder}` syntax.
//!
//! Placeholders are lowercase identifiers in single braces; `{{` and `}}`
//! escape literal braces. Rendering fails when a placeholder in the template
//! has no binding, and values are inserted verbatim (never re-scanned).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// The default feedback-collection meta-prompt.
pub const DEFAULT_FEEDBACK_TEMPLATE: &str = include_str!("../templates/feedback.txt");

/// The default prompt-rewrite meta-prompt.
pub const DEFAULT_REWRITE_TEMPLATE: &str = include_str!("../templates/rewrite.txt");

/// Placeholder names the optimizer loop knows how to bind.
pub const KNOWN_PLACEHOLDERS: [&str; 5] = [
    "cur_prompt",
    "event_definitions",
    "example_string",
    "feedback",
    "trajectory_prompts",
];

#[derive(Debug, Clone)]
pub struct MetaPromptTemplate {
    text: String,
}

impl MetaPromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Placeholder names present in the template, in order of appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names = Vec::new();
        scan(&self.text, |name| {
            if !names.iter().any(|n| n == name) {
                names.push(name.to_string());
            }
            Some(String::new())
        })
        .ok();
        names
    }

    /// Substitutes every placeholder. Errors if a placeholder is unbound.
    /// The scan is single-pass, so every template placeholder is replaced
    /// and substituted values are never re-scanned.
    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String> {
        scan(&self.text, |name| bindings.get(name).cloned())
    }
}

/// Single pass over the template. `lookup` resolves placeholder names; a
/// `None` aborts with an unbound-placeholder error.
fn scan(text: &str, mut lookup: impl FnMut(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if i + 1 < bytes.len() && bytes[i + 1] == b'{' => {
                out.push('{');
                i += 2;
            }
            b'}' if i + 1 < bytes.len() && bytes[i + 1] == b'}' => {
                out.push('}');
                i += 2;
            }
            b'{' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                    j += 1;
                }
                if j > start && j < bytes.len() && bytes[j] == b'}' {
                    let name = &text[start..j];
                    match lookup(name) {
                        Some(value) => out.push_str(&value),
                        None => {
                            return Err(Error::Template(format!(
                                "placeholder `{{{name}}}` is unbound"
                            )))
                        }
                    }
                    i = j + 1;
                } else {
                    out.push('{');
                    i += 1;
                }
            }
            _ => {
                let ch_len = utf8_len(bytes[i]);
                out.push_str(&text[i..i + ch_len]);
                i += ch_len;
            }
        }
    }
    Ok(out)
}

fn utf8_len(first: u8) -> usize {
    match first {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&'static str, &str)]) -> BTreeMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn renders_bound_placeholders() {
        let t = MetaPromptTemplate::new("a {cur_prompt} b {feedback} c");
        let out = t
            .render(&bind(&[("cur_prompt", "X"), ("feedback", "Y")]))
            .unwrap();
        assert_eq!(out, "a X b Y c");
    }

    #[test]
    fn unbound_placeholder_fails() {
        let t = MetaPromptTemplate::new("a {cur_prompt} b");
        assert!(t.render(&BTreeMap::new()).is_err());
    }

    #[test]
    fn escaped_braces_become_literals() {
        let t = MetaPromptTemplate::new("{{role1}}: List");
        let out = t.render(&BTreeMap::new()).unwrap();
        assert_eq!(out, "{role1}: List");
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = MetaPromptTemplate::new("{cur_prompt}");
        let out = t
            .render(&bind(&[("cur_prompt", "literal {feedback} stays")]))
            .unwrap();
        assert_eq!(out, "literal {feedback} stays");
    }

    #[test]
    fn default_templates_declare_expected_placeholders() {
        let fb = MetaPromptTemplate::new(DEFAULT_FEEDBACK_TEMPLATE);
        assert!(fb.text().starts_with("I am writing event guidelines and prompt"));
        assert_eq!(
            fb.placeholders(),
            vec!["cur_prompt", "event_definitions", "example_string"]
        );
        let rw = MetaPromptTemplate::new(DEFAULT_REWRITE_TEMPLATE);
        assert_eq!(
            rw.placeholders(),
            vec![
                "cur_prompt",
                "event_definitions",
                "example_string",
                "feedback",
                "trajectory_prompts"
            ]
        );
        assert!(rw.text().contains("<CLASS_START> and <CLASS_END>"));
    }

    #[test]
    fn rendered_default_has_no_placeholder_tokens() {
        let rw = MetaPromptTemplate::new(DEFAULT_REWRITE_TEMPLATE);
        let out = rw
            .render(&bind(&[
                ("cur_prompt", "I"),
                ("event_definitions", "D"),
                ("example_string", "E"),
                ("feedback", "F"),
                ("trajectory_prompts", "T"),
            ]))
            .unwrap();
        for name in KNOWN_PLACEHOLDERS {
            assert!(!out.contains(&format!("{{{name}}}")));
        }
        // The {{role1}} escape in the shipped template must survive as a
        // literal brace token.
        assert!(out.contains("{role1}: List"));
    }
}
