//! Tolerant parser for task-model output in the constructor-list format,
//! plus the canonical serializer and the batch-answer splitter.
//!
//! The target grammar is a Python-flavored list of event constructors:
//!
//! ```text
//! result = [Die(mention="killed", victim=["soldier"], place=["Iraq"])]
//! ```
//!
//! Models wrap this in prose, switch quote styles, write `"key" = value`,
//! or emit scalar spans where lists are expected. The parser recovers what
//! it can, drops what it cannot, and reports every drop as a diagnostic.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::EventInstance;
use crate::schema::EventSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// One parser note: what was dropped or repaired, and where in the input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// Human-readable location in the input text, e.g. `offset 42`.
    pub location: String,
}

impl Diagnostic {
    fn at(severity: Severity, offset: usize, message: impl Into<String>) -> Self {
        Self {
            severity,
            message: message.into(),
            location: format!("offset {offset}"),
        }
    }
}

/// Result of parsing one model answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub instances: Vec<EventInstance>,
    pub diagnostics: Vec<Diagnostic>,
    pub fatal: bool,
}

impl ParseOutcome {
    pub fn fatal(message: impl Into<String>, location: impl Into<String>) -> Self {
        Self {
            instances: Vec::new(),
            diagnostics: vec![Diagnostic {
                severity: Severity::Error,
                message: message.into(),
                location: location.into(),
            }],
            fatal: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Quote-aware scanning helpers
// ---------------------------------------------------------------------------

/// Finds the matching `]` (or `)`) for the opener at `open`, honoring quoted
/// strings so brackets inside spans never count. Returns the index of the
/// closer.
fn find_closer(bytes: &[u8], open: usize) -> Option<usize> {
    let (open_ch, close_ch) = match bytes[open] {
        b'[' => (b'[', b']'),
        b'(' => (b'(', b')'),
        _ => return None,
    };
    let mut depth = 0usize;
    let mut i = open;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'"' | b'\'' => {
                i = skip_string(bytes, i)?;
                continue;
            }
            c if c == open_ch => depth += 1,
            c if c == close_ch => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Steps past a quoted string starting at `start` (which holds the quote).
/// Returns the index just after the closing quote. Backslash escapes are
/// honored.
fn skip_string(bytes: &[u8], start: usize) -> Option<usize> {
    let quote = bytes[start];
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            c if c == quote => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

/// Splits `text[range]` on top-level commas, quote- and bracket-aware.
/// Returns (start, end) byte ranges of the pieces, whitespace-trimmed.
fn split_top_level(bytes: &[u8], start: usize, end: usize) -> Option<Vec<(usize, usize)>> {
    let mut pieces = Vec::new();
    let mut piece_start = start;
    let mut depth = 0usize;
    let mut i = start;
    while i < end {
        match bytes[i] {
            b'"' | b'\'' => {
                i = skip_string(bytes, i)?;
                continue;
            }
            b'[' | b'(' => depth += 1,
            b']' | b')' => depth = depth.checked_sub(1)?,
            b',' if depth == 0 => {
                pieces.push((piece_start, i));
                piece_start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    pieces.push((piece_start, end));
    Some(
        pieces
            .into_iter()
            .map(|(s, e)| trim_range(bytes, s, e))
            .filter(|(s, e)| s < e)
            .collect(),
    )
}

fn trim_range(bytes: &[u8], mut s: usize, mut e: usize) -> (usize, usize) {
    while s < e && bytes[s].is_ascii_whitespace() {
        s += 1;
    }
    while e > s && bytes[e - 1].is_ascii_whitespace() {
        e -= 1;
    }
    (s, e)
}

fn unescape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

// ---------------------------------------------------------------------------
// parse_output
// ---------------------------------------------------------------------------

/// Parses arbitrary model text into schema-validated event instances.
///
/// Locates the outermost `result = [ ... ]` list (the last such assignment
/// wins, so a final answer beats quoted examples in earlier prose) or, when
/// no assignment exists, the first bare bracketed list. Unknown event names,
/// unknown roles, and malformed constructors are dropped with one diagnostic
/// each; only an unrecoverable list structure is fatal.
pub fn parse_output(text: &str, schema: &EventSchema) -> ParseOutcome {
    let bytes = text.as_bytes();
    let list = match locate_list(bytes) {
        Some(span) => span,
        None => return ParseOutcome::fatal("parsing error: no result list found", "offset 0"),
    };
    let (open, close) = list;
    let mut instances = Vec::new();
    let mut diagnostics = Vec::new();
    let pieces = match split_top_level(bytes, open + 1, close) {
        Some(p) => p,
        None => {
            return ParseOutcome::fatal(
                "parsing error: unbalanced brackets in result list",
                format!("offset {open}"),
            )
        }
    };
    for (ps, pe) in pieces {
        match parse_constructor(text, ps, pe, schema) {
            Ok((instance, mut role_diags)) => {
                instances.push(instance);
                diagnostics.append(&mut role_diags);
            }
            Err(diag) => diagnostics.push(diag),
        }
    }
    ParseOutcome { instances, diagnostics, fatal: false }
}

/// Finds the byte range (open bracket, close bracket) of the answer list.
fn locate_list(bytes: &[u8]) -> Option<(usize, usize)> {
    // Prefer the last `result = [` assignment.
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i + 6 <= bytes.len() {
        if bytes[i..].starts_with(b"result")
            && (i == 0 || !is_ident_char(bytes[i - 1]))
            && (i + 6 == bytes.len() || !is_ident_char(bytes[i + 6]))
        {
            let mut j = i + 6;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'=' {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'[' {
                    if let Some(close) = find_closer(bytes, j) {
                        best = Some((j, close));
                    }
                }
            }
        }
        i += 1;
    }
    if best.is_some() {
        return best;
    }
    // Fall back to the first balanced bare list.
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' | b'\'' => i = skip_string(bytes, i)?,
            b'[' => return find_closer(bytes, i).map(|c| (i, c)),
            _ => i += 1,
        }
    }
    None
}

/// Parses one `Name(arg, arg, ...)` constructor in `text[start..end]`.
/// On success returns the instance plus diagnostics for any dropped roles;
/// an `Err` means the whole constructor was dropped.
fn parse_constructor(
    text: &str,
    start: usize,
    end: usize,
    schema: &EventSchema,
) -> std::result::Result<(EventInstance, Vec<Diagnostic>), Diagnostic> {
    let bytes = text.as_bytes();
    let mut i = start;
    while i < end && is_ident_char(bytes[i]) {
        i += 1;
    }
    let name = &text[start..i];
    let mut j = i;
    while j < end && bytes[j].is_ascii_whitespace() {
        j += 1;
    }
    if name.is_empty() || j >= end || bytes[j] != b'(' {
        return Err(Diagnostic::at(
            Severity::Warning,
            start,
            format!("dropped non-constructor item `{}`", excerpt(text, start, end)),
        ));
    }
    let close = find_closer(bytes, j).filter(|c| *c < end).ok_or_else(|| {
        Diagnostic::at(
            Severity::Warning,
            j,
            format!("dropped constructor `{name}` with unbalanced parentheses"),
        )
    })?;
    let event = schema.event(name).ok_or_else(|| {
        Diagnostic::at(
            Severity::Warning,
            start,
            format!("dropped instance of unknown event type `{name}`"),
        )
    })?;

    let mut mention: Option<String> = None;
    let mut arguments: Vec<(String, Vec<String>)> = Vec::new();
    let mut role_diags = Vec::new();
    let args = split_top_level(bytes, j + 1, close).ok_or_else(|| {
        Diagnostic::at(
            Severity::Warning,
            j,
            format!("dropped constructor `{name}` with malformed arguments"),
        )
    })?;
    for (as_, ae) in args {
        let (key, value) = match parse_argument(text, as_, ae) {
            Some(kv) => kv,
            None => {
                return Err(Diagnostic::at(
                    Severity::Warning,
                    as_,
                    format!(
                        "dropped constructor `{name}`: malformed argument `{}`",
                        excerpt(text, as_, ae)
                    ),
                ))
            }
        };
        if key == "mention" {
            mention = value.into_iter().next();
        } else if event.roles.iter().any(|r| *r == key) {
            // Duplicate role: keep the first occurrence.
            if !arguments.iter().any(|(k, _)| *k == key) {
                arguments.push((key, value));
            }
        } else {
            role_diags.push(Diagnostic::at(
                Severity::Warning,
                as_,
                format!("dropped unknown role `{key}` on event type `{name}`"),
            ));
        }
    }

    let mention = mention.filter(|m| !m.is_empty()).ok_or_else(|| {
        Diagnostic::at(
            Severity::Warning,
            start,
            format!("dropped `{name}` instance without a mention"),
        )
    })?;
    match EventInstance::new(name, &mention, arguments, schema) {
        Ok(instance) => Ok((instance, role_diags)),
        Err(e) => Err(Diagnostic::at(
            Severity::Warning,
            start,
            format!("dropped `{name}` instance: {e}"),
        )),
    }
}

/// Parses one `key = value` argument. Keys may be bare or quoted; values are
/// quoted strings (promoted to singleton lists), lists of quoted strings, or
/// the tolerated bare words `None`/`null` (empty list) and other bare tokens
/// (promoted strings).
fn parse_argument(text: &str, start: usize, end: usize) -> Option<(String, Vec<String>)> {
    let bytes = text.as_bytes();
    // Key.
    let (key, mut i) = if bytes[start] == b'"' || bytes[start] == b'\'' {
        let after = skip_string(bytes, start)?;
        let raw = &text[start + 1..after - 1];
        (unescape(raw), after)
    } else {
        let mut k = start;
        while k < end && is_ident_char(bytes[k]) {
            k += 1;
        }
        if k == start {
            return None;
        }
        (text[start..k].to_string(), k)
    };
    while i < end && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    if i >= end || bytes[i] != b'=' {
        return None;
    }
    i += 1;
    while i < end && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    if i >= end {
        return None;
    }
    // Value.
    match bytes[i] {
        b'"' | b'\'' => {
            let after = skip_string(bytes, i)?;
            if trim_range(bytes, after, end).0 < end {
                return None; // trailing garbage after scalar
            }
            let raw = &text[i + 1..after - 1];
            Some((key, vec![unescape(raw)]))
        }
        b'[' => {
            let close = find_closer(bytes, i).filter(|c| *c < end)?;
            let mut spans = Vec::new();
            for (es, ee) in split_top_level(bytes, i + 1, close)? {
                if bytes[es] == b'"' || bytes[es] == b'\'' {
                    let after = skip_string(bytes, es)?;
                    if trim_range(bytes, after, ee).0 < ee {
                        return None;
                    }
                    spans.push(unescape(&text[es + 1..after - 1]));
                } else {
                    spans.push(text[es..ee].to_string());
                }
            }
            Some((key, spans))
        }
        _ => {
            let word = text[i..end].trim();
            if word == "None" || word == "null" {
                Some((key, Vec::new()))
            } else {
                Some((key, vec![word.to_string()]))
            }
        }
    }
}

fn excerpt(text: &str, start: usize, end: usize) -> String {
    let slice = &text[start..end.min(start + 40)];
    if end > start + 40 {
        format!("{slice}…")
    } else {
        slice.to_string()
    }
}

// ---------------------------------------------------------------------------
// serialize_instances
// ---------------------------------------------------------------------------

/// Emits the canonical single-line form: double quotes, `key=value`, roles in
/// schema order, every role present. This is the strict grammar and the
/// on-disk prediction format.
pub fn serialize_instances(instances: &[EventInstance], schema: &EventSchema) -> Result<String> {
    let mut out = String::from("result = [");
    for (idx, inst) in instances.iter().enumerate() {
        inst.validate(schema)
            .map_err(|e| Error::Serialize(e.to_string()))?;
        if idx > 0 {
            out.push_str(", ");
        }
        out.push_str(&inst.event_type);
        out.push_str("(mention=\"");
        out.push_str(&escape(&inst.mention));
        out.push('"');
        for (role, spans) in &inst.arguments {
            out.push_str(", ");
            out.push_str(role);
            out.push_str("=[");
            for (i, span) in spans.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push('"');
                out.push_str(&escape(span));
                out.push('"');
            }
            out.push(']');
        }
        out.push(')');
    }
    out.push(']');
    Ok(out)
}

// ---------------------------------------------------------------------------
// split_batch_answers
// ---------------------------------------------------------------------------

/// Result of partitioning a batched model response by query labels.
#[derive(Debug, Clone)]
pub struct BatchSplit {
    /// Label → answer segment, in input label order. Missing labels map to
    /// empty segments.
    pub segments: IndexMap<String, String>,
    pub diagnostics: Vec<Diagnostic>,
    /// False when no label marker was found at all; the whole batch is then
    /// flagged for the caller.
    pub found_any: bool,
}

/// Splits a batched response into per-label segments.
///
/// A label matches at a line start or right after list-closing punctuation
/// (`]` or `)`), case-insensitively, and must not be followed by another
/// identifier character (so `text1` never matches inside `text10`). An
/// optional `:` after the label is consumed.
pub fn split_batch_answers(text: &str, labels: &[String]) -> BatchSplit {
    let lower = text.to_lowercase();
    let mut found: Vec<(usize, usize, usize)> = Vec::new(); // (pos, label_idx, content_start)
    let mut diagnostics = Vec::new();
    for (idx, label) in labels.iter().enumerate() {
        match find_label(&lower, text, &label.to_lowercase()) {
            Some((pos, content_start)) => found.push((pos, idx, content_start)),
            None => diagnostics.push(Diagnostic {
                severity: Severity::Warning,
                message: format!("label `{label}` not found in batch response"),
                location: "offset 0".to_string(),
            }),
        }
    }
    let found_any = !found.is_empty();
    found.sort_unstable();
    let mut segments: IndexMap<String, String> =
        labels.iter().map(|l| (l.clone(), String::new())).collect();
    for (i, &(_, label_idx, content_start)) in found.iter().enumerate() {
        let end = found
            .get(i + 1)
            .map(|&(next_pos, _, _)| next_pos)
            .unwrap_or(text.len());
        let segment = text[content_start..end].trim();
        segments[labels[label_idx].as_str()] = segment.to_string();
    }
    BatchSplit { segments, diagnostics, found_any }
}

/// Finds the first valid occurrence of `label` (lowercased) in the response.
/// Returns (marker position, content start after optional colon).
fn find_label(lower: &str, original: &str, label: &str) -> Option<(usize, usize)> {
    let bytes = original.as_bytes();
    let mut search_from = 0;
    while let Some(rel) = lower[search_from..].find(label) {
        let pos = search_from + rel;
        let end = pos + label.len();
        let boundary_after = end >= bytes.len() || !is_ident_char(bytes[end]);
        let boundary_before = pos == 0 || !is_ident_char(bytes[pos - 1]);
        if boundary_after && boundary_before && marker_context_ok(bytes, pos) {
            let mut content = end;
            while content < bytes.len() && (bytes[content] == b' ' || bytes[content] == b'\t') {
                content += 1;
            }
            if content < bytes.len() && bytes[content] == b':' {
                content += 1;
            }
            return Some((pos, content));
        }
        search_from = pos + 1;
    }
    None
}

/// A marker is valid at line start (allowing leading whitespace) or after
/// list-closing punctuation.
fn marker_context_ok(bytes: &[u8], pos: usize) -> bool {
    let mut i = pos;
    while i > 0 {
        let c = bytes[i - 1];
        if c == b'\n' {
            return true;
        }
        if c == b' ' || c == b'\t' || c == b'\r' {
            i -= 1;
            continue;
        }
        return c == b']' || c == b')' || c == b',' || c == b'.' || c == b';';
    }
    true // start of text
}

/// Parses a bare list of quoted strings, e.g. `result = ["flu", "colon cancer"]`.
/// Used by the NER task plug-in.
pub fn parse_span_list(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let Some((open, close)) = locate_list(bytes) else {
        return Vec::new();
    };
    let Some(pieces) = split_top_level(bytes, open + 1, close) else {
        return Vec::new();
    };
    let mut spans = Vec::new();
    for (s, e) in pieces {
        if bytes[s] == b'"' || bytes[s] == b'\'' {
            if let Some(after) = skip_string(bytes, s) {
                if after <= e {
                    spans.push(unescape(&text[s + 1..after - 1]));
                    continue;
                }
            }
        }
        spans.push(text[s..e].trim().to_string());
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::EventType;

    fn schema() -> EventSchema {
        EventSchema::new(vec![
            EventType {
                name: "Die".into(),
                parent: "LifeEvent".into(),
                roles: vec![
                    "agent".into(),
                    "victim".into(),
                    "instrument".into(),
                    "time".into(),
                    "place".into(),
                ],
            },
            EventType {
                name: "Meet".into(),
                parent: "ContactEvent".into(),
                roles: vec!["entity".into(), "time".into(), "place".into()],
            },
        ])
        .unwrap()
    }

    #[test]
    fn parses_single_quoted_die_example() {
        let text = "result = [Die(mention='killed', agent=['He'], victim=['soldier'], instrument=[], time=[], place=['Iraq'])]";
        let outcome = parse_output(text, &schema());
        assert!(!outcome.fatal);
        assert_eq!(outcome.instances.len(), 1);
        let inst = &outcome.instances[0];
        assert_eq!(inst.event_type, "Die");
        assert_eq!(inst.mention, "killed");
        assert_eq!(inst.arguments["victim"], vec!["soldier"]);
        assert!(outcome.diagnostics.is_empty());
    }

    #[test]
    fn parses_empty_list() {
        let outcome = parse_output("result = []", &schema());
        assert!(!outcome.fatal);
        assert!(outcome.instances.is_empty());
        assert!(outcome.diagnostics.is_empty());
    }

    #[test]
    fn ignores_surrounding_prose() {
        let text = "Let me think about the events here.\nThe answer is:\nresult = [Meet(mention=\"met\", entity=[\"leaders\"], time=[], place=[\"Paris\"])]\nDone.";
        let outcome = parse_output(text, &schema());
        assert_eq!(outcome.instances.len(), 1);
        assert_eq!(outcome.instances[0].event_type, "Meet");
    }

    #[test]
    fn last_result_assignment_wins() {
        let text = "For example result = [Die(mention=\"x\")] would be wrong.\nresult = []";
        let outcome = parse_output(text, &schema());
        assert!(outcome.instances.is_empty());
        assert!(!outcome.fatal);
    }

    #[test]
    fn promotes_scalar_role_values() {
        let text = r#"result = [Die(mention="killed", victim="soldier")]"#;
        let outcome = parse_output(text, &schema());
        assert_eq!(outcome.instances[0].arguments["victim"], vec!["soldier"]);
    }

    #[test]
    fn quoted_key_style_accepted() {
        let text = r#"result = [Die("mention" = "killed", "victim" = ["soldier"])]"#;
        let outcome = parse_output(text, &schema());
        assert_eq!(outcome.instances.len(), 1);
        assert_eq!(outcome.instances[0].mention, "killed");
    }

    #[test]
    fn preserves_nested_parens_inside_quotes() {
        let text = r#"result = [Die(mention="killed (allegedly)", victim=["man [sic], armed"])]"#;
        let outcome = parse_output(text, &schema());
        assert_eq!(outcome.instances[0].mention, "killed (allegedly)");
        assert_eq!(outcome.instances[0].arguments["victim"], vec!["man [sic], armed"]);
    }

    #[test]
    fn unknown_event_dropped_with_diagnostic() {
        let text = r#"result = [Attack(mention="bombed"), Die(mention="died")]"#;
        let outcome = parse_output(text, &schema());
        assert_eq!(outcome.instances.len(), 1);
        assert_eq!(outcome.diagnostics.len(), 1);
        assert!(outcome.diagnostics[0].message.contains("Attack"));
        assert!(outcome.diagnostics[0].location.starts_with("offset"));
    }

    #[test]
    fn unknown_role_dropped_but_instance_kept() {
        let text = r#"result = [Die(mention="died", weapon=["knife"], victim=["man"])]"#;
        let outcome = parse_output(text, &schema());
        assert_eq!(outcome.instances.len(), 1);
        assert_eq!(outcome.instances[0].arguments["victim"], vec!["man"]);
        assert_eq!(outcome.diagnostics.len(), 1);
        assert!(outcome.diagnostics[0].message.contains("weapon"));
    }

    #[test]
    fn missing_mention_dropped() {
        let text = r#"result = [Die(victim=["soldier"])]"#;
        let outcome = parse_output(text, &schema());
        assert!(outcome.instances.is_empty());
        assert_eq!(outcome.diagnostics.len(), 1);
    }

    #[test]
    fn none_value_becomes_empty_list() {
        let text = r#"result = [Die(mention="died", victim=None)]"#;
        let outcome = parse_output(text, &schema());
        assert!(outcome.instances[0].arguments["victim"].is_empty());
    }

    #[test]
    fn garbage_is_fatal() {
        let outcome = parse_output("I could not find any events, sorry.", &schema());
        assert!(outcome.fatal);
        assert!(outcome.instances.is_empty());
        assert!(outcome.diagnostics[0].message.contains("parsing error"));
    }

    #[test]
    fn unbalanced_list_is_fatal() {
        let outcome = parse_output("result = [Die(mention=\"x\"", &schema());
        assert!(outcome.fatal);
    }

    #[test]
    fn serialize_meet_is_deterministic() {
        let s = schema();
        let inst = EventInstance::new(
            "Meet",
            "met",
            vec![
                ("entity".to_string(), vec!["leaders".to_string()]),
                ("time".to_string(), vec!["yesterday".to_string()]),
                ("place".to_string(), vec!["Paris".to_string()]),
            ],
            &s,
        )
        .unwrap();
        let text = serialize_instances(&[inst], &s).unwrap();
        assert_eq!(
            text,
            r#"result = [Meet(mention="met", entity=["leaders"], time=["yesterday"], place=["Paris"])]"#
        );
    }

    #[test]
    fn serialize_empty() {
        assert_eq!(serialize_instances(&[], &schema()).unwrap(), "result = []");
    }

    #[test]
    fn serialize_refuses_invalid_instance() {
        let s = schema();
        let mut inst = EventInstance::new("Die", "died", vec![], &s).unwrap();
        inst.event_type = "Attack".into();
        assert!(serialize_instances(&[inst], &s).is_err());
    }

    #[test]
    fn round_trip_with_escapes() {
        let s = schema();
        let inst = EventInstance::new(
            "Die",
            "said \"killed\"",
            vec![("victim".to_string(), vec!["a\\b".to_string(), "c, d".to_string()])],
            &s,
        )
        .unwrap();
        let text = serialize_instances(std::slice::from_ref(&inst), &s).unwrap();
        let outcome = parse_output(&text, &s);
        assert!(!outcome.fatal);
        assert_eq!(outcome.instances, vec![inst]);
    }

    #[test]
    fn batch_split_two_labels() {
        let labels = vec!["text1".to_string(), "text2".to_string()];
        let response = "text1: result = [] text2: result = []";
        let split = split_batch_answers(response, &labels);
        assert!(split.found_any);
        assert_eq!(split.segments["text1"], "result = []");
        assert_eq!(split.segments["text2"], "result = []");
        assert!(split.diagnostics.is_empty());
    }

    #[test]
    fn batch_split_missing_label() {
        let labels = vec!["text1".to_string(), "text2".to_string(), "text3".to_string()];
        let response = "text1: result = []\ntext2: result = []";
        let split = split_batch_answers(response, &labels);
        assert_eq!(split.segments["text3"], "");
        assert_eq!(split.diagnostics.len(), 1);
        assert!(split.diagnostics[0].message.contains("text3"));
    }

    #[test]
    fn batch_split_label_boundaries() {
        // text1 must not match inside text10.
        let labels: Vec<String> = (1..=10).map(|i| format!("text{i}")).collect();
        let response = (1..=10)
            .map(|i| format!("text{i}: result = []"))
            .collect::<Vec<_>>()
            .join("\n");
        let split = split_batch_answers(&response, &labels);
        for label in &labels {
            assert_eq!(split.segments[label.as_str()], "result = []", "label {label}");
        }
    }

    #[test]
    fn batch_split_case_insensitive_and_after_bracket() {
        let labels = vec!["text1".to_string(), "text2".to_string()];
        let response = "TEXT1: result = [Die(mention=\"died\")] Text2: result = []";
        let split = split_batch_answers(response, &labels);
        assert!(split.segments["text1"].contains("Die"));
        assert_eq!(split.segments["text2"], "result = []");
    }

    #[test]
    fn batch_split_total_failure_flags_batch() {
        let labels = vec!["text1".to_string()];
        let split = split_batch_answers("no labels anywhere", &labels);
        assert!(!split.found_any);
        assert_eq!(split.segments["text1"], "");
    }

    #[test]
    fn span_list_parsing() {
        assert_eq!(
            parse_span_list(r#"result = ["flu", "colon cancer"]"#),
            vec!["flu", "colon cancer"]
        );
        assert_eq!(parse_span_list("result = []"), Vec::<String>::new());
        assert_eq!(parse_span_list("the spans are ['x y']"), vec!["x y"]);
    }
}
