//! One expansion step of the search: answer generation, error extraction,
//! feedback generation, and the prompt rewrite.
//!
//! Steps 1 and 2 run the task model over a training batch and keep every
//! example whose prediction is not exactly right. Steps 3 and 4 are two
//! separate optimizer calls: one renders the feedback meta-prompt over the
//! error set, the other renders the rewrite meta-prompt (including the
//! prompt history) and parses the response into an instruction plus
//! per-type guideline edits. Types the optimizer does not mention inherit
//! their guidelines unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::instance::EventInstance;
use crate::parser::{parse_output, serialize_instances, Diagnostic, ParseOutcome, Severity};
use crate::prompt::{compose_definitions, PromptState, StateId, StateStore};
use crate::schema::EventSchema;
use crate::scorer;
use crate::template::MetaPromptTemplate;

/// One answered training query.
#[derive(Debug, Clone)]
pub struct AnsweredQuery {
    pub query: String,
    pub gold: Vec<EventInstance>,
    pub raw: String,
    pub outcome: ParseOutcome,
}

/// A training example the current prompt gets wrong: either the parse was
/// fatal or the prediction differs from gold under exact matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorExample {
    pub query: String,
    pub gold: Vec<EventInstance>,
    /// `None` when the answer could not be parsed at all.
    pub predicted: Option<Vec<EventInstance>>,
    pub raw_prediction: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl ErrorExample {
    pub fn parse_failed(&self) -> bool {
        self.predicted.is_none()
    }
}

/// Step 1: compose the prompt, batch-answer the queries, parse every
/// segment. Output is aligned 1:1 with the batch.
pub fn generate_answers(
    state: &PromptState,
    schema: &EventSchema,
    batch: &[(String, Vec<EventInstance>)],
    task: &Gateway,
    batch_size: usize,
) -> Result<Vec<AnsweredQuery>> {
    if batch.is_empty() {
        return Err(Error::Search("empty training batch".into()));
    }
    let prompt = crate::prompt::compose(state, schema)?;
    let queries: Vec<String> = batch.iter().map(|(q, _)| q.clone()).collect();
    let segments = task.batch_answer(&prompt, &queries, batch_size)?;
    Ok(batch
        .iter()
        .zip(segments)
        .map(|((query, gold), segment)| {
            let outcome = if segment.chunk_failed {
                ParseOutcome::fatal("parsing error: batch response had no labels", "offset 0")
            } else {
                parse_output(&segment.text, schema)
            };
            AnsweredQuery {
                query: query.clone(),
                gold: gold.clone(),
                raw: segment.text,
                outcome,
            }
        })
        .collect())
}

/// Step 2: keep exactly the answers that fail exact match or whose parse
/// was fatal.
pub fn extract_errors(answers: &[AnsweredQuery]) -> Vec<ErrorExample> {
    answers
        .iter()
        .filter_map(|a| {
            if a.outcome.fatal {
                return Some(ErrorExample {
                    query: a.query.clone(),
                    gold: a.gold.clone(),
                    predicted: None,
                    raw_prediction: a.raw.clone(),
                    diagnostics: a.outcome.diagnostics.clone(),
                });
            }
            if exact_match(&a.outcome.instances, &a.gold) {
                return None;
            }
            Some(ErrorExample {
                query: a.query.clone(),
                gold: a.gold.clone(),
                predicted: Some(a.outcome.instances.clone()),
                raw_prediction: a.raw.clone(),
                diagnostics: a.outcome.diagnostics.clone(),
            })
        })
        .collect()
}

/// Exact correctness under the scorer's own matching: every metric perfect.
fn exact_match(pred: &[EventInstance], gold: &[EventInstance]) -> bool {
    let counts = scorer::example_counts(pred, gold);
    [counts.ti, counts.tc, counts.ai, counts.ac]
        .iter()
        .all(|(_, fp, fn_)| *fp == 0 && *fn_ == 0)
}

/// Renders the error set for the `{example_string}` placeholder.
pub fn render_example_string(errors: &[ErrorExample], schema: &EventSchema) -> String {
    errors
        .iter()
        .map(|e| {
            let gold = serialize_instances(&e.gold, schema)
                .unwrap_or_else(|_| "result = []".to_string());
            let diagnostics = if e.diagnostics.is_empty() {
                "none".to_string()
            } else {
                e.diagnostics
                    .iter()
                    .map(|d| format!("{} ({})", d.message, d.location))
                    .collect::<Vec<_>>()
                    .join("; ")
            };
            format!(
                "Text: {}\nGold: {}\nPredicted: {}\nDiagnostics: {}",
                e.query,
                gold,
                if e.raw_prediction.trim().is_empty() {
                    "(empty)"
                } else {
                    e.raw_prediction.trim()
                },
                diagnostics
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Step 3: render the feedback meta-prompt and query the optimizer model.
/// Callers skip this step when the error set is empty.
pub fn generate_feedback(
    state: &PromptState,
    schema: &EventSchema,
    errors: &[ErrorExample],
    template: &MetaPromptTemplate,
    optimizer: &Gateway,
) -> Result<String> {
    if errors.is_empty() {
        return Err(Error::Search(
            "feedback generation requires a non-empty error set".into(),
        ));
    }
    let mut bindings = BTreeMap::new();
    bindings.insert("cur_prompt", state.instruction.clone());
    bindings.insert("event_definitions", compose_definitions(state, schema)?);
    bindings.insert("example_string", render_example_string(errors, schema));
    let prompt = template.render(&bindings)?;
    Ok(optimizer.complete(&prompt)?.response)
}

/// Parsed rewrite response: the new instruction and the guideline blocks
/// the optimizer chose to edit, plus diagnostics for skipped blocks.
#[derive(Debug, Clone)]
pub struct RewriteOutcome {
    pub instruction: String,
    pub guideline_edits: BTreeMap<String, String>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Step 4: render the rewrite meta-prompt (with the prompt history), query
/// the optimizer, parse the response, and apply the edits. Returns the id
/// of the stored child state.
#[allow(clippy::too_many_arguments)]
pub fn rewrite_prompt(
    store: &mut StateStore,
    parent_id: &StateId,
    schema: &EventSchema,
    errors: &[ErrorExample],
    feedback: &str,
    template: &MetaPromptTemplate,
    trajectory: &[String],
    optimizer: &Gateway,
) -> Result<StateId> {
    if feedback.trim().is_empty() {
        return Err(Error::Rewrite("feedback text is empty".into()));
    }
    let parent = store
        .get(parent_id)
        .ok_or_else(|| Error::Lineage(format!("unknown parent id `{parent_id}`")))?
        .clone();
    let mut bindings = BTreeMap::new();
    bindings.insert("cur_prompt", parent.instruction.clone());
    bindings.insert("event_definitions", compose_definitions(&parent, schema)?);
    bindings.insert("example_string", render_example_string(errors, schema));
    bindings.insert("feedback", feedback.to_string());
    bindings.insert("trajectory_prompts", render_trajectory(trajectory));
    let prompt = template.render(&bindings)?;
    let response = optimizer.complete(&prompt)?.response;
    let outcome = parse_rewrite_response(&response, schema)?;
    store.derive(
        parent_id,
        Some(outcome.instruction),
        &outcome.guideline_edits,
        schema,
    )
}

fn render_trajectory(trajectory: &[String]) -> String {
    trajectory
        .iter()
        .enumerate()
        .map(|(i, text)| format!("--- Prompt {i} ---\n{text}"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Extracts the instruction from the first `<START>…<END>` pair and the
/// guideline edits from `<CLASS_START>…<CLASS_END>` pairs. A single pair may
/// wrap several class blocks; they are split on `class ` headers. Malformed
/// blocks are skipped with a diagnostic (a partial edit is allowed); a
/// missing `<START>` block fails the whole rewrite.
pub fn parse_rewrite_response(response: &str, schema: &EventSchema) -> Result<RewriteOutcome> {
    let instruction = extract_between(response, "<START>", "<END>")
        .ok_or_else(|| Error::Rewrite("response has no <START>…<END> instruction block".into()))?
        .trim()
        .to_string();
    let mut guideline_edits = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let mut cursor = 0;
    while let Some(rel) = response[cursor..].find("<CLASS_START>") {
        let start = cursor + rel + "<CLASS_START>".len();
        let Some(end_rel) = response[start..].find("<CLASS_END>") else {
            diagnostics.push(Diagnostic {
                severity: Severity::Warning,
                message: "unterminated <CLASS_START> block skipped".into(),
                location: format!("offset {start}"),
            });
            break;
        };
        let body = &response[start..start + end_rel];
        for (offset, block) in split_class_blocks(body) {
            match class_block_type(&block) {
                Some(name) if schema.contains(&name) => {
                    guideline_edits.insert(name, block.trim_end().to_string());
                }
                Some(name) => diagnostics.push(Diagnostic {
                    severity: Severity::Warning,
                    message: format!("skipped guideline block for unknown event type `{name}`"),
                    location: format!("offset {}", start + offset),
                }),
                None => diagnostics.push(Diagnostic {
                    severity: Severity::Warning,
                    message: "skipped malformed guideline block without a class header".into(),
                    location: format!("offset {}", start + offset),
                }),
            }
        }
        cursor = start + end_rel + "<CLASS_END>".len();
    }
    Ok(RewriteOutcome { instruction, guideline_edits, diagnostics })
}

fn extract_between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(&text[start..end])
}

/// Splits a marker-pair body into one piece per `class ` header at line
/// start. Text before the first header forms its own (malformed) piece when
/// non-empty.
fn split_class_blocks(body: &str) -> Vec<(usize, String)> {
    let mut starts = Vec::new();
    for (pos, _) in body.match_indices("class ") {
        let at_line_start =
            pos == 0 || body[..pos].chars().next_back().is_some_and(|c| c == '\n');
        if at_line_start {
            starts.push(pos);
        }
    }
    if starts.is_empty() {
        let trimmed = body.trim();
        if trimmed.is_empty() {
            return Vec::new();
        }
        return vec![(0, trimmed.to_string())];
    }
    let mut pieces = Vec::new();
    if !body[..starts[0]].trim().is_empty() {
        pieces.push((0, body[..starts[0]].trim().to_string()));
    }
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(body.len());
        pieces.push((start, body[start..end].trim().to_string()));
    }
    pieces
}

/// The event type named by a `class Name(Parent):` header.
fn class_block_type(block: &str) -> Option<String> {
    let rest = block.trim_start().strip_prefix("class ")?;
    let name: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    let after = &rest[name.len()..];
    if name.is_empty() || !after.trim_start().starts_with('(') {
        return None;
    }
    Some(name)
}

// ---------------------------------------------------------------------------
// Error categorization
// ---------------------------------------------------------------------------

/// Best-effort analysis labels for error reporting. Assignment is rule-based
/// and never feeds back into the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    ParsingError,
    Hallucination,
    MultipleEvents,
    LabelNoise,
    Coreference,
    SpanOverprediction,
    ImplicitEvents,
    Other,
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ErrorCategory::ParsingError => "ParsingError",
            ErrorCategory::Hallucination => "Hallucination",
            ErrorCategory::MultipleEvents => "MultipleEvents",
            ErrorCategory::LabelNoise => "LabelNoise",
            ErrorCategory::Coreference => "Coreference",
            ErrorCategory::SpanOverprediction => "SpanOverprediction",
            ErrorCategory::ImplicitEvents => "ImplicitEvents",
            ErrorCategory::Other => "Other",
        };
        f.write_str(name)
    }
}

/// Irregular past-tense forms the verb heuristic would otherwise miss.
const IRREGULAR_VERBS: &[&str] = &[
    "went", "met", "gave", "took", "made", "got", "paid", "held", "left", "came", "said",
    "told", "found", "began", "saw", "sent", "sold", "bought", "brought", "sought", "fled",
    "won", "lost", "led", "fell", "rose", "broke", "spoke", "wrote", "shot", "struck", "fought",
];

fn looks_verbal(token: &str) -> bool {
    let t = token.to_lowercase();
    t.ends_with("ed") || t.ends_with("ing") || IRREGULAR_VERBS.contains(&t.as_str())
}

/// Classifies every error into at least one category. Fatal parses are
/// exclusively `ParsingError`; everything rule-free lands in `Other`.
pub fn categorize_errors(errors: &[ErrorExample]) -> BTreeMap<ErrorCategory, u32> {
    let mut histogram = BTreeMap::new();
    for error in errors {
        for category in categorize_one(error) {
            *histogram.entry(category).or_insert(0) += 1;
        }
    }
    histogram
}

/// Categories of a single error example.
pub fn categorize_one(error: &ErrorExample) -> Vec<ErrorCategory> {
    let Some(pred) = &error.predicted else {
        return vec![ErrorCategory::ParsingError];
    };
    let gold = &error.gold;
    let mut categories = Vec::new();

    // Predicted event type absent from the gold set.
    if pred
        .iter()
        .any(|p| !gold.iter().any(|g| g.event_type == p.event_type))
    {
        categories.push(ErrorCategory::Hallucination);
    }

    // Fewer predicted events than gold, with at least one type-correct match.
    if gold.len() > pred.len() && count_tc_matches(pred, gold) >= 1 {
        categories.push(ErrorCategory::MultipleEvents);
    }

    // Predicted span strictly contains a gold span (triggers or arguments).
    let pred_spans: Vec<&str> = pred
        .iter()
        .flat_map(|p| std::iter::once(p.mention.as_str()).chain(p.argument_spans().map(|(_, s)| s)))
        .collect();
    let gold_spans: Vec<&str> = gold
        .iter()
        .flat_map(|g| std::iter::once(g.mention.as_str()).chain(g.argument_spans().map(|(_, s)| s)))
        .collect();
    if pred_spans.iter().any(|p| {
        gold_spans
            .iter()
            .any(|g| p.len() > g.len() && contains_word(p, g))
    }) {
        categories.push(ErrorCategory::SpanOverprediction);
    }

    // Unmatched gold trigger whose mention does not look verbal.
    let ti_unmatched_nonverbal = gold.iter().any(|g| {
        let matched = pred.iter().any(|p| p.mention.trim() == g.mention.trim());
        !matched
            && g.mention
                .split_whitespace()
                .next()
                .is_some_and(|tok| !looks_verbal(tok))
    });
    if ti_unmatched_nonverbal {
        categories.push(ErrorCategory::ImplicitEvents);
    }

    // Argument span differs from gold, is not a containment case, but
    // overlaps the gold head word.
    let pred_args: Vec<&str> = pred
        .iter()
        .flat_map(|p| p.argument_spans().map(|(_, s)| s))
        .collect();
    let gold_args: Vec<&str> = gold
        .iter()
        .flat_map(|g| g.argument_spans().map(|(_, s)| s))
        .collect();
    let coref = pred_args.iter().any(|p| {
        gold_args.iter().any(|g| {
            if p == g || contains_word(p, g) || contains_word(g, p) {
                return false;
            }
            head_word(g).is_some_and(|head| contains_word(p, &head))
        })
    });
    if coref {
        categories.push(ErrorCategory::Coreference);
    }

    if categories.is_empty() {
        categories.push(ErrorCategory::Other);
    }
    categories
}

fn count_tc_matches(pred: &[EventInstance], gold: &[EventInstance]) -> usize {
    let mut consumed = vec![false; gold.len()];
    let mut count = 0;
    for p in pred {
        let hit = gold.iter().enumerate().position(|(i, g)| {
            !consumed[i] && g.event_type == p.event_type && g.mention.trim() == p.mention.trim()
        });
        if let Some(i) = hit {
            consumed[i] = true;
            count += 1;
        }
    }
    count
}

/// Whole-word containment: `needle`'s token sequence appears in `haystack`
/// on token boundaries (punctuation-insensitive).
fn contains_word(haystack: &str, needle: &str) -> bool {
    let hay_tokens: Vec<String> = tokens_of(haystack);
    let needle_tokens: Vec<String> = tokens_of(needle);
    if needle_tokens.is_empty() || needle_tokens.len() > hay_tokens.len() {
        return false;
    }
    hay_tokens
        .windows(needle_tokens.len())
        .any(|w| w == needle_tokens.as_slice())
}

fn tokens_of(span: &str) -> Vec<String> {
    span.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Last token of a span, stripped of punctuation.
fn head_word(span: &str) -> Option<String> {
    tokens_of(span).pop()
}
