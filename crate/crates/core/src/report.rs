//! Analysis reports over a search checkpoint: convergence, survival,
//! prompt-length/score pairs, guideline-edit statistics, error-category
//! histograms, and token accounting. Everything is emitted as CSV; plotting
//! is out of scope.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::gateway::{read_transcript, whitespace_tokens, ModelRole};
use crate::mcts::Checkpoint;
use crate::prompt::compose;

/// In-memory report bundle; [`write_reports`] persists it as one CSV per
/// member.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub convergence: String,
    pub survival: String,
    pub length_vs_score: String,
    pub edits: String,
    pub edit_summary: String,
    pub error_categories: String,
    pub tokens: Option<String>,
}

/// Builds every report from a checkpoint. `evals_dir` (when given) is
/// checked for each node's persisted dev evaluation; nodes without one are
/// marked incomplete in the convergence report. `transcripts` feeds the
/// token report.
pub fn build_reports(
    checkpoint: &Checkpoint,
    evals_dir: Option<&Path>,
    transcripts: Option<&Path>,
) -> Result<ReportBundle> {
    Ok(ReportBundle {
        convergence: convergence_csv(checkpoint, evals_dir)?,
        survival: survival_csv(checkpoint),
        length_vs_score: length_vs_score_csv(checkpoint)?,
        edits: edits_csv(checkpoint),
        edit_summary: edit_summary_csv(checkpoint),
        error_categories: error_categories_csv(checkpoint),
        tokens: match transcripts {
            Some(path) => Some(tokens_csv(path)?),
            None => None,
        },
    })
}

/// Builds and writes the bundle under `out_dir`.
pub fn write_reports(
    checkpoint: &Checkpoint,
    evals_dir: Option<&Path>,
    transcripts: Option<&Path>,
    out_dir: &Path,
) -> Result<ReportBundle> {
    let bundle = build_reports(checkpoint, evals_dir, transcripts)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("convergence.csv"), &bundle.convergence)?;
    std::fs::write(out_dir.join("survival.csv"), &bundle.survival)?;
    std::fs::write(out_dir.join("length_vs_score.csv"), &bundle.length_vs_score)?;
    std::fs::write(out_dir.join("edits.csv"), &bundle.edits)?;
    std::fs::write(out_dir.join("edit_summary.csv"), &bundle.edit_summary)?;
    std::fs::write(out_dir.join("error_categories.csv"), &bundle.error_categories)?;
    if let Some(tokens) = &bundle.tokens {
        std::fs::write(out_dir.join("tokens.csv"), tokens)?;
    }
    Ok(bundle)
}

fn fmt_f64(value: f64) -> String {
    format!("{value:.6}")
}

/// One row per node in creation order with the best reward seen so far.
fn convergence_csv(checkpoint: &Checkpoint, evals_dir: Option<&Path>) -> Result<String> {
    let mut out = String::from("node,state,depth,dev_reward,best_so_far,complete\n");
    let mut best = f64::NEG_INFINITY;
    for node in &checkpoint.nodes {
        best = best.max(node.dev_reward);
        let complete = match evals_dir {
            None => 1,
            Some(dir) => {
                let path = dir.join(format!("{}_dev.predictions.jsonl", node.state));
                usize::from(path.exists())
            }
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            node.id.0,
            node.state,
            node.depth,
            fmt_f64(node.dev_reward),
            fmt_f64(best),
            complete
        )
        .expect("string write");
    }
    Ok(out)
}

/// Fraction of explored prompts scoring at least each threshold, over an
/// integer grid from 0 to 100. Non-increasing in the threshold.
fn survival_csv(checkpoint: &Checkpoint) -> String {
    let total = checkpoint.nodes.len() as f64;
    let mut out = String::from("threshold,fraction\n");
    for threshold in 0..=100u32 {
        let surviving = checkpoint
            .nodes
            .iter()
            .filter(|n| n.dev_reward >= f64::from(threshold))
            .count() as f64;
        writeln!(out, "{},{}", threshold, fmt_f64(surviving / total)).expect("string write");
    }
    out
}

/// (prompt token count, score) pairs. Lengths count the full composed
/// prompt, inherited guidelines included, in whitespace tokens.
fn length_vs_score_csv(checkpoint: &Checkpoint) -> Result<String> {
    let mut out = String::from("node,prompt_tokens,dev_reward\n");
    for node in &checkpoint.nodes {
        let state = checkpoint.state_of(node.id);
        let text = compose(state, &checkpoint.schema)?;
        writeln!(
            out,
            "{},{},{}",
            node.id.0,
            whitespace_tokens(&text),
            fmt_f64(node.dev_reward)
        )
        .expect("string write");
    }
    Ok(out)
}

/// Per-node edit statistics: how many guidelines the rewrite touched and
/// how many tokens those edited guidelines carry.
fn edits_csv(checkpoint: &Checkpoint) -> String {
    let mut out = String::from("node,depth,edited_guidelines,instruction_edited,edited_tokens\n");
    for node in &checkpoint.nodes {
        if node.parent.is_none() {
            continue;
        }
        let state = checkpoint.state_of(node.id);
        let edited: Vec<&String> = state.edited_guideline_types().collect();
        let edited_tokens: u32 = edited
            .iter()
            .filter_map(|ty| state.guidelines.get(ty.as_str()))
            .map(|text| whitespace_tokens(text))
            .sum();
        writeln!(
            out,
            "{},{},{},{},{}",
            node.id.0,
            node.depth,
            edited.len(),
            u8::from(state.instruction_edited()),
            edited_tokens
        )
        .expect("string write");
    }
    out
}

/// Mean edited-guideline count and mean edited-guideline tokens over all
/// non-root nodes.
fn edit_summary_csv(checkpoint: &Checkpoint) -> String {
    let mut count = 0usize;
    let mut edits = 0usize;
    let mut tokens = 0u64;
    for node in &checkpoint.nodes {
        if node.parent.is_none() {
            continue;
        }
        let state = checkpoint.state_of(node.id);
        let edited: Vec<&String> = state.edited_guideline_types().collect();
        tokens += edited
            .iter()
            .filter_map(|ty| state.guidelines.get(ty.as_str()))
            .map(|text| u64::from(whitespace_tokens(text)))
            .sum::<u64>();
        edits += edited.len();
        count += 1;
    }
    let mut out = String::from("nodes,mean_edited_guidelines,mean_edited_tokens\n");
    if count == 0 {
        out.push_str("0,0.000000,0.000000\n");
    } else {
        writeln!(
            out,
            "{},{},{}",
            count,
            fmt_f64(edits as f64 / count as f64),
            fmt_f64(tokens as f64 / count as f64)
        )
        .expect("string write");
    }
    out
}

/// Long-form error-category histogram per node.
fn error_categories_csv(checkpoint: &Checkpoint) -> String {
    let mut out = String::from("node,category,count\n");
    for node in &checkpoint.nodes {
        for (category, count) in &node.error_categories {
            writeln!(out, "{},{},{}", node.id.0, category, count).expect("string write");
        }
    }
    out
}

/// Mean output tokens (completion plus reasoning) per model role.
fn tokens_csv(transcripts: &Path) -> Result<String> {
    let exchanges = read_transcript(transcripts)?;
    let mut per_role: BTreeMap<&'static str, (u64, u64)> = BTreeMap::new();
    for exchange in &exchanges {
        let key = match exchange.role {
            ModelRole::Task => "task",
            ModelRole::Optimizer => "optimizer",
        };
        let slot = per_role.entry(key).or_insert((0, 0));
        slot.0 += 1;
        slot.1 += u64::from(exchange.tokens.completion) + u64::from(exchange.tokens.reasoning);
    }
    let mut out = String::from("role,exchanges,mean_output_tokens\n");
    for (role, (count, tokens)) in per_role {
        writeln!(
            out,
            "{},{},{}",
            role,
            count,
            fmt_f64(tokens as f64 / count as f64)
        )
        .expect("string write");
    }
    Ok(out)
}
