//! Dataset ingestion and validation.
//!
//! Examples live in JSONL, one object per line. For event extraction the
//! carrier is `{id, text, events: [{type, trigger, args: [{role, spans}]}]}`;
//! the accuracy task uses `{id, text, label}` and the NER task
//! `{id, text, spans: [{text, offset?}]}`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{EventInstance, NerSpan};
use crate::schema::EventSchema;

/// Which metric plug-in scores the task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    #[default]
    Ee,
    Accuracy,
    Ner,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Ee => "ee",
            TaskKind::Accuracy => "accuracy",
            TaskKind::Ner => "ner",
        })
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ee" => Ok(TaskKind::Ee),
            "accuracy" => Ok(TaskKind::Accuracy),
            "ner" => Ok(TaskKind::Ner),
            other => Err(Error::Config(format!("unknown task kind `{other}`"))),
        }
    }
}

/// Gold annotation, by task kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Gold {
    Events(Vec<EventInstance>),
    Label(String),
    Spans(Vec<NerSpan>),
}

impl Gold {
    pub fn events(&self) -> &[EventInstance] {
        match self {
            Gold::Events(events) => events,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub gold: Gold,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: String,
    pub kind: TaskKind,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Training pairs (query text, gold events) for the search engine.
    pub fn train_pairs(&self) -> Vec<(String, Vec<EventInstance>)> {
        self.examples
            .iter()
            .map(|e| (e.text.clone(), e.gold.events().to_vec()))
            .collect()
    }

    /// Event-instance counts per type, plus a `None` row for event-free
    /// examples.
    pub fn type_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for example in &self.examples {
            let events = example.gold.events();
            if events.is_empty() {
                *counts.entry("None".to_string()).or_insert(0) += 1;
            }
            for event in events {
                *counts.entry(event.event_type.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Table-style counts listing, one `type  count` line each.
    pub fn counts_table(&self) -> String {
        let counts = self.type_counts();
        let mut out = format!("split {} ({} examples)\n", self.split, self.len());
        for (ty, count) in counts {
            out.push_str(&format!("{ty:<20} {count}\n"));
        }
        out
    }
}

// JSONL carriers --------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct EeRecord {
    id: String,
    text: String,
    #[serde(default)]
    events: Vec<EventRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    #[serde(rename = "type")]
    event_type: String,
    trigger: String,
    #[serde(default)]
    args: Vec<ArgRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArgRecord {
    role: String,
    spans: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRecord {
    id: String,
    text: String,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpanRecord {
    id: String,
    text: String,
    #[serde(default)]
    spans: Vec<NerSpan>,
}

/// Loads and validates a JSONL dataset. For event extraction every gold
/// instance must be schema-valid; offenders are listed and the load aborts.
pub fn load_dataset(
    path: &Path,
    split: &str,
    kind: TaskKind,
    schema: Option<&EventSchema>,
) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut examples = Vec::new();
    let mut invalid = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example = match kind {
            TaskKind::Ee => {
                let record: EeRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::Data(format!("{} line {lineno}: {e}", path.display()))
                })?;
                let schema = schema.ok_or_else(|| {
                    Error::Data("event extraction datasets require a schema".into())
                })?;
                let mut events = Vec::new();
                for ev in record.events {
                    let args = ev.args.into_iter().map(|a| (a.role, a.spans));
                    match EventInstance::new(&ev.event_type, &ev.trigger, args, schema) {
                        Ok(instance) => events.push(instance),
                        Err(e) => invalid.push(format!(
                            "{} line {lineno} (id {}): {e}",
                            path.display(),
                            record.id
                        )),
                    }
                }
                Example { id: record.id, text: record.text, gold: Gold::Events(events) }
            }
            TaskKind::Accuracy => {
                let record: LabelRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::Data(format!("{} line {lineno}: {e}", path.display()))
                })?;
                Example { id: record.id, text: record.text, gold: Gold::Label(record.label) }
            }
            TaskKind::Ner => {
                let record: SpanRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::Data(format!("{} line {lineno}: {e}", path.display()))
                })?;
                Example { id: record.id, text: record.text, gold: Gold::Spans(record.spans) }
            }
        };
        if !seen_ids.insert(example.id.clone()) {
            invalid.push(format!(
                "{} line {lineno}: duplicate example id `{}`",
                path.display(),
                example.id
            ));
        }
        examples.push(example);
    }
    if !invalid.is_empty() {
        return Err(Error::Data(format!(
            "invalid gold annotations:\n{}",
            invalid.join("\n")
        )));
    }
    Ok(Dataset { split: split.to_string(), kind, examples })
}

/// Writes an event-extraction dataset back to JSONL in the carrier format.
pub fn save_ee_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for example in &dataset.examples {
        let record = EeRecord {
            id: example.id.clone(),
            text: example.text.clone(),
            events: example
                .gold
                .events()
                .iter()
                .map(|e| EventRecord {
                    event_type: e.event_type.clone(),
                    trigger: e.mention.clone(),
                    args: e
                        .arguments
                        .iter()
                        .filter(|(_, spans)| !spans.is_empty())
                        .map(|(role, spans)| ArgRecord { role: role.clone(), spans: spans.clone() })
                        .collect(),
                })
                .collect(),
        };
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}
