//! Run configuration, evaluation runs, and the optimize/replay entry points.
//!
//! A run is described by a TOML file with `[task]`, `[search]`,
//! `[task_model]`, `[optimizer_model]`, `[templates]` and `[run]` sections.
//! Relative paths resolve against the config file's directory. Flags
//! override individual values; secrets only ever come from environment
//! variables.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Dataset, Gold, TaskKind};
use crate::error::{Error, Result};
use crate::gateway::{
    Decoding, EchoBackend, ExhaustionPolicy, Gateway, HttpBackend, HttpBackendConfig,
    MockBackend, ModelBackend, ModelRole, TranscriptWriter,
};
use crate::instance::{EventInstance, NerSpan};
use crate::mcts::{Checkpoint, Search, SearchConfig, SearchContext};
use crate::parser::{parse_output, parse_span_list, serialize_instances};
use crate::prompt::{compose, PromptState};
use crate::schema::EventSchema;
use crate::scorer::{score_accuracy, score_ee, score_ner, ScoreReport};
use crate::template::{
    MetaPromptTemplate, DEFAULT_FEEDBACK_TEMPLATE, DEFAULT_REWRITE_TEMPLATE,
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskSection,
    #[serde(default)]
    pub search: SearchConfig,
    pub task_model: ModelSpec,
    pub optimizer_model: ModelSpec,
    #[serde(default)]
    pub templates: TemplateSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSection {
    #[serde(default)]
    pub kind: TaskKind,
    pub schema: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub initial_prompt: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TemplateSection {
    pub feedback: Option<PathBuf>,
    pub rewrite: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, output_dir: default_output_dir(), parallelism: 1 }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/run")
}
fn default_parallelism() -> usize {
    1
}

/// Backend choice for one model role.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum ModelSpec {
    Mock {
        script: Option<PathBuf>,
        #[serde(default)]
        exhaustion: ExhaustionPolicy,
        temperature: Option<f64>,
        max_tokens: Option<u32>,
    },
    Http {
        #[serde(flatten)]
        http: HttpBackendConfig,
        temperature: Option<f64>,
        max_tokens: Option<u32>,
    },
    /// Echoes the labeled queries back; handy for alignment smoke tests.
    Echo {},
}

impl RunConfig {
    /// Parses the TOML and resolves every relative path against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.search.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        for slot in [
            &mut self.task.schema,
            &mut self.task.train,
            &mut self.task.dev,
            &mut self.task.test,
            &mut self.task.initial_prompt,
            &mut self.templates.feedback,
            &mut self.templates.rewrite,
        ]
        .into_iter()
        .flatten()
        {
            resolve(slot);
        }
        for spec in [&mut self.task_model, &mut self.optimizer_model] {
            if let ModelSpec::Mock { script: Some(script), .. } = spec {
                resolve(script);
            }
        }
        resolve(&mut self.run.output_dir);
    }
}

/// Builds the backend named by a model spec and wraps it in a gateway with
/// the role's decoding defaults (overridable per spec).
pub fn build_gateway(
    spec: &ModelSpec,
    role: ModelRole,
    parallelism: usize,
    transcript: Option<Arc<TranscriptWriter>>,
) -> Result<Gateway> {
    let mut decoding = Decoding::default_for(role);
    let backend: Box<dyn ModelBackend> = match spec {
        ModelSpec::Mock { script, exhaustion, temperature, max_tokens } => {
            if let Some(t) = temperature {
                decoding.temperature = *t;
            }
            if let Some(m) = max_tokens {
                decoding.max_tokens = *m;
            }
            match script {
                Some(path) => Box::new(MockBackend::load(path, *exhaustion)?),
                None => Box::new(MockBackend::new(Vec::new(), *exhaustion)),
            }
        }
        ModelSpec::Http { http, temperature, max_tokens } => {
            if let Some(t) = temperature {
                decoding.temperature = *t;
            }
            if let Some(m) = max_tokens {
                decoding.max_tokens = *m;
            }
            Box::new(HttpBackend::new(http.clone())?)
        }
        ModelSpec::Echo {} => Box::new(EchoBackend::new()),
    };
    let mut gateway = Gateway::new(backend, role)
        .with_decoding(decoding)
        .with_parallelism(parallelism);
    if let Some(t) = transcript {
        gateway = gateway.with_transcript(t);
    }
    Ok(gateway)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Score of one evaluation run: the four-metric report for event
/// extraction, a bare scalar for the plug-in tasks.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalScore {
    Ee(ScoreReport),
    Scalar { kind: TaskKind, value: f64 },
}

impl EvalScore {
    pub fn reward(&self) -> f64 {
        match self {
            EvalScore::Ee(report) => report.reward,
            EvalScore::Scalar { value, .. } => *value,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            EvalScore::Ee(report) => report.to_json(),
            EvalScore::Scalar { kind, value } => serde_json::to_string_pretty(
                &serde_json::json!({ "task": kind.to_string(), "score": value }),
            )
            .expect("score serializes"),
        }
    }

    pub fn summary_row(&self) -> String {
        match self {
            EvalScore::Ee(report) => report.row(),
            EvalScore::Scalar { kind, value } => format!("{kind} score {value:6.2}"),
        }
    }
}

/// One persisted prediction line. `prediction_raw` holds the canonical
/// serialized form when the answer parsed, and the raw model segment when
/// it did not, so a replay reproduces the identical score either way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub prediction_raw: String,
    pub fatal: bool,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub score: EvalScore,
    pub predictions: Vec<PredictionRecord>,
}

/// Evaluates one prompt state over a dataset: batch-answers every example,
/// parses per the task kind, scores against gold.
pub fn evaluate_dataset(
    state: &PromptState,
    schema: &EventSchema,
    dataset: &Dataset,
    task: &Gateway,
    batch_size: usize,
) -> Result<EvalOutcome> {
    let prompt = compose(state, schema)?;
    let queries: Vec<String> = dataset.examples.iter().map(|e| e.text.clone()).collect();
    let segments = task.batch_answer(&prompt, &queries, batch_size)?;
    debug_assert_eq!(segments.len(), dataset.len());

    match dataset.kind {
        TaskKind::Ee => {
            let mut predictions = Vec::with_capacity(dataset.len());
            let mut parsed: Vec<Vec<EventInstance>> = Vec::with_capacity(dataset.len());
            let mut golds: Vec<Vec<EventInstance>> = Vec::with_capacity(dataset.len());
            for (example, segment) in dataset.examples.iter().zip(&segments) {
                let outcome = if segment.chunk_failed {
                    crate::parser::ParseOutcome::fatal(
                        "parsing error: batch response had no labels",
                        "offset 0",
                    )
                } else {
                    parse_output(&segment.text, schema)
                };
                let prediction_raw = if outcome.fatal {
                    segment.text.clone()
                } else {
                    serialize_instances(&outcome.instances, schema)?
                };
                predictions.push(PredictionRecord {
                    id: example.id.clone(),
                    prediction_raw,
                    fatal: outcome.fatal,
                });
                parsed.push(outcome.instances);
                golds.push(example.gold.events().to_vec());
            }
            let report = score_ee(&parsed, &golds)?;
            Ok(EvalOutcome { score: EvalScore::Ee(report), predictions })
        }
        TaskKind::Accuracy => {
            let mut predictions = Vec::with_capacity(dataset.len());
            let mut preds = Vec::with_capacity(dataset.len());
            let mut golds = Vec::with_capacity(dataset.len());
            for (example, segment) in dataset.examples.iter().zip(&segments) {
                let answer = segment.text.trim().to_string();
                predictions.push(PredictionRecord {
                    id: example.id.clone(),
                    prediction_raw: answer.clone(),
                    fatal: segment.chunk_failed,
                });
                preds.push(answer);
                golds.push(match &example.gold {
                    Gold::Label(label) => label.clone(),
                    _ => String::new(),
                });
            }
            let value = score_accuracy(&preds, &golds)?;
            Ok(EvalOutcome {
                score: EvalScore::Scalar { kind: TaskKind::Accuracy, value },
                predictions,
            })
        }
        TaskKind::Ner => {
            let mut predictions = Vec::with_capacity(dataset.len());
            let mut preds: Vec<Vec<NerSpan>> = Vec::with_capacity(dataset.len());
            let mut golds: Vec<Vec<NerSpan>> = Vec::with_capacity(dataset.len());
            for (example, segment) in dataset.examples.iter().zip(&segments) {
                predictions.push(PredictionRecord {
                    id: example.id.clone(),
                    prediction_raw: segment.text.clone(),
                    fatal: segment.chunk_failed,
                });
                preds.push(
                    parse_span_list(&segment.text)
                        .into_iter()
                        .map(NerSpan::text)
                        .collect(),
                );
                golds.push(match &example.gold {
                    Gold::Spans(spans) => spans.clone(),
                    _ => Vec::new(),
                });
            }
            let value = score_ner(&preds, &golds)?;
            Ok(EvalOutcome {
                score: EvalScore::Scalar { kind: TaskKind::Ner, value },
                predictions,
            })
        }
    }
}

/// Writes `{name}.predictions.jsonl` and `{name}.report.json` under `dir`.
pub fn persist_eval(outcome: &EvalOutcome, dir: &Path, name: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut lines = String::new();
    for record in &outcome.predictions {
        lines.push_str(&serde_json::to_string(record)?);
        lines.push('\n');
    }
    std::fs::write(dir.join(format!("{name}.predictions.jsonl")), lines)?;
    std::fs::write(
        dir.join(format!("{name}.report.json")),
        outcome.score.to_json(),
    )?;
    Ok(())
}

/// Rescores a persisted predictions file against its dataset. The result is
/// byte-identical to the original report for any run of this crate.
pub fn replay_predictions(
    predictions_path: &Path,
    dataset: &Dataset,
    schema: Option<&EventSchema>,
) -> Result<EvalScore> {
    use std::io::BufRead;
    let file = std::fs::File::open(predictions_path)
        .map_err(|e| Error::Data(format!("{}: {e}", predictions_path.display())))?;
    let mut records = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)?;
        records.push(record);
    }
    if records.len() != dataset.len() {
        return Err(Error::Data(format!(
            "prediction count {} does not match dataset size {}",
            records.len(),
            dataset.len()
        )));
    }
    for (record, example) in records.iter().zip(&dataset.examples) {
        if record.id != example.id {
            return Err(Error::Data(format!(
                "prediction id `{}` does not match example id `{}`",
                record.id, example.id
            )));
        }
    }
    match dataset.kind {
        TaskKind::Ee => {
            let schema = schema.ok_or_else(|| {
                Error::Data("replaying an event-extraction run requires a schema".into())
            })?;
            let mut parsed = Vec::with_capacity(records.len());
            let mut golds = Vec::with_capacity(records.len());
            for (record, example) in records.iter().zip(&dataset.examples) {
                let outcome = parse_output(&record.prediction_raw, schema);
                parsed.push(outcome.instances);
                golds.push(example.gold.events().to_vec());
            }
            Ok(EvalScore::Ee(score_ee(&parsed, &golds)?))
        }
        TaskKind::Accuracy => {
            let preds: Vec<String> = records
                .iter()
                .map(|r| r.prediction_raw.trim().to_string())
                .collect();
            let golds: Vec<String> = dataset
                .examples
                .iter()
                .map(|e| match &e.gold {
                    Gold::Label(label) => label.clone(),
                    _ => String::new(),
                })
                .collect();
            Ok(EvalScore::Scalar {
                kind: TaskKind::Accuracy,
                value: score_accuracy(&preds, &golds)?,
            })
        }
        TaskKind::Ner => {
            let preds: Vec<Vec<NerSpan>> = records
                .iter()
                .map(|r| {
                    parse_span_list(&r.prediction_raw)
                        .into_iter()
                        .map(NerSpan::text)
                        .collect()
                })
                .collect();
            let golds: Vec<Vec<NerSpan>> = dataset
                .examples
                .iter()
                .map(|e| match &e.gold {
                    Gold::Spans(spans) => spans.clone(),
                    _ => Vec::new(),
                })
                .collect();
            Ok(EvalScore::Scalar { kind: TaskKind::Ner, value: score_ner(&preds, &golds)? })
        }
    }
}

// ---------------------------------------------------------------------------
// Optimize entry point
// ---------------------------------------------------------------------------

/// Everything loaded from a run configuration.
pub struct RunAssets {
    pub config: RunConfig,
    pub schema: EventSchema,
    pub train: Dataset,
    pub dev: Dataset,
    pub root: PromptState,
    pub feedback_template: MetaPromptTemplate,
    pub rewrite_template: MetaPromptTemplate,
}

/// Loads schema, splits, root prompt, and templates named by the config.
pub fn load_assets(config: RunConfig) -> Result<RunAssets> {
    if config.task.kind != TaskKind::Ee {
        return Err(Error::Config(
            "prompt optimization runs are defined for the event-extraction task; \
             use `evaluate`/`replay` for the accuracy and NER plug-ins"
                .into(),
        ));
    }
    let schema_path = config
        .task
        .schema
        .as_ref()
        .ok_or_else(|| Error::Config("[task].schema is required".into()))?;
    let schema = EventSchema::load(schema_path)?;
    let train_path = config
        .task
        .train
        .as_ref()
        .ok_or_else(|| Error::Config("[task].train is required".into()))?;
    let dev_path = config
        .task
        .dev
        .as_ref()
        .ok_or_else(|| Error::Config("[task].dev is required".into()))?;
    let train = load_dataset(train_path, "train", config.task.kind, Some(&schema))?;
    let dev = load_dataset(dev_path, "dev", config.task.kind, Some(&schema))?;
    let prompt_path = config
        .task
        .initial_prompt
        .as_ref()
        .ok_or_else(|| Error::Config("[task].initial_prompt is required".into()))?;
    let root = PromptState::from_json(&std::fs::read_to_string(prompt_path)?)?;
    compose(&root, &schema)?; // fail fast on schema/prompt mismatch
    let feedback_template = match &config.templates.feedback {
        Some(path) => MetaPromptTemplate::load(path)?,
        None => MetaPromptTemplate::new(DEFAULT_FEEDBACK_TEMPLATE),
    };
    let rewrite_template = match &config.templates.rewrite {
        Some(path) => MetaPromptTemplate::load(path)?,
        None => MetaPromptTemplate::new(DEFAULT_REWRITE_TEMPLATE),
    };
    Ok(RunAssets {
        config,
        schema,
        train,
        dev,
        root,
        feedback_template,
        rewrite_template,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    pub iterations: u32,
    pub nodes: usize,
    pub best_node: u32,
    pub best_state: String,
    pub best_depth: u32,
    pub best_dev_reward: f64,
    pub checkpoint: PathBuf,
}

/// Runs (or resumes) the full search described by the assets. Checkpoints
/// land in `{output_dir}/checkpoint.json`, transcripts in
/// `{output_dir}/transcripts.jsonl`, and every dev evaluation is persisted
/// under `{output_dir}/evals/`.
pub fn optimize(assets: &RunAssets, resume: bool) -> Result<OptimizeSummary> {
    let out = &assets.config.run.output_dir;
    std::fs::create_dir_all(out)?;
    let checkpoint_path = out.join("checkpoint.json");
    let transcript_path = out.join("transcripts.jsonl");
    let resuming = resume && checkpoint_path.exists();
    let transcript = Arc::new(if resuming {
        TranscriptWriter::append_to(&transcript_path)?
    } else {
        TranscriptWriter::create(&transcript_path)?
    });

    let task = build_gateway(
        &assets.config.task_model,
        ModelRole::Task,
        assets.config.run.parallelism,
        Some(transcript.clone()),
    )?;
    let optimizer = build_gateway(
        &assets.config.optimizer_model,
        ModelRole::Optimizer,
        assets.config.run.parallelism,
        Some(transcript),
    )?;

    let evals_dir = out.join("evals");
    let batch_size = assets.config.search.batch_size;
    let dev_eval = |state: &PromptState| -> Result<f64> {
        let outcome =
            evaluate_dataset(state, &assets.schema, &assets.dev, &task, batch_size)?;
        persist_eval(&outcome, &evals_dir, &format!("{}_dev", state.id))?;
        Ok(outcome.score.reward())
    };

    let train_pairs = assets.train.train_pairs();
    let ctx = SearchContext {
        schema: &assets.schema,
        train: &train_pairs,
        task: &task,
        optimizer: &optimizer,
        feedback_template: &assets.feedback_template,
        rewrite_template: &assets.rewrite_template,
        dev_eval: &dev_eval,
    };

    let mut search = if resuming {
        Search::resume(Checkpoint::load(&checkpoint_path)?, ctx)?
    } else {
        Search::new(
            assets.config.search,
            ctx,
            assets.root.clone(),
            assets.config.run.seed,
        )?
    };
    search.run(Some(&checkpoint_path))?;

    let best = search.node(search.best_node());
    Ok(OptimizeSummary {
        iterations: search.iteration(),
        nodes: search.nodes().len(),
        best_node: best.id.0,
        best_state: best.state.to_string(),
        best_depth: best.depth,
        best_dev_reward: best.dev_reward,
        checkpoint: checkpoint_path,
    })
}
