//! Uniform access to the task and optimizer models.
//!
//! Two backends implement [`ModelBackend`]: an HTTP client for
//! OpenAI-compatible chat-completions services, and a deterministic scripted
//! mock for offline runs and tests. The gateway layers batch prompting
//! (several labeled queries per request) and JSONL transcripts on top.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::parser::{split_batch_answers, Diagnostic};

/// Which model a request is for. Decoding defaults differ: the task model
/// decodes greedily, the optimizer samples at temperature 0.7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Task,
    Optimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Decoding {
    pub fn default_for(role: ModelRole) -> Self {
        match role {
            ModelRole::Task => Self { temperature: 0.0, max_tokens: 4096 },
            ModelRole::Optimizer => Self { temperature: 0.7, max_tokens: 4096 },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u32,
    pub completion: u32,
    pub reasoning: u32,
}

/// One request/response with a model backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelExchange {
    pub role: ModelRole,
    pub prompt: String,
    pub decoding: Decoding,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    pub tokens: TokenUsage,
}

/// Whitespace token count, the fallback when a backend reports no usage.
pub fn whitespace_tokens(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub role: ModelRole,
    pub prompt: String,
    pub decoding: Decoding,
}

pub trait ModelBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<ModelExchange>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<ModelExchange> {
        (**self).complete(request)
    }
}

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------

/// Matcher for one script entry: a prompt substring or the hex SHA-256 of
/// the whole prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    Substring { r#match: String },
    PromptHash { match_sha256: String },
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Substring { r#match } => prompt.contains(r#match.as_str()),
            Matcher::PromptHash { match_sha256 } => {
                let digest = Sha256::digest(prompt.as_bytes());
                format!("{digest:x}") == *match_sha256
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockScriptEntry {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

/// What the mock does when no entry matches a prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExhaustionPolicy {
    /// Surface a non-retryable backend error.
    #[default]
    Error,
    /// Return an empty response.
    Empty,
    /// Return the prompt itself.
    Echo,
}

/// Deterministic scripted backend. Lookup is matcher-based, not
/// sequence-based: the first entry whose matcher hits the prompt wins, so
/// identical prompts always get identical responses, including under
/// concurrent use.
pub struct MockBackend {
    entries: Vec<MockScriptEntry>,
    exhaustion: ExhaustionPolicy,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(entries: Vec<MockScriptEntry>, exhaustion: ExhaustionPolicy) -> Self {
        Self { entries, exhaustion, calls: AtomicUsize::new(0) }
    }

    /// Loads a JSONL script: one `{"match": …, "response": …}` per line.
    pub fn load(path: &Path, exhaustion: ExhaustionPolicy) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("mock script {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: MockScriptEntry = serde_json::from_str(&line).map_err(|e| {
                Error::Config(format!(
                    "mock script {} line {}: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries, exhaustion))
    }

    pub fn substring(pairs: &[(&str, &str)]) -> Self {
        let entries = pairs
            .iter()
            .map(|(m, r)| MockScriptEntry {
                matcher: Matcher::Substring { r#match: m.to_string() },
                response: r.to_string(),
                reasoning: None,
            })
            .collect();
        Self::new(entries, ExhaustionPolicy::Error)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ModelBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<ModelExchange> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hit = self.entries.iter().find(|e| e.matcher.matches(&request.prompt));
        let (response, reasoning) = match hit {
            Some(entry) => (entry.response.clone(), entry.reasoning.clone()),
            None => match self.exhaustion {
                ExhaustionPolicy::Error => {
                    return Err(Error::Backend {
                        message: "mock script exhausted: no matcher for prompt".into(),
                        retryable: false,
                    })
                }
                ExhaustionPolicy::Empty => (String::new(), None),
                ExhaustionPolicy::Echo => (request.prompt.clone(), None),
            },
        };
        Ok(ModelExchange {
            role: request.role,
            prompt: request.prompt.clone(),
            decoding: request.decoding,
            tokens: TokenUsage {
                prompt: whitespace_tokens(&request.prompt),
                completion: whitespace_tokens(&response),
                reasoning: reasoning.as_deref().map_or(0, whitespace_tokens),
            },
            response,
            reasoning,
        })
    }
}

/// Test backend that answers a batched request by echoing the labeled query
/// lines back, so split answers align with the original queries.
#[derive(Default)]
pub struct EchoBackend {
    calls: AtomicUsize,
}

impl EchoBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ModelBackend for EchoBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<ModelExchange> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let response = request
            .prompt
            .lines()
            .filter(|line| {
                let rest = line.strip_prefix("text").unwrap_or("");
                let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
                !digits.is_empty() && rest[digits.len()..].starts_with(':')
            })
            .collect::<Vec<_>>()
            .join("\n");
        Ok(ModelExchange {
            role: request.role,
            prompt: request.prompt.clone(),
            decoding: request.decoding,
            tokens: TokenUsage {
                prompt: whitespace_tokens(&request.prompt),
                completion: whitespace_tokens(&response),
                reasoning: 0,
            },
            response,
            reasoning: None,
        })
    }
}

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_api_key_env() -> String {
    "MODEL_API_KEY".to_string()
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
    /// DeepSeek-style reasoning channel; OpenAI leaves it absent.
    #[serde(default, alias = "reasoning")]
    reasoning_content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
    #[serde(default)]
    completion_tokens_details: Option<CompletionTokensDetails>,
}

#[derive(Deserialize)]
struct CompletionTokensDetails {
    #[serde(default)]
    reasoning_tokens: u32,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            Error::Config(format!(
                "environment variable `{}` is not set",
                config.api_key_env
            ))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Backend { message: e.to_string(), retryable: false })?;
        Ok(Self { config, api_key, client })
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<ModelExchange> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage { role: "user", content: &request.prompt }],
            temperature: request.decoding.temperature,
            max_tokens: request.decoding.max_tokens,
        };
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| Error::Backend {
                message: format!("transport failure: {e}"),
                retryable: true,
            })?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err(Error::Backend {
                message: format!("backend status {status}"),
                retryable,
            });
        }
        let parsed: ChatResponse = response.json().map_err(|e| Error::Backend {
            message: format!("malformed backend response: {e}"),
            retryable: false,
        })?;
        let choice = parsed.choices.into_iter().next().ok_or(Error::Backend {
            message: "backend response has no choices".into(),
            retryable: false,
        })?;
        let content = choice.message.content.unwrap_or_default();
        let reasoning = choice.message.reasoning_content;
        let tokens = match parsed.usage {
            Some(usage) => TokenUsage {
                prompt: usage.prompt_tokens,
                completion: usage.completion_tokens,
                reasoning: usage
                    .completion_tokens_details
                    .map_or(0, |d| d.reasoning_tokens),
            },
            None => TokenUsage {
                prompt: whitespace_tokens(&request.prompt),
                completion: whitespace_tokens(&content),
                reasoning: reasoning.as_deref().map_or(0, whitespace_tokens),
            },
        };
        Ok(ModelExchange {
            role: request.role,
            prompt: request.prompt.clone(),
            decoding: request.decoding,
            response: content,
            reasoning,
            tokens,
        })
    }
}

impl ModelBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<ModelExchange> {
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(exchange) => return Ok(exchange),
                Err(err) if err.is_retryable() && attempt < self.config.retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(10));
                    std::thread::sleep(std::time::Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(err) if err.is_retryable() => {
                    return Err(Error::RetryExhausted(err.to_string()))
                }
                Err(err) => return Err(err),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

/// Append-only JSONL transcript of every model exchange, for audit and
/// replay.
pub struct TranscriptWriter {
    file: Mutex<std::io::BufWriter<std::fs::File>>,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::File::create(path)?;
        Ok(Self { file: Mutex::new(std::io::BufWriter::new(file)) })
    }

    /// Opens an existing transcript for appending; resumed runs use this so
    /// earlier exchanges are kept.
    pub fn append_to(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(std::io::BufWriter::new(file)) })
    }

    pub fn append(&self, exchange: &ModelExchange) -> Result<()> {
        let line = serde_json::to_string(exchange)?;
        let mut file = self.file.lock().expect("transcript lock");
        writeln!(file, "{line}")?;
        file.flush()?;
        Ok(())
    }
}

/// Reads a transcript back for the token-accounting report.
pub fn read_transcript(path: &Path) -> Result<Vec<ModelExchange>> {
    let file = std::fs::File::open(path)?;
    let mut exchanges = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        exchanges.push(serde_json::from_str(&line)?);
    }
    Ok(exchanges)
}

// ---------------------------------------------------------------------------
// Gateway: role + decoding defaults + batching + transcripts
// ---------------------------------------------------------------------------

/// One answer segment out of a batched request.
#[derive(Debug, Clone)]
pub struct BatchSegment {
    pub text: String,
    /// True when the segment's chunk produced no recoverable labels; all its
    /// queries are treated as parse-failed rather than dropped.
    pub chunk_failed: bool,
    pub diagnostics: Vec<Diagnostic>,
}

pub struct Gateway {
    backend: Box<dyn ModelBackend>,
    role: ModelRole,
    decoding: Decoding,
    parallelism: usize,
    transcript: Option<std::sync::Arc<TranscriptWriter>>,
}

impl Gateway {
    pub fn new(backend: Box<dyn ModelBackend>, role: ModelRole) -> Self {
        Self {
            backend,
            role,
            decoding: Decoding::default_for(role),
            parallelism: 1,
            transcript: None,
        }
    }

    pub fn with_decoding(mut self, decoding: Decoding) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn with_transcript(mut self, writer: std::sync::Arc<TranscriptWriter>) -> Self {
        self.transcript = Some(writer);
        self
    }

    pub fn role(&self) -> ModelRole {
        self.role
    }

    pub fn complete(&self, prompt: &str) -> Result<ModelExchange> {
        let request = CompletionRequest {
            role: self.role,
            prompt: prompt.to_string(),
            decoding: self.decoding,
        };
        let exchange = self.backend.complete(&request)?;
        if let Some(t) = &self.transcript {
            t.append(&exchange)?;
        }
        Ok(exchange)
    }

    /// Renders one chunk of labeled queries under the shared prompt.
    pub fn render_batch_prompt(prompt: &str, queries: &[String]) -> String {
        let mut out = String::with_capacity(prompt.len() + 128);
        out.push_str(prompt);
        out.push_str("\n\n# Answer each labeled input below. Begin each answer with its label, like `text1: result = [...]`.\n\n");
        for (i, query) in queries.iter().enumerate() {
            out.push_str(&format!("text{}: {}\n", i + 1, query));
        }
        out
    }

    /// Batch prompting: partitions `queries` into ⌈n/k⌉ chunks, sends one
    /// request per chunk, splits responses by label, and returns segments
    /// aligned 1:1 with the input queries.
    pub fn batch_answer(
        &self,
        prompt: &str,
        queries: &[String],
        batch_size: usize,
    ) -> Result<Vec<BatchSegment>> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let chunks: Vec<&[String]> = queries.chunks(batch_size).collect();
        let exchanges = self.complete_chunks(prompt, &chunks)?;

        let mut segments = Vec::with_capacity(queries.len());
        for (chunk, exchange) in chunks.iter().zip(&exchanges) {
            if let Some(t) = &self.transcript {
                t.append(exchange)?;
            }
            let labels: Vec<String> =
                (1..=chunk.len()).map(|i| format!("text{i}")).collect();
            let split = split_batch_answers(&exchange.response, &labels);
            let chunk_failed = !split.found_any;
            for label in &labels {
                segments.push(BatchSegment {
                    text: split.segments[label.as_str()].clone(),
                    chunk_failed,
                    diagnostics: split.diagnostics.clone(),
                });
            }
        }
        debug_assert_eq!(segments.len(), queries.len());
        Ok(segments)
    }

    /// Completes every chunk, in parallel up to the configured limit, with
    /// results committed in chunk order so transcripts and segments stay
    /// deterministic.
    fn complete_chunks(
        &self,
        prompt: &str,
        chunks: &[&[String]],
    ) -> Result<Vec<ModelExchange>> {
        let requests: Vec<CompletionRequest> = chunks
            .iter()
            .map(|chunk| CompletionRequest {
                role: self.role,
                prompt: Self::render_batch_prompt(prompt, chunk),
                decoding: self.decoding,
            })
            .collect();
        if self.parallelism <= 1 || requests.len() <= 1 {
            return requests
                .iter()
                .map(|r| self.backend.complete(r))
                .collect();
        }
        let results: Vec<Mutex<Option<Result<ModelExchange>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..self.parallelism.min(requests.len()) {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    if idx >= requests.len() {
                        break;
                    }
                    let outcome = self.backend.complete(&requests[idx]);
                    *results[idx].lock().expect("chunk slot") = Some(outcome);
                });
            }
        });
        results
            .into_iter()
            .map(|slot| slot.into_inner().expect("chunk slot").expect("chunk completed"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest {
            role: ModelRole::Task,
            prompt: prompt.to_string(),
            decoding: Decoding::default_for(ModelRole::Task),
        }
    }

    #[test]
    fn decoding_defaults_per_role() {
        assert_eq!(Decoding::default_for(ModelRole::Task).temperature, 0.0);
        assert_eq!(Decoding::default_for(ModelRole::Optimizer).temperature, 0.7);
    }

    #[test]
    fn mock_scripted_lookup_is_deterministic() {
        let mock = MockBackend::substring(&[("alpha", "first"), ("beta", "second")]);
        let a1 = mock.complete(&request("xx alpha yy")).unwrap();
        let a2 = mock.complete(&request("xx alpha yy")).unwrap();
        assert_eq!(a1.response, "first");
        assert_eq!(a1.response, a2.response);
        let b = mock.complete(&request("beta")).unwrap();
        assert_eq!(b.response, "second");
        assert_eq!(mock.calls(), 3);
    }

    #[test]
    fn mock_first_matching_entry_wins() {
        let mock = MockBackend::substring(&[("alpha", "first"), ("alpha", "shadowed")]);
        assert_eq!(mock.complete(&request("alpha")).unwrap().response, "first");
    }

    #[test]
    fn mock_hash_matcher() {
        let digest = Sha256::digest(b"exact prompt");
        let entry = MockScriptEntry {
            matcher: Matcher::PromptHash { match_sha256: format!("{digest:x}") },
            response: "hit".into(),
            reasoning: None,
        };
        let mock = MockBackend::new(vec![entry], ExhaustionPolicy::Error);
        assert_eq!(mock.complete(&request("exact prompt")).unwrap().response, "hit");
        assert!(mock.complete(&request("other")).is_err());
    }

    #[test]
    fn mock_exhaustion_policies() {
        let mock = MockBackend::new(Vec::new(), ExhaustionPolicy::Empty);
        assert_eq!(mock.complete(&request("x")).unwrap().response, "");
        let mock = MockBackend::new(Vec::new(), ExhaustionPolicy::Echo);
        assert_eq!(mock.complete(&request("x")).unwrap().response, "x");
        let mock = MockBackend::new(Vec::new(), ExhaustionPolicy::Error);
        assert!(mock.complete(&request("x")).is_err());
    }

    #[test]
    fn mock_counts_whitespace_tokens() {
        let mock = MockBackend::substring(&[("q", "three word reply")]);
        let ex = mock.complete(&request("q")).unwrap();
        assert_eq!(ex.tokens.completion, 3);
        assert_eq!(ex.tokens.prompt, 1);
    }

    #[test]
    fn batch_chunking_and_alignment() {
        let gateway = Gateway::new(Box::new(EchoBackend::new()), ModelRole::Task);
        let queries: Vec<String> = (0..7).map(|i| format!("query number {i}")).collect();
        let segments = gateway.batch_answer("PROMPT", &queries, 3).unwrap();
        assert_eq!(segments.len(), 7);
        for (i, seg) in segments.iter().enumerate() {
            assert_eq!(seg.text, format!("query number {i}"));
            assert!(!seg.chunk_failed);
        }
    }

    #[test]
    fn batch_call_count_is_ceil() {
        let echo = std::sync::Arc::new(EchoBackend::new());
        let gateway = Gateway::new(Box::new(echo.clone()), ModelRole::Task);
        let queries: Vec<String> = (0..7).map(|i| format!("q{i}")).collect();
        gateway.batch_answer("P", &queries, 3).unwrap();
        assert_eq!(echo.calls(), 3);

        gateway.batch_answer("P", &queries, 15).unwrap();
        assert_eq!(echo.calls(), 4, "single chunk when k >= n");
    }

    #[test]
    fn batch_failure_flags_all_chunk_queries() {
        let mock = MockBackend::new(Vec::new(), ExhaustionPolicy::Empty);
        let gateway = Gateway::new(Box::new(mock), ModelRole::Task);
        let queries: Vec<String> = (0..4).map(|i| format!("q{i}")).collect();
        let segments = gateway.batch_answer("P", &queries, 2).unwrap();
        assert!(segments.iter().all(|s| s.chunk_failed && s.text.is_empty()));
    }

    #[test]
    fn parallel_batches_preserve_order() {
        let gateway = Gateway::new(Box::new(EchoBackend::new()), ModelRole::Task)
            .with_parallelism(4);
        let queries: Vec<String> = (0..20).map(|i| format!("payload {i}")).collect();
        let segments = gateway.batch_answer("P", &queries, 2).unwrap();
        for (i, seg) in segments.iter().enumerate() {
            assert_eq!(seg.text, format!("payload {i}"));
        }
    }

    #[test]
    fn transcript_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let writer = std::sync::Arc::new(TranscriptWriter::create(&path).unwrap());
        let gateway = Gateway::new(
            Box::new(MockBackend::substring(&[("hi", "hello there")])),
            ModelRole::Task,
        )
        .with_transcript(writer);
        gateway.complete("hi").unwrap();
        let transcript = read_transcript(&path).unwrap();
        assert_eq!(transcript.len(), 1);
        assert_eq!(transcript[0].response, "hello there");
        assert_eq!(transcript[0].role, ModelRole::Task);
    }
}
