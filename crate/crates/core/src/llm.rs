//! Two-level LLM analysis: renders the per-article and group-level
//! prompts, calls a chat-completion endpoint, and parses and validates
//! the structured responses.
//!
//! Prompts are configuration, not code: templates ship as editable TOML
//! files with `{{name}}` placeholders (see the `templates/` directory).
//! The second analysis level is retrieval-augmented — its prompts embed
//! the level-1 JSON documents, never raw article text.
//!
//! The chat client is abstract: a live client speaking the common
//! chat-completions wire format, a fixture client replaying recorded
//! exchanges by request digest, and a recording wrapper that makes any
//! live run replayable.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    validate_aggregate_analysis, validate_article_analysis, validate_trend_summary,
    AggregateAnalysis, AggregateMode, Article, ArticleAnalysis, GroupKey,
};
use crate::util::sha256_hex;

/// Combined level-1 JSON documents larger than this are rejected rather
/// than silently truncated.
pub const DEFAULT_CONTEXT_BUDGET_CHARS: usize = 100_000;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("missing placeholder: {0}")]
    MissingPlaceholder(String),
    #[error("empty analysis group")]
    EmptyGroup,
    #[error("context budget exceeded: {length} chars > {budget}")]
    ContextBudgetExceeded { length: usize, budget: usize },
    #[error("chat endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("response still invalid after {} attempts: {last_error}", attempts.len())]
    MalformedAfterRetries {
        /// Raw response text of every attempt, for debugging.
        attempts: Vec<String>,
        last_error: String,
    },
    #[error("missing llm fixture: {0}")]
    MissingFixture(String),
    #[error("prompt template error: {0}")]
    Template(String),
}

/// A prompt template: system message, instruction body with `{{name}}`
/// placeholders, and the text describing the required JSON output
/// structure (referenced from the instruction as `{{output_schema}}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_text: String,
    pub instruction_text: String,
    pub output_schema_text: String,
}

impl PromptTemplate {
    pub fn load(path: &std::path::Path) -> Result<Self, LlmError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
        toml::from_str(&body).map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))
    }
}

/// Substitutes `{{name}}` placeholders. Placeholders without a supplied
/// value are an error; `{{` sequences that do not form a placeholder
/// (arbitrary JSON braces) pass through untouched.
fn render_text(text: &str, vars: &BTreeMap<&str, &str>) -> Result<String, LlmError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}");
        let name_end = after.find(|c: char| !(c.is_ascii_lowercase() || c == '_'));
        match (close, name_end) {
            (Some(close), Some(name_end)) if name_end == close && close > 0 => {
                let name = &after[..close];
                match vars.get(name) {
                    Some(value) => out.push_str(value),
                    None => return Err(LlmError::MissingPlaceholder(name.to_string())),
                }
                rest = &after[close + 2..];
            }
            _ => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// The instruction must reference every placeholder the operation needs
/// to embed — a template that cannot carry the article text is as broken
/// as one demanding unknown values.
fn require_placeholders(text: &str, required: &[&str]) -> Result<(), LlmError> {
    for name in required {
        if !text.contains(&format!("{{{{{name}}}}}")) {
            return Err(LlmError::MissingPlaceholder(name.to_string()));
        }
    }
    Ok(())
}

/// A rendered prompt ready to send; `digest()` keys the fixture store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub system: String,
    pub user: String,
}

impl ChatPrompt {
    pub fn digest(&self) -> String {
        sha256_hex(format!("chat\0{}\0{}", self.system, self.user).as_bytes())
    }
}

/// One recorded request/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub request_digest: String,
    pub model_name: String,
    pub response_text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmExchange, LlmError>;
}

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

fn candidate_list(candidates: &[String]) -> String {
    candidates.join(", ")
}

/// Renders the per-article prompt: embeds the article text, the
/// candidate list, and the output schema. Rendering is deterministic.
pub fn render_level1_prompt(
    article: &Article,
    template: &PromptTemplate,
    candidates: &[String],
) -> Result<ChatPrompt, LlmError> {
    require_placeholders(&template.instruction_text, &["article_text", "candidates", "output_schema"])?;
    let candidates_text = candidate_list(candidates);
    let schema_vars = BTreeMap::from([("candidates", candidates_text.as_str())]);
    let schema = render_text(&template.output_schema_text, &schema_vars)?;
    let vars = BTreeMap::from([
        ("article_text", article.text.as_str()),
        ("candidates", candidates_text.as_str()),
        ("output_schema", schema.as_str()),
    ]);
    Ok(ChatPrompt {
        system: render_text(&template.system_text, &schema_vars)?,
        user: render_text(&template.instruction_text, &vars)?,
    })
}

/// Level-2 grouping modes. `ByPeriod` and `BySource` summarize level-1
/// analyses; `Trend` reads the period aggregates in chronological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level2Mode {
    ByPeriod,
    BySource,
    Trend,
}

/// The retrieval context for a level-2 prompt.
pub enum Level2Docs<'a> {
    Analyses(&'a [ArticleAnalysis]),
    Aggregates(&'a [AggregateAnalysis]),
}

fn encode_docs(docs: &Level2Docs, mode: Level2Mode) -> Result<Vec<String>, LlmError> {
    let encoded: Vec<String> = match (mode, docs) {
        (Level2Mode::Trend, Level2Docs::Aggregates(aggs)) => {
            let mut periods: Vec<&AggregateAnalysis> = aggs
                .iter()
                .filter(|a| matches!(a.group_key, GroupKey::Period(_)))
                .collect();
            periods.sort_by_key(|a| match a.group_key {
                GroupKey::Period(i) => i,
                _ => u32::MAX,
            });
            periods
                .iter()
                .map(|a| serde_json::to_string(a).expect("aggregate serializes"))
                .collect()
        }
        (_, Level2Docs::Analyses(analyses)) => analyses
            .iter()
            .map(|a| serde_json::to_string(a).expect("analysis serializes"))
            .collect(),
        (_, Level2Docs::Aggregates(aggs)) => aggs
            .iter()
            .map(|a| serde_json::to_string(a).expect("aggregate serializes"))
            .collect(),
    };
    if encoded.is_empty() {
        return Err(LlmError::EmptyGroup);
    }
    Ok(encoded)
}

/// Renders a level-2 prompt over level-1 JSON documents (the RAG
/// contract: the model sees analysis documents, never raw articles).
pub fn render_level2_prompt(
    docs: &Level2Docs,
    group_label: &str,
    template: &PromptTemplate,
    mode: Level2Mode,
    candidates: &[String],
    budget: usize,
) -> Result<ChatPrompt, LlmError> {
    let mut required: Vec<&str> = vec!["documents", "output_schema"];
    if mode != Level2Mode::Trend {
        required.push("group_label");
    }
    require_placeholders(&template.instruction_text, &required)?;

    let encoded = encode_docs(docs, mode)?;
    let documents = encoded.join("\n");
    if documents.chars().count() > budget {
        return Err(LlmError::ContextBudgetExceeded {
            length: documents.chars().count(),
            budget,
        });
    }

    let candidates_text = candidate_list(candidates);
    let schema_vars = BTreeMap::from([("candidates", candidates_text.as_str())]);
    let schema = render_text(&template.output_schema_text, &schema_vars)?;
    let vars = BTreeMap::from([
        ("documents", documents.as_str()),
        ("group_label", group_label),
        ("candidates", candidates_text.as_str()),
        ("output_schema", schema.as_str()),
    ]);
    Ok(ChatPrompt {
        system: render_text(&template.system_text, &schema_vars)?,
        user: render_text(&template.instruction_text, &vars)?,
    })
}

// ---------------------------------------------------------------------------
// Response parsing and the retry-with-correction loop
// ---------------------------------------------------------------------------

/// Strips an optional Markdown code fence (with or without a `json`
/// language tag) from a response.
pub fn strip_code_fence(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    match rest.strip_suffix("```") {
        Some(inner) => inner.trim(),
        None => trimmed,
    }
}

fn parse_json(text: &str) -> Result<Value, String> {
    serde_json::from_str(strip_code_fence(text)).map_err(|e| format!("not valid JSON: {e}"))
}

/// Runs the ask/validate/correct loop shared by both analysis levels.
fn ask_validated<T>(
    client: &dyn ChatClient,
    prompt: &ChatPrompt,
    retries: u32,
    validate: impl Fn(&Value) -> Result<T, String>,
) -> Result<T, LlmError> {
    let mut attempts = Vec::new();
    let mut current = prompt.clone();
    for attempt in 0..=retries {
        let exchange = client.complete(&current)?;
        attempts.push(exchange.response_text.clone());
        let violation = match parse_json(&exchange.response_text).and_then(|v| validate(&v)) {
            Ok(value) => return Ok(value),
            Err(violation) => violation,
        };
        log::debug!("attempt {attempt} rejected: {violation}");
        if attempt == retries {
            return Err(LlmError::MalformedAfterRetries {
                attempts,
                last_error: violation,
            });
        }
        current = ChatPrompt {
            system: prompt.system.clone(),
            user: format!(
                "{}\n\nYour previous response was invalid: {}. \
                 Respond again with only the corrected JSON document.",
                prompt.user, violation
            ),
        };
    }
    unreachable!("loop returns on success or final attempt")
}

/// Analyzes one article: renders the level-1 prompt, asks the model,
/// validates the JSON response, and re-asks with a correction note up to
/// `retries` times on violations.
pub fn analyze_article(
    article: &Article,
    client: &dyn ChatClient,
    template: &PromptTemplate,
    candidates: &[String],
    retries: u32,
) -> Result<ArticleAnalysis, LlmError> {
    let prompt = render_level1_prompt(article, template, candidates)?;
    let mut analysis = ask_validated(client, &prompt, retries, |raw| {
        validate_article_analysis(raw, candidates).map_err(|e| e.to_string())
    })?;
    analysis.article_ref = article.content_hash.clone();
    Ok(analysis)
}

/// Analyzes one group of level-1 documents, validating the response
/// against the aggregate schema of the given mode (probabilities
/// required per period, omitted per source, trend block in trend mode).
pub fn analyze_group(
    docs: &Level2Docs,
    group_key: GroupKey,
    group_label: &str,
    client: &dyn ChatClient,
    template: &PromptTemplate,
    mode: Level2Mode,
    candidates: &[String],
    retries: u32,
    budget: usize,
) -> Result<AggregateAnalysis, LlmError> {
    let prompt = render_level2_prompt(docs, group_label, template, mode, candidates, budget)?;
    match mode {
        Level2Mode::ByPeriod | Level2Mode::BySource => {
            let agg_mode = if mode == Level2Mode::ByPeriod {
                AggregateMode::ByPeriod
            } else {
                AggregateMode::BySource
            };
            ask_validated(client, &prompt, retries, |raw| {
                validate_aggregate_analysis(raw, candidates, group_key.clone(), agg_mode)
                    .map_err(|e| e.to_string())
            })
        }
        Level2Mode::Trend => {
            let trend = ask_validated(client, &prompt, retries, |raw| {
                validate_trend_summary(raw, candidates).map_err(|e| e.to_string())
            })?;
            Ok(AggregateAnalysis {
                group_key: GroupKey::Campaign,
                summary: trend.overall_summary.clone(),
                per_candidate: Vec::new(),
                favorite_summary: Some(trend.favorite_summary.clone()),
                trend: Some(trend),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

/// Replays recorded exchanges from `<dir>/<digest>.json`.
pub struct FixtureChatClient {
    dir: PathBuf,
}

impl FixtureChatClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn fixture_path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }
}

impl ChatClient for FixtureChatClient {
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmExchange, LlmError> {
        let digest = prompt.digest();
        let path = self.fixture_path(&digest);
        let body =
            std::fs::read_to_string(&path).map_err(|_| LlmError::MissingFixture(digest))?;
        serde_json::from_str(&body)
            .map_err(|e| LlmError::EndpointUnavailable(format!("corrupt fixture: {e}")))
    }
}

/// Wraps a live client and records every exchange, keyed by request
/// digest, so the run can be replayed offline.
pub struct RecordingChatClient<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: ChatClient> RecordingChatClient<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into() }
    }
}

impl<C: ChatClient> ChatClient for RecordingChatClient<C> {
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmExchange, LlmError> {
        let exchange = self.inner.complete(prompt)?;
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        let path = self.dir.join(format!("{}.json", exchange.request_digest));
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(&exchange)
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        std::fs::write(&tmp, body)
            .and_then(|()| std::fs::rename(&tmp, &path))
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        Ok(exchange)
    }
}

/// Returns queued responses in order; for tests of the retry loop.
pub struct ScriptedChatClient {
    responses: Mutex<VecDeque<String>>,
}

impl ScriptedChatClient {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses: Mutex::new(responses.into()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("script lock").len()
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmExchange, LlmError> {
        let response = self
            .responses
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| LlmError::EndpointUnavailable("script exhausted".into()))?;
        Ok(LlmExchange {
            request_digest: prompt.digest(),
            model_name: "scripted".into(),
            response_text: response,
            input_tokens: 0,
            output_tokens: 0,
            latency_ms: 0,
        })
    }
}

/// Configuration of the live chat endpoint.
#[derive(Debug, Clone)]
pub struct HttpChatConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub temperature: f64,
}

/// Live client speaking the common chat-completions wire format.
pub struct HttpChatClient {
    config: HttpChatConfig,
    client: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: HttpChatConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(180))
            .build()
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        Ok(Self { config, client })
    }
}

#[derive(Debug, Deserialize)]
struct ChatCompletionMessage {
    content: String,
}

#[derive(Debug, Deserialize)]
struct ChatCompletionChoice {
    message: ChatCompletionMessage,
}

#[derive(Debug, Deserialize, Default)]
struct ChatCompletionUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Debug, Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<ChatCompletionChoice>,
    #[serde(default)]
    usage: Option<ChatCompletionUsage>,
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmExchange, LlmError> {
        let started = std::time::Instant::now();
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send()
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let brief: String = text.chars().take(300).collect();
            return Err(LlmError::EndpointUnavailable(format!("status {status}: {brief}")));
        }
        let parsed: ChatCompletionResponse = response
            .json()
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::EndpointUnavailable("response carries no choices".into()))?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(LlmExchange {
            request_digest: prompt.digest(),
            model_name: self.config.model.clone(),
            response_text: choice.message.content,
            input_tokens: usage.prompt_tokens,
            output_tokens: usage.completion_tokens,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
