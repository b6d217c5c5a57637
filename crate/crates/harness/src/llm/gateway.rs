//! Sending prompts, retrying, and turning replies into predictions.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};
use zsbench_core::parse::{parse_response, ParseDiagnostics};
use zsbench_core::prompt::{build_prompt, PromptBundle, PromptError, TaskPrompt};
use zsbench_core::{LabelId, LabelSchema};

use super::audit::{AuditBytes, AuditLog, AuditRecord};
use super::provider::{ChatMessage, ChatProvider, ChatRequest, ProviderError};

/// Sampling and transport settings for one LLM predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmRunConfig {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub batch_size: usize,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub backoff_base_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for LlmRunConfig {
    fn default() -> Self {
        Self {
            model: String::new(),
            temperature: 0.01,
            top_p: 0.9,
            batch_size: 25,
            max_retries: 5,
            timeout_secs: 120,
            max_in_flight: 4,
            backoff_base_ms: 1000,
            seed: None,
        }
    }
}

impl LlmRunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.model.trim().is_empty() {
            return Err("model must be set".into());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        if self.timeout_secs == 0 {
            return Err("timeout_secs must be at least 1".into());
        }
        Ok(())
    }

    pub fn request(&self, bundle: &PromptBundle) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: bundle.system_instruction.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: bundle.user_payload.clone(),
                },
            ],
            temperature: self.temperature,
            top_p: self.top_p,
            seed: self.seed,
        }
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Records requested sleeps instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper(Mutex<Vec<Duration>>);

impl RecordingSleeper {
    pub fn sleeps(&self) -> Vec<Duration> {
        self.0.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, duration: Duration) {
        self.0.lock().unwrap().push(duration);
    }
}

/// Delay before retry number `retry` (0-based): `base * 2^retry`, stretched
/// by up to a quarter through `jitter` in `[0, 1)`.
pub fn backoff_delay(base: Duration, retry: u32, jitter: f64) -> Duration {
    let nominal = base.saturating_mul(1u32 << retry.min(20));
    nominal.mul_f64(1.0 + 0.25 * jitter.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    pub raw_text: String,
    pub raw_body: Vec<u8>,
    pub latency: Duration,
    pub model: Option<String>,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    Auth(ProviderError),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("giving up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: ProviderError },
    #[error("provider error: {0}")]
    Provider(ProviderError),
    #[error("prompt error: {0}")]
    Prompt(#[from] PromptError),
}

/// Sends one bundle, retrying transport failures, timeouts, 429 and 5xx.
pub fn complete_chat(
    bundle: &PromptBundle,
    config: &LlmRunConfig,
    provider: &dyn ChatProvider,
    sleeper: &dyn Sleeper,
) -> Result<LlmResponse, GatewayError> {
    let request = config.request(bundle);
    let base = Duration::from_millis(config.backoff_base_ms);
    let started = Instant::now();
    let mut retries = 0;
    loop {
        match provider.complete(&request) {
            Ok(reply) => {
                return Ok(LlmResponse {
                    raw_text: reply.content,
                    raw_body: reply.raw_body,
                    latency: started.elapsed(),
                    model: reply.model,
                    prompt_tokens: reply.prompt_tokens,
                    completion_tokens: reply.completion_tokens,
                    retries,
                })
            }
            Err(e) if e.is_auth() => return Err(GatewayError::Auth(e)),
            Err(e) if !e.is_retryable() => return Err(GatewayError::Provider(e)),
            Err(e) if retries >= config.max_retries => {
                let attempts = retries + 1;
                return Err(match e {
                    ProviderError::Timeout => GatewayError::Timeout { attempts },
                    last => GatewayError::RetriesExhausted { attempts, last },
                });
            }
            Err(e) => {
                let delay = backoff_delay(base, retries, rand::rng().random());
                warn!("{e}; retrying in {delay:?}");
                sleeper.sleep(delay);
                retries += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayDiagnostics {
    pub requests: u32,
    pub reasks: u32,
    pub retries: u32,
    pub parse: ParseDiagnostics,
    /// Replies with no usable JSON object at all.
    pub parse_failures: u32,
    /// Documents still unresolved after the re-ask; scored as incorrect.
    pub invalid: u32,
    /// Documents with nothing left to send (text empty after cleaning).
    pub skipped_empty: u32,
}

impl GatewayDiagnostics {
    fn merge(&mut self, other: &GatewayDiagnostics) {
        self.requests += other.requests;
        self.reasks += other.reasks;
        self.retries += other.retries;
        self.parse.merge(&other.parse);
        self.parse_failures += other.parse_failures;
        self.invalid += other.invalid;
        self.skipped_empty += other.skipped_empty;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classified {
    /// One entry per input document, in input order; `None` is invalid.
    pub predictions: Vec<Option<LabelId>>,
    pub diagnostics: GatewayDiagnostics,
}

#[derive(Debug, thiserror::Error)]
#[error("batch {batch} failed: {error}")]
pub struct ClassifyFailure {
    pub batch: usize,
    pub error: GatewayError,
    /// Predictions from the batches that completed.
    pub partial: Classified,
}

pub struct ClassifyContext<'a> {
    pub task: &'a TaskPrompt,
    pub schema: &'a LabelSchema,
    pub config: &'a LlmRunConfig,
    pub provider: &'a dyn ChatProvider,
    pub sleeper: &'a dyn Sleeper,
    pub audit: Option<&'a AuditLog>,
    pub predictor: &'a str,
    pub run: usize,
}

struct Item<'a> {
    position: usize,
    doc_id: usize,
    index: u32,
    text: &'a str,
}

type BatchOutcome = Result<(BTreeMap<usize, LabelId>, GatewayDiagnostics), GatewayError>;

/// Labels `docs` (`(doc_id, text)`) in batches of `config.batch_size`, with
/// up to `config.max_in_flight` batches in flight. Items are numbered from 1
/// within each batch. A batch with unresolved items is re-asked once for
/// just those items; whatever is still unresolved becomes invalid.
pub fn classify_corpus(docs: &[(usize, String)], ctx: &ClassifyContext<'_>) -> Result<Classified, Box<ClassifyFailure>> {
    let mut skipped_empty = 0;
    let mut batches: Vec<Vec<Item<'_>>> = Vec::new();
    let mut current = Vec::new();
    for (position, (doc_id, text)) in docs.iter().enumerate() {
        if text.trim().is_empty() {
            skipped_empty += 1;
            continue;
        }
        current.push(Item {
            position,
            doc_id: *doc_id,
            index: current.len() as u32 + 1,
            text,
        });
        if current.len() == ctx.config.batch_size {
            batches.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        batches.push(current);
    }

    let outcomes: Vec<Mutex<Option<BatchOutcome>>> = batches.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = ctx.config.max_in_flight.min(batches.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let b = next.fetch_add(1, Ordering::SeqCst);
                let Some(batch) = batches.get(b) else { break };
                let outcome = run_batch(b, batch, ctx);
                if outcome.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                *outcomes[b].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut predictions = vec![None; docs.len()];
    let mut diagnostics = GatewayDiagnostics {
        skipped_empty,
        invalid: skipped_empty,
        ..Default::default()
    };
    let mut failure = None;
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome.into_inner().unwrap() {
            Some(Ok((labels, diag))) => {
                for (position, label) in labels {
                    predictions[position] = Some(label);
                }
                diagnostics.merge(&diag);
            }
            Some(Err(error)) if failure.is_none() => failure = Some((b, error)),
            _ => {}
        }
    }
    let classified = Classified {
        predictions,
        diagnostics,
    };
    match failure {
        None => Ok(classified),
        Some((batch, error)) => Err(Box::new(ClassifyFailure {
            batch,
            error,
            partial: classified,
        })),
    }
}

fn run_batch(b: usize, items: &[Item<'_>], ctx: &ClassifyContext<'_>) -> BatchOutcome {
    let mut diag = GatewayDiagnostics::default();
    let mut resolved = BTreeMap::new();
    let mut pending: Vec<&Item<'_>> = items.iter().collect();
    for ask in 0..2u32 {
        let batch: Vec<(u32, &str)> = pending.iter().map(|i| (i.index, i.text)).collect();
        let bundle = build_prompt(ctx.task, ctx.schema, &batch, ctx.config.batch_size)?;
        let mut record = AuditRecord {
            predictor: ctx.predictor.to_string(),
            run: ctx.run,
            batch: b,
            ask,
            doc_ids: pending.iter().map(|i| i.doc_id).collect(),
            batch_indices: bundle.batch_indices.clone(),
            request: ctx.config.request(&bundle),
            attempts: 0,
            latency_ms: 0,
            response_text: None,
            raw_body: None,
            error: None,
            parsed: None,
            parse_error: None,
        };
        diag.requests += 1;
        diag.reasks += ask;
        let response = match complete_chat(&bundle, ctx.config, ctx.provider, ctx.sleeper) {
            Ok(r) => r,
            Err(e) => {
                record.error = Some(e.to_string());
                if let GatewayError::Provider(ProviderError::Protocol { raw_body, .. }) = &e {
                    record.raw_body = Some(AuditBytes::from_bytes(raw_body));
                }
                log_record(ctx, &record);
                return Err(e);
            }
        };
        diag.retries += response.retries;
        record.attempts = response.retries + 1;
        record.latency_ms = response.latency.as_millis() as u64;
        record.raw_body = Some(AuditBytes::from_bytes(&response.raw_body));
        let parsed = parse_response(&response.raw_text, &bundle.batch_indices, ctx.schema);
        record.response_text = Some(response.raw_text);
        match parsed {
            Ok(parsed) => {
                diag.parse.merge(&parsed.diagnostics);
                for (index, label) in &parsed.resolved {
                    if let Some(item) = pending.iter().find(|i| i.index == *index) {
                        resolved.insert(item.position, *label);
                    }
                }
                pending.retain(|i| !parsed.resolved.contains_key(&i.index));
                record.parsed = Some(parsed);
            }
            Err(e) => {
                debug!("batch {b} ask {ask}: {e}");
                diag.parse_failures += 1;
                record.parse_error = Some(e.to_string());
            }
        }
        log_record(ctx, &record);
        if pending.is_empty() {
            break;
        }
    }
    diag.invalid += pending.len() as u32;
    Ok((resolved, diag))
}

fn log_record(ctx: &ClassifyContext<'_>, record: &AuditRecord) {
    if let Some(audit) = ctx.audit {
        if let Err(e) = audit.append(record) {
            warn!("could not write audit record to {}: {e}", audit.path().display());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::ScriptedProvider;
    use crate::llm::provider::ProviderReply;

    fn bundle() -> PromptBundle {
        let schema = LabelSchema::new("sms", ["spam", "ham"]).unwrap();
        build_prompt(&TaskPrompt::sms_spam(), &schema, &[(1, "hi")], 25).unwrap()
    }

    fn config() -> LlmRunConfig {
        LlmRunConfig {
            model: "m".into(),
            max_retries: 3,
            ..Default::default()
        }
    }

    fn status(code: u16) -> Result<ProviderReply, ProviderError> {
        Err(ProviderError::Status {
            status: code,
            body: String::new(),
        })
    }

    #[test]
    fn passes_pinned_sampling_parameters() {
        let provider = ScriptedProvider::new([Ok(ProviderReply::text("{\"1\": \"ham\"}"))]);
        let r = complete_chat(&bundle(), &config(), &provider, &RecordingSleeper::default()).unwrap();
        assert_eq!(r.raw_text, "{\"1\": \"ham\"}");
        let sent = &provider.requests()[0];
        assert_eq!((sent.temperature, sent.top_p), (0.01, 0.9));
        assert_eq!(sent.messages[0].role, "system");
    }

    #[test]
    fn retries_429_with_growing_backoff() {
        let provider = ScriptedProvider::new([status(429), status(503), Ok(ProviderReply::text("{}"))]);
        let sleeper = RecordingSleeper::default();
        let r = complete_chat(&bundle(), &config(), &provider, &sleeper).unwrap();
        assert_eq!(r.retries, 2);
        let sleeps = sleeper.sleeps();
        assert_eq!(sleeps.len(), 2);
        assert!(sleeps[0] >= Duration::from_secs(1) && sleeps[0] <= Duration::from_millis(1250));
        assert!(sleeps[1] >= Duration::from_secs(2) && sleeps[1] <= Duration::from_millis(2500));
    }

    #[test]
    fn auth_failures_are_not_retried() {
        let provider = ScriptedProvider::new([status(401), Ok(ProviderReply::text("{}"))]);
        let sleeper = RecordingSleeper::default();
        let err = complete_chat(&bundle(), &config(), &provider, &sleeper).unwrap_err();
        assert!(matches!(err, GatewayError::Auth(_)));
        assert!(sleeper.sleeps().is_empty());
        assert_eq!(provider.requests().len(), 1);
    }

    #[test]
    fn exhausted_retries_and_timeouts() {
        let provider = ScriptedProvider::new((0..4).map(|_| status(500)));
        let err = complete_chat(&bundle(), &config(), &provider, &RecordingSleeper::default()).unwrap_err();
        assert!(matches!(err, GatewayError::RetriesExhausted { attempts: 4, .. }));
        let provider = ScriptedProvider::new((0..4).map(|_| Err(ProviderError::Timeout)));
        let err = complete_chat(&bundle(), &config(), &provider, &RecordingSleeper::default()).unwrap_err();
        assert_eq!(err, GatewayError::Timeout { attempts: 4 });
    }

    #[test]
    fn backoff_is_exponential_with_bounded_jitter() {
        let base = Duration::from_secs(1);
        assert_eq!(backoff_delay(base, 0, 0.0), Duration::from_secs(1));
        assert_eq!(backoff_delay(base, 3, 0.0), Duration::from_secs(8));
        assert_eq!(backoff_delay(base, 1, 1.0), Duration::from_millis(2500));
    }

    #[test]
    fn config_validation() {
        assert!(config().validate().is_ok());
        for bad in [
            LlmRunConfig { top_p: 0.0, ..config() },
            LlmRunConfig { top_p: 1.5, ..config() },
            LlmRunConfig { temperature: -0.1, ..config() },
            LlmRunConfig { batch_size: 0, ..config() },
            LlmRunConfig { model: " ".into(), ..config() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
