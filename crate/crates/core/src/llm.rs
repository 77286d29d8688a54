//! Chat-completion client: request building, response parsing, and
//! swappable backends.
//!
//! A rendered prompt becomes a [`CompletionRequest`] (one user message,
//! temperature 0), goes through a [`Backend`], and the raw response text is
//! parsed into a label plus rationale. Backends:
//!
//! - [`HttpBackend`]: POSTs chat-completions JSON to a real endpoint, with
//!   exponential backoff on 429/5xx/network failures (authentication
//!   failures are permanent);
//! - [`ReplayBackend`]: reads responses from a directory of fixtures keyed
//!   by a content hash of the request, so runs are fully deterministic and
//!   prompt edits invalidate stale fixtures automatically;
//! - [`RecordingBackend`]: forwards to an inner backend and writes the
//!   fixture the replay backend would need — the way fixtures are made;
//! - [`EchoBackend`]: answers with whatever small-model prediction the
//!   prompt itself carries; turns the whole pipeline into an identity
//!   function for testing.
//!
//! [`run_batch`] fans jobs across a bounded worker pool and returns results
//! in input order regardless of completion order.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TacticLabel;
use crate::promptkit::PromptVariant;

/// Default generation cap: room for a rationale paragraph plus the final
/// label line, with margin.
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

/// Default bound on concurrently in-flight requests.
pub const DEFAULT_CONCURRENCY: usize = 4;

/// Maximum retries after the initial attempt for transient failures.
const MAX_RETRIES: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("backend returned HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("authentication rejected with HTTP {status}; check the API key")]
    Auth { status: u16 },
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("no replay fixture for request hash {hash} at {path}")]
    ReplayMiss { hash: String, path: PathBuf },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("replay store I/O at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One chat message on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// A chat-completions request. Always exactly one user message holding the
/// rendered prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    #[serde(rename = "model")]
    pub model_name: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(model_name: &str, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            model_name: model_name.to_owned(),
            messages: vec![Message {
                role: "user".to_owned(),
                content: prompt.to_owned(),
            }],
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// The single user message's content.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

/// Stable content hash of a request (SHA-256 of its canonical JSON), used
/// as the replay-fixture key.
pub fn request_hash(request: &CompletionRequest) -> String {
    let json = serde_json::to_string(request).expect("request serialization cannot fail");
    let digest = Sha256::digest(json.as_bytes());
    hex::encode(digest)
}

/// The label extracted from a response, or the explicit absence of one.
/// Unparsed is a value, not an error: evaluation scores it conservatively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParsedLabel {
    Label(TacticLabel),
    Unparsed,
}

impl ParsedLabel {
    pub fn label(&self) -> Option<TacticLabel> {
        match self {
            ParsedLabel::Label(label) => Some(*label),
            ParsedLabel::Unparsed => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ParsedLabel::Label(label) => label.as_str(),
            ParsedLabel::Unparsed => "unparsed",
        }
    }
}

impl std::fmt::Display for ParsedLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TryFrom<String> for ParsedLabel {
    type Error = crate::corpus::ParseLabelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        if value.eq_ignore_ascii_case("unparsed") {
            Ok(ParsedLabel::Unparsed)
        } else {
            value.parse().map(ParsedLabel::Label)
        }
    }
}

impl From<ParsedLabel> for String {
    fn from(value: ParsedLabel) -> String {
        value.as_str().to_owned()
    }
}

/// The parsed outcome for one input snippet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub input_id: String,
    pub parsed_label: ParsedLabel,
    pub rationale: String,
    pub raw_response: String,
    pub prompt_variant: PromptVariant,
    pub fallback_used: bool,
    /// Wall-clock latency; deliberately not serialized so that reports from
    /// replayed runs are byte-identical.
    #[serde(skip)]
    pub latency_ms: u64,
}

/// Extract a label and rationale from response text. Primary rule: the last
/// line `Final label: <x>` with `x` (case-insensitively) in the universe.
/// Fallback: exactly one universe label appearing as a whole word in the
/// final paragraph. Otherwise unparsed. Never fails.
pub fn parse_label(response: &str, universe: &[TacticLabel]) -> (ParsedLabel, String) {
    const MARKER: &str = "final label:";
    for line in response.lines().rev() {
        let trimmed = line.trim();
        let Some(prefix) = trimmed.get(..MARKER.len()) else {
            continue;
        };
        if !prefix.eq_ignore_ascii_case(MARKER) {
            continue;
        }
        let raw = trimmed[MARKER.len()..].trim();
        let candidate = raw.trim_matches(|c: char| {
            c == '.' || c == '"' || c == '\'' || c == '`' || c == '*' || c.is_whitespace()
        });
        if let Ok(label) = candidate.parse::<TacticLabel>() {
            if universe.contains(&label) {
                let rationale: String = response
                    .lines()
                    .filter(|l| !std::ptr::eq(*l, line))
                    .collect::<Vec<_>>()
                    .join("\n");
                return (ParsedLabel::Label(label), rationale.trim().to_owned());
            }
        }
    }
    // Fallback: whole-word scan of the final paragraph.
    let final_paragraph = response
        .rsplit("\n\n")
        .find(|p| !p.trim().is_empty())
        .unwrap_or("");
    let words: std::collections::BTreeSet<String> = final_paragraph
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let mentioned: Vec<TacticLabel> = universe
        .iter()
        .copied()
        .filter(|label| words.contains(label.as_str()))
        .collect();
    match mentioned.as_slice() {
        [only] => (ParsedLabel::Label(*only), response.trim().to_owned()),
        _ => (ParsedLabel::Unparsed, response.trim().to_owned()),
    }
}

// --- Backends --------------------------------------------------------------

/// A completion source. Implementations must be shareable across the worker
/// pool threads.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

/// Live chat-completions endpoint with retry and exponential backoff.
pub struct HttpBackend {
    endpoint_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    base_backoff: Duration,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(endpoint_url: &str, api_key: Option<&str>) -> HttpBackend {
        HttpBackend {
            endpoint_url: endpoint_url.to_owned(),
            api_key: api_key.map(str::to_owned),
            client: reqwest::blocking::Client::new(),
            base_backoff: Duration::from_millis(250),
        }
    }

    /// Override the first backoff interval (doubled on each retry).
    pub fn with_base_backoff(mut self, base: Duration) -> HttpBackend {
        self.base_backoff = base;
        self
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, AttemptOutcome> {
        let mut builder = self.client.post(&self.endpoint_url).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = match builder.send() {
            Ok(response) => response,
            Err(e) => return Err(AttemptOutcome::Transient(format!("network error: {e}"))),
        };
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(AttemptOutcome::Permanent(LlmError::Auth {
                status: status.as_u16(),
            }));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptOutcome::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let message = response.text().unwrap_or_default();
            return Err(AttemptOutcome::Permanent(LlmError::Http {
                status: status.as_u16(),
                message,
            }));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| AttemptOutcome::Permanent(LlmError::MalformedResponse(e.to_string())))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|choice| choice.message.content)
            .ok_or_else(|| {
                AttemptOutcome::Permanent(LlmError::MalformedResponse(
                    "response carried no choices".to_owned(),
                ))
            })
    }
}

enum AttemptOutcome {
    Transient(String),
    Permanent(LlmError),
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let mut last_transient = String::new();
        for attempt in 0..=MAX_RETRIES {
            match self.attempt(request) {
                Ok(content) => return Ok(content),
                Err(AttemptOutcome::Permanent(e)) => return Err(e),
                Err(AttemptOutcome::Transient(message)) => {
                    last_transient = message;
                    if attempt < MAX_RETRIES {
                        std::thread::sleep(self.base_backoff * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: MAX_RETRIES + 1,
            last: last_transient,
        })
    }
}

/// Stored form of one replay fixture.
#[derive(Debug, Serialize, Deserialize)]
struct ReplayRecord {
    request: CompletionRequest,
    response: String,
}

/// Deterministic backend reading `<request-hash>.json` fixtures.
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: &Path) -> ReplayBackend {
        ReplayBackend {
            dir: dir.to_owned(),
        }
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let hash = request_hash(request);
        let path = self.dir.join(format!("{hash}.json"));
        let data = match std::fs::read_to_string(&path) {
            Ok(data) => data,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(LlmError::ReplayMiss { hash, path })
            }
            Err(e) => return Err(LlmError::Io { path, source: e }),
        };
        let record: ReplayRecord = serde_json::from_str(&data)
            .map_err(|e| LlmError::MalformedResponse(format!("fixture {hash}: {e}")))?;
        Ok(record.response)
    }
}

/// Forwards to an inner backend and writes a replay fixture for every
/// completed request.
pub struct RecordingBackend<B: Backend> {
    inner: B,
    dir: PathBuf,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, dir: &Path) -> RecordingBackend<B> {
        RecordingBackend {
            inner,
            dir: dir.to_owned(),
        }
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let response = self.inner.complete(request)?;
        let record = ReplayRecord {
            request: request.clone(),
            response: response.clone(),
        };
        let path = self.dir.join(format!("{}.json", request_hash(request)));
        let json = serde_json::to_string_pretty(&record)
            .expect("replay record serialization cannot fail");
        let write = std::fs::File::create(&path).and_then(|mut f| {
            f.write_all(json.as_bytes())?;
            f.write_all(b"\n")
        });
        write.map_err(|e| LlmError::Io { path, source: e })?;
        Ok(response)
    }
}

/// Test backend that answers with the small-model prediction embedded in
/// the prompt itself, making pipeline output equal classifier output.
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let prompt = request.prompt();
        let prediction = prompt
            .lines()
            .rev()
            .find_map(|line| line.trim().strip_prefix("Small model prediction:"))
            .map(|rest| {
                rest.split('(')
                    .next()
                    .unwrap_or(rest)
                    .trim()
                    .to_owned()
            });
        match prediction {
            Some(label) => Ok(format!(
                "The snippet matches the classifier's assessment.\nFinal label: {label}"
            )),
            None => Ok("The prompt carried no classifier assessment to echo.".to_owned()),
        }
    }
}

/// One unit of work for [`run_batch`].
#[derive(Debug, Clone)]
pub struct CompletionJob {
    pub input_id: String,
    pub request: CompletionRequest,
    pub prompt_variant: PromptVariant,
    pub fallback_used: bool,
}

/// A batch failure, pinned to the job that caused it.
#[derive(Debug, thiserror::Error)]
#[error("completion for {input_id} failed: {source}")]
pub struct BatchError {
    pub input_id: String,
    pub job_index: usize,
    #[source]
    pub source: LlmError,
}

/// Execute jobs over a bounded worker pool (the concurrency bound doubles
/// as the rate limit) and return one result per job, in job order. The
/// first error aborts the batch.
pub fn run_batch(
    backend: &dyn Backend,
    jobs: &[CompletionJob],
    concurrency: usize,
) -> Result<Vec<DetectionResult>, BatchError> {
    let workers = concurrency.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<DetectionResult>>> = Mutex::new(vec![None; jobs.len()]);
    let failure: Mutex<Option<BatchError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= jobs.len() || failure.lock().unwrap().is_some() {
                    return;
                }
                let job = &jobs[index];
                let started = Instant::now();
                match backend.complete(&job.request) {
                    Ok(raw_response) => {
                        let (parsed_label, rationale) =
                            parse_label(&raw_response, &TacticLabel::ALL);
                        let result = DetectionResult {
                            input_id: job.input_id.clone(),
                            parsed_label,
                            rationale,
                            raw_response,
                            prompt_variant: job.prompt_variant,
                            fallback_used: job.fallback_used,
                            latency_ms: started.elapsed().as_millis() as u64,
                        };
                        slots.lock().unwrap()[index] = Some(result);
                    }
                    Err(e) => {
                        // Keep the earliest job's failure so the reported
                        // example is stable under thread scheduling.
                        let mut failure = failure.lock().unwrap();
                        if failure.as_ref().map_or(true, |f| index < f.job_index) {
                            *failure = Some(BatchError {
                                input_id: job.input_id.clone(),
                                job_index: index,
                                source: e,
                            });
                        }
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let results = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every job either filled its slot or errored"))
        .collect();
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::{BufRead, BufReader, Read, Write as IoWrite};
    use std::net::TcpListener;

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest::new("test-model", prompt)
    }

    #[test]
    fn primary_rule_takes_the_final_label_line() {
        let (label, rationale) = parse_label(
            "The loop registers each event.\nFinal label: pooling",
            &TacticLabel::ALL,
        );
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Pooling));
        assert_eq!(rationale, "The loop registers each event.");
    }

    #[test]
    fn the_last_matching_line_wins() {
        let response = "Final label: audit\nOn reflection:\nFinal label: heartbeat";
        let (label, _) = parse_label(response, &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Heartbeat));
    }

    #[test]
    fn label_case_and_trailing_punctuation_are_tolerated() {
        let (label, _) = parse_label("reasoning\nFinal label: Audit.", &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Audit));
        let (label, _) = parse_label("reasoning\nfinal label: \"SCHEDULER\"", &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Scheduler));
    }

    #[test]
    fn an_invalid_final_line_falls_back_to_an_earlier_one() {
        let response = "Final label: audit\nFinal label: banana";
        let (label, _) = parse_label(response, &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Audit));
    }

    #[test]
    fn single_label_word_in_final_paragraph_is_the_fallback() {
        let (label, rationale) = parse_label("The tactic is heartbeat.", &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Heartbeat));
        assert_eq!(rationale, "The tactic is heartbeat.");
    }

    #[test]
    fn fallback_scans_only_the_final_paragraph() {
        let response = "It could be audit.\n\nNo - this is pooling.";
        let (label, _) = parse_label(response, &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Pooling));
    }

    #[test]
    fn ambiguous_mentions_are_unparsed() {
        let response = "This mixes audit and pooling behavior.";
        let (label, rationale) = parse_label(response, &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Unparsed);
        assert_eq!(rationale, response);
    }

    #[test]
    fn whole_word_matching_ignores_substrings() {
        let (label, _) = parse_label("An auditor reviewed the poolings.", &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Unparsed);
    }

    #[test]
    fn empty_and_labelless_responses_are_unparsed() {
        assert_eq!(parse_label("", &TacticLabel::ALL).0, ParsedLabel::Unparsed);
        assert_eq!(
            parse_label("Nothing to see here.", &TacticLabel::ALL).0,
            ParsedLabel::Unparsed
        );
    }

    proptest! {
        #[test]
        fn parse_label_is_total(response in ".{0,300}") {
            let (label, _) = parse_label(&response, &TacticLabel::ALL);
            if let ParsedLabel::Label(l) = label {
                prop_assert!(TacticLabel::ALL.contains(&l));
            }
        }
    }

    #[test]
    fn requests_have_one_user_message_and_stable_wire_names() {
        let req = request("analyze this");
        assert_eq!(req.messages.len(), 1);
        assert_eq!(req.messages[0].role, "user");
        assert_eq!(req.temperature, 0.0);
        assert_eq!(req.max_tokens, DEFAULT_MAX_TOKENS);
        let json = serde_json::to_string(&req).unwrap();
        assert!(json.contains("\"model\":\"test-model\""));
        assert!(json.contains("\"messages\""));
        let back: CompletionRequest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn request_hashes_are_stable_and_content_sensitive() {
        let a = request("prompt one");
        let b = request("prompt one");
        let c = request("prompt two");
        assert_eq!(request_hash(&a), request_hash(&b));
        assert_ne!(request_hash(&a), request_hash(&c));
        assert_eq!(request_hash(&a).len(), 64);
        assert!(request_hash(&a).chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn echo_backend_answers_with_the_embedded_prediction() {
        let prompt = "Input code snippet:\nclass A {}\nSmall model prediction: heartbeat (confidence 0.92)\n";
        let response = EchoBackend.complete(&request(prompt)).unwrap();
        let (label, _) = parse_label(&response, &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Label(TacticLabel::Heartbeat));
    }

    #[test]
    fn echo_backend_without_a_prediction_is_unparsed() {
        let response = EchoBackend.complete(&request("just code")).unwrap();
        let (label, _) = parse_label(&response, &TacticLabel::ALL);
        assert_eq!(label, ParsedLabel::Unparsed);
    }

    #[test]
    fn recording_then_replaying_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let recorder = RecordingBackend::new(EchoBackend, dir.path());
        let req = request("code\nSmall model prediction: audit (confidence 0.80)\n");
        let live = recorder.complete(&req).unwrap();

        let replay = ReplayBackend::new(dir.path());
        assert_eq!(replay.complete(&req).unwrap(), live);
    }

    #[test]
    fn replay_miss_names_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayBackend::new(dir.path());
        let req = request("never recorded");
        match replay.complete(&req) {
            Err(LlmError::ReplayMiss { hash, path }) => {
                assert_eq!(hash, request_hash(&req));
                assert!(path.to_string_lossy().contains(&hash));
            }
            other => panic!("expected replay miss, got {other:?}"),
        }
    }

    #[test]
    fn run_batch_returns_results_in_input_order() {
        let labels = ["audit", "heartbeat", "pooling", "scheduler", "authenticate"];
        let jobs: Vec<CompletionJob> = labels
            .iter()
            .enumerate()
            .map(|(i, label)| CompletionJob {
                input_id: format!("job-{i}"),
                request: request(&format!(
                    "snippet {i}\nSmall model prediction: {label} (confidence 0.99)\n"
                )),
                prompt_variant: PromptVariant::Full,
                fallback_used: false,
            })
            .collect();
        let results = run_batch(&EchoBackend, &jobs, 4).unwrap();
        assert_eq!(results.len(), jobs.len());
        for (i, (result, label)) in results.iter().zip(&labels).enumerate() {
            assert_eq!(result.input_id, format!("job-{i}"));
            assert_eq!(result.parsed_label.as_str(), *label);
            assert!(!result.fallback_used);
        }
    }

    #[test]
    fn batch_results_serialize_without_latency() {
        let jobs = vec![CompletionJob {
            input_id: "only".to_owned(),
            request: request("x\nSmall model prediction: audit (confidence 1.00)\n"),
            prompt_variant: PromptVariant::Full,
            fallback_used: true,
        }];
        let a = serde_json::to_string(&run_batch(&EchoBackend, &jobs, 1).unwrap()).unwrap();
        let b = serde_json::to_string(&run_batch(&EchoBackend, &jobs, 1).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("latency"));
        assert!(a.contains("\"fallback_used\":true"));
    }

    /// Minimal HTTP/1.1 responder: reads one request (headers + body), sends
    /// the canned status/body, closes the connection.
    fn serve_responses(listener: TcpListener, responses: Vec<(u16, String)>) {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    break;
                }
                if let Some(v) = trimmed
                    .to_ascii_lowercase()
                    .strip_prefix("content-length:")
                    .map(str::trim)
                    .and_then(|v| v.parse().ok())
                {
                    content_length = v;
                }
            }
            let mut body_buf = vec![0u8; content_length];
            reader.read_exact(&mut body_buf).unwrap();
            let reason = match status {
                200 => "OK",
                401 => "Unauthorized",
                429 => "Too Many Requests",
                _ => "Internal Server Error",
            };
            let mut stream = reader.into_inner();
            let payload = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(payload.as_bytes()).unwrap();
        }
    }

    fn chat_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    #[test]
    fn http_backend_retries_through_transient_failures() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let server = std::thread::spawn(move || {
            serve_responses(
                listener,
                vec![
                    (429, String::new()),
                    (429, String::new()),
                    (200, chat_body("Final label: audit")),
                ],
            )
        });
        let backend =
            HttpBackend::new(&url, Some("key")).with_base_backoff(Duration::from_millis(5));
        let response = backend.complete(&request("ping")).unwrap();
        assert_eq!(response, "Final label: audit");
        server.join().unwrap();
    }

    #[test]
    fn http_backend_treats_auth_failures_as_permanent() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        // A single canned response: a retry would hang on accept, so the
        // error must surface immediately.
        let server =
            std::thread::spawn(move || serve_responses(listener, vec![(401, String::new())]));
        let backend =
            HttpBackend::new(&url, Some("bad")).with_base_backoff(Duration::from_millis(5));
        match backend.complete(&request("ping")) {
            Err(LlmError::Auth { status: 401 }) => {}
            other => panic!("expected auth failure, got {other:?}"),
        }
        server.join().unwrap();
    }

    #[test]
    fn http_backend_exhausts_retries_on_persistent_errors() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let server = std::thread::spawn(move || {
            serve_responses(listener, vec![(500, String::new()); 4]);
        });
        let backend =
            HttpBackend::new(&url, None).with_base_backoff(Duration::from_millis(2));
        match backend.complete(&request("ping")) {
            Err(LlmError::RetriesExhausted { attempts: 4, .. }) => {}
            other => panic!("expected exhausted retries, got {other:?}"),
        }
        server.join().unwrap();
    }
}
