//! LLM clients: the offline mock and replay clients used in tests, a
//! recording wrapper, and the HTTP client for live runs.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompts::{parse_rendered_instruction, CURRENT_TASK_HEADING, STAGE1_MARKER, STAGE2_MARKER};
use super::sequence::render_sequence_plan;
use crate::action_dsl::emit_actions;
use crate::knowledge_parser::{parse_description, KinematicDescription};
use crate::oracle_planner::{plan, PlannerConfig};

pub const API_KEY_ENV: &str = "KINOPLAN_LLM_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Response(String),
    #[error("no recorded response for prompt {hash}")]
    ReplayMiss { hash: String },
    #[error("client configuration: {0}")]
    Config(String),
}

/// A text-completion backend. Implementations must allow concurrent calls
/// and keep no conversation state between them.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

impl<C: LlmClient + ?Sized> LlmClient for &C {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for Box<C> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for std::sync::Arc<C> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

/// Lowercase hex SHA-256 of the prompt bytes.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Answers both stages by reading the task back out of the prompt and
/// running the oracle planner on it.
#[derive(Debug, Clone, Default)]
pub struct MockOracleClient {
    pub config: PlannerConfig,
}

impl MockOracleClient {
    pub fn new(config: PlannerConfig) -> Self {
        Self { config }
    }
}

/// Pulls the instruction line and the description that follows it out of a
/// prompt section.
fn task_section(section: &str) -> Result<(String, KinematicDescription), LlmError> {
    let instruction = section
        .lines()
        .find_map(|l| l.strip_prefix("Instruction: "))
        .ok_or_else(|| LlmError::Response("prompt has no instruction line".into()))?;
    let start = section
        .find("Kinematic description:\n")
        .map(|i| i + "Kinematic description:\n".len())
        .ok_or_else(|| LlmError::Response("prompt has no kinematic description".into()))?;
    let end = section[start..]
        .find("Manipulation sequence:\n")
        .map(|i| start + i)
        .ok_or_else(|| LlmError::Response("prompt has no manipulation sequence heading".into()))?;
    Ok((instruction.to_string(), KinematicDescription::from_text(&section[start..end])))
}

impl LlmClient for MockOracleClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let (stage1, section) = if prompt.contains(STAGE1_MARKER) {
            (true, prompt)
        } else if prompt.contains(STAGE2_MARKER) {
            let at = prompt
                .find(CURRENT_TASK_HEADING)
                .ok_or_else(|| LlmError::Response("stage-2 prompt has no current task".into()))?;
            (false, &prompt[at..])
        } else {
            return Err(LlmError::Response("prompt is not a planning prompt".into()));
        };
        let (instruction, k) = task_section(section)?;
        let task = parse_rendered_instruction(&instruction)
            .ok_or_else(|| LlmError::Response(format!("cannot read task from {instruction:?}")))?;
        let object = parse_description(k.as_str()).map_err(|e| LlmError::Response(e.to_string()))?;
        if stage1 {
            render_sequence_plan(&object, &k, &task, &self.config).map_err(|e| LlmError::Response(e.to_string()))
        } else {
            let seq = plan(&object, &task, &self.config).map_err(|e| LlmError::Response(e.to_string()))?;
            Ok(format!("```\n{}\n```", emit_actions(&seq)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt_hash: String,
    pub response: String,
}

/// Serves responses recorded earlier, keyed by prompt hash.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    responses: HashMap<String, String>,
}

impl ReplayClient {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self {
            responses: entries.into_iter().map(|e| (e.prompt_hash, e.response)).collect(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let entries: Vec<TranscriptEntry> = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let hash = prompt_hash(prompt);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(LlmError::ReplayMiss { hash })
    }
}

/// One recorded call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub prompt: String,
    pub response: Result<String, LlmError>,
}

/// Wraps a client and keeps every prompt and response, in call order.
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<Vec<Exchange>>,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().unwrap().clone()
    }

    /// Successful calls as replay entries, deduplicated by prompt hash and
    /// sorted so the file does not depend on call order.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        let mut by_hash: HashMap<String, String> = HashMap::new();
        for ex in self.log.lock().unwrap().iter() {
            if let Ok(resp) = &ex.response {
                by_hash.entry(prompt_hash(&ex.prompt)).or_insert_with(|| resp.clone());
            }
        }
        let mut entries: Vec<TranscriptEntry> = by_hash
            .into_iter()
            .map(|(prompt_hash, response)| TranscriptEntry { prompt_hash, response })
            .collect();
        entries.sort_by(|a, b| a.prompt_hash.cmp(&b.prompt_hash));
        entries
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let response = self.inner.complete(prompt);
        self.log.lock().unwrap().push(Exchange {
            prompt: prompt.to_string(),
            response: response.clone(),
        });
        response
    }
}

/// Live endpoint settings. The API key is never part of this struct; it is
/// read from [`API_KEY_ENV`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub requests_per_second: f64,
    pub timeout_secs: u64,
    pub temperature: f64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            requests_per_second: 1.0,
            timeout_secs: 120,
            temperature: 0.0,
        }
    }
}

/// Chat-completions client over blocking HTTP with a minimum spacing
/// between requests.
pub struct HttpClient {
    config: HttpConfig,
    api_key: String,
    http: reqwest::blocking::Client,
    last_request: Mutex<Option<Instant>>,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient").field("config", &self.config).finish_non_exhaustive()
    }
}

impl HttpClient {
    pub fn from_env(config: HttpConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| LlmError::Config(format!("{API_KEY_ENV} is not set")))?;
        Self::new(config, key)
    }

    pub fn new(config: HttpConfig, api_key: String) -> Result<Self, LlmError> {
        if !(config.requests_per_second > 0.0 && config.requests_per_second.is_finite()) {
            return Err(LlmError::Config("requests_per_second must be positive".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self { config, api_key, http, last_request: Mutex::new(None) })
    }

    fn wait_turn(&self) {
        let spacing = Duration::from_secs_f64(1.0 / self.config.requests_per_second);
        let mut last = self.last_request.lock().unwrap();
        if let Some(prev) = *last {
            let ready = prev + spacing;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
    }
}

pub fn chat_request_body(config: &HttpConfig, prompt: &str) -> serde_json::Value {
    serde_json::json!({
        "model": config.model,
        "temperature": config.temperature,
        "messages": [{"role": "user", "content": prompt}],
    })
}

pub fn extract_chat_content(body: &serde_json::Value) -> Result<String, LlmError> {
    body.pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::Response("missing choices[0].message.content".into()))
}

impl LlmClient for HttpClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.wait_turn();
        let resp = self
            .http
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&chat_request_body(&self.config, prompt))
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Status { status: status.as_u16(), body: text });
        }
        let body: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::Response(e.to_string()))?;
        extract_chat_content(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn prompt_hash_is_sha256_hex() {
        assert_eq!(
            prompt_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn replay_serves_recorded_responses() {
        let client = ReplayClient::new([TranscriptEntry { prompt_hash: prompt_hash("p"), response: "r".into() }]);
        assert_eq!(client.complete("p").unwrap(), "r");
        assert!(matches!(client.complete("q"), Err(LlmError::ReplayMiss { .. })));
    }

    #[test]
    fn recording_round_trips_through_replay() {
        let rec = RecordingClient::new(ReplayClient::new([
            TranscriptEntry { prompt_hash: prompt_hash("a"), response: "1".into() },
            TranscriptEntry { prompt_hash: prompt_hash("b"), response: "2".into() },
        ]));
        rec.complete("b").unwrap();
        rec.complete("a").unwrap();
        let _ = rec.complete("missing");
        assert_eq!(rec.exchanges().len(), 3);
        let replay = ReplayClient::new(rec.transcript());
        assert_eq!(replay.len(), 2);
        assert_eq!(replay.complete("a").unwrap(), "1");
    }

    #[test]
    fn mock_rejects_unrelated_prompts() {
        assert!(MockOracleClient::default().complete("hello").is_err());
    }

    /// Accepts one HTTP request and answers it with `body`, returning the
    /// raw request text.
    fn one_shot_server(status: &'static str, body: String) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            head + &String::from_utf8(payload).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn http_client_speaks_chat_completions() {
        let reply = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "grasp()"}}]});
        let (endpoint, server) = one_shot_server("200 OK", reply.to_string());
        let config = HttpConfig { endpoint, model: "test-model".into(), ..HttpConfig::default() };
        let client = HttpClient::new(config, "secret-key".into()).unwrap();
        assert_eq!(client.complete("the prompt").unwrap(), "grasp()");
        let request = server.join().unwrap();
        assert!(request.starts_with("POST /v1/chat/completions"));
        assert!(request.to_ascii_lowercase().contains("authorization: bearer secret-key"));
        assert!(request.contains("\"model\":\"test-model\""));
        assert!(request.contains("the prompt"));
    }

    #[test]
    fn http_errors_are_typed() {
        let (endpoint, server) = one_shot_server("500 Internal Server Error", "{}".into());
        let client = HttpClient::new(HttpConfig { endpoint, ..HttpConfig::default() }, "k".into()).unwrap();
        assert!(matches!(client.complete("x"), Err(LlmError::Status { status: 500, .. })));
        server.join().unwrap();
        assert!(extract_chat_content(&serde_json::json!({"choices": []})).is_err());
    }

    #[test]
    fn rate_cap_spaces_requests() {
        let config = HttpConfig { requests_per_second: 20.0, ..HttpConfig::default() };
        let client = HttpClient::new(config, "k".into()).unwrap();
        let start = Instant::now();
        for _ in 0..3 {
            client.wait_turn();
        }
        assert!(start.elapsed() >= Duration::from_millis(95));
    }
}
