//! Chat backends that need the network or the filesystem.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use ebg_core::llm::{BackendError, ChatBackend, CompletionRequest, ReplayBackend, TranscriptEntry};
use serde::Deserialize;
use serde_json::json;

use crate::config::BackendConfig;
use crate::io::{read_jsonl, JsonlError};

/// Talks to an OpenAI-style chat-completions endpoint: one user message in,
/// the first choice's content out.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    retries: u32,
    backoff: Duration,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            agent,
            url: url.to_owned(),
            api_key,
            retries: 0,
            backoff: Duration::from_millis(1000),
        }
    }

    pub fn from_config(config: &BackendConfig) -> Result<Self, String> {
        let url = config
            .endpoint_url
            .as_deref()
            .ok_or("backend.endpoint_url is not set")?;
        Ok(
            HttpBackend::new(url, config.api_key.clone(), Duration::from_secs(config.timeout_secs))
                .with_retries(config.http_retries, Duration::from_millis(config.retry_backoff_ms)),
        )
    }

    /// Retries retryable failures `retries` times, doubling `backoff` each time.
    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    fn call_once(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = json!({
            "model": request.params.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        });
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, body: text });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("{e}: {text}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed(format!("no choices[0].message.content in {text}")))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let mut wait = self.backoff;
        let mut tries = 0;
        loop {
            match self.call_once(request) {
                Err(e) if e.is_retryable() && tries < self.retries => {
                    tries += 1;
                    thread::sleep(wait);
                    wait *= 2;
                }
                other => return other,
            }
        }
    }

    fn tag(&self) -> &str {
        "live"
    }
}

/// Seconds since the Unix epoch, with millisecond precision.
pub fn timestamp_now() -> String {
    let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", t.as_secs(), t.subsec_millis())
}

/// Forwards to an inner backend and appends each successful exchange to a
/// transcript file, flushed per line.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<BufWriter<File>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RecordingBackend {
            inner,
            sink: Mutex::new(BufWriter::new(file)),
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let response = self.inner.complete(request)?;
        let entry = TranscriptEntry::new(request.prompt, &response, self.inner.tag(), &timestamp_now());
        let line = serde_json::to_string(&entry).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(sink, "{line}")
            .and_then(|_| sink.flush())
            .map_err(|e| BackendError::Transport(format!("cannot write transcript: {e}")))?;
        Ok(response)
    }

    fn tag(&self) -> &str {
        self.inner.tag()
    }
}

pub fn load_replay(path: &Path, mode: ebg_core::llm::ReplayMode) -> Result<ReplayBackend, JsonlError> {
    let entries: Vec<TranscriptEntry> = read_jsonl(path)?;
    Ok(ReplayBackend::new(entries, mode))
}
