use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::levenshtein;

/// Model name and decoding parameters sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            model: String::from("llama-3.3-70b-instruct"),
            temperature: 0.8,
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub params: &'a DecodingParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Network-level failure; worth retrying.
    Transport(String),
    Http {
        status: u16,
        body: String,
    },
    /// Replay has no (remaining) response for this prompt.
    MissingEntry {
        digest: String,
    },
    Malformed(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            BackendError::MissingEntry { .. } | BackendError::Malformed(_) => false,
        }
    }
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendError::Transport(m) => write!(f, "transport error: {m}"),
            BackendError::Http { status, body } => write!(f, "HTTP {status}: {body}"),
            BackendError::MissingEntry { digest } => write!(f, "no transcript entry for prompt digest {digest}"),
            BackendError::Malformed(m) => write!(f, "malformed response: {m}"),
        }
    }
}

impl core::error::Error for BackendError {}

/// A chat-completion service answering one single-message prompt at a time.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;

    /// Short label stored in transcripts, e.g. `"live"` or `"replay"`.
    fn tag(&self) -> &str;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn tag(&self) -> &str {
        (**self).tag()
    }
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One recorded (prompt, response) exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub prompt: String,
    pub response: String,
    pub backend: String,
    pub timestamp: String,
}

impl TranscriptEntry {
    pub fn new(prompt: &str, response: &str, backend: &str, timestamp: &str) -> Self {
        TranscriptEntry {
            digest: prompt_digest(prompt),
            prompt: prompt.into(),
            response: response.into(),
            backend: backend.into(),
            timestamp: timestamp.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    /// Unknown or exhausted prompts are an error.
    #[default]
    Strict,
    /// Unknown prompts get the response of the closest recorded prompt
    /// (edit distance); exhausted prompts repeat their last response.
    Fuzzy,
}

struct Slot {
    prompt: String,
    responses: Vec<String>,
    cursor: AtomicUsize,
}

/// Answers prompts from a recorded transcript.
///
/// Repeated prompts are served their recorded responses in order, so a run
/// that asked the same question twice replays both answers.
pub struct ReplayBackend {
    slots: BTreeMap<String, Slot>,
    order: Vec<String>,
    mode: ReplayMode,
}

impl ReplayBackend {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>, mode: ReplayMode) -> Self {
        let mut slots: BTreeMap<String, Slot> = BTreeMap::new();
        let mut order = Vec::new();
        for e in entries {
            let digest = prompt_digest(&e.prompt);
            slots
                .entry(digest.clone())
                .or_insert_with(|| {
                    order.push(digest);
                    Slot {
                        prompt: e.prompt.clone(),
                        responses: Vec::new(),
                        cursor: AtomicUsize::new(0),
                    }
                })
                .responses
                .push(e.response);
        }
        ReplayBackend { slots, order, mode }
    }

    pub fn len(&self) -> usize {
        self.slots.values().map(|s| s.responses.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn nearest(&self, prompt: &str) -> Option<&Slot> {
        self.order
            .iter()
            .filter_map(|d| self.slots.get(d))
            .min_by_key(|slot| levenshtein(&slot.prompt, prompt))
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let digest = prompt_digest(request.prompt);
        match (self.slots.get(&digest), self.mode) {
            (Some(slot), mode) => {
                let k = slot.cursor.fetch_add(1, Ordering::SeqCst);
                match slot.responses.get(k) {
                    Some(r) => Ok(r.clone()),
                    None if mode == ReplayMode::Fuzzy => Ok(slot.responses[slot.responses.len() - 1].clone()),
                    None => Err(BackendError::MissingEntry { digest }),
                }
            }
            (None, ReplayMode::Strict) => Err(BackendError::MissingEntry { digest }),
            (None, ReplayMode::Fuzzy) => self
                .nearest(request.prompt)
                .map(|slot| slot.responses[0].clone())
                .ok_or(BackendError::MissingEntry { digest }),
        }
    }

    fn tag(&self) -> &str {
        "replay"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req<'a>(prompt: &'a str, params: &'a DecodingParams) -> CompletionRequest<'a> {
        CompletionRequest { prompt, params }
    }

    #[test]
    fn digest_is_pure() {
        assert_eq!(prompt_digest("abc"), prompt_digest("abc"));
        assert_eq!(
            prompt_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn replay_hit_and_strict_miss() {
        let params = DecodingParams::default();
        let backend = ReplayBackend::new(
            [TranscriptEntry::new("p", "x[0]+x[1]", "live", "0")],
            ReplayMode::Strict,
        );
        assert_eq!(backend.complete(&req("p", &params)).unwrap(), "x[0]+x[1]");
        match backend.complete(&req("q", &params)) {
            Err(BackendError::MissingEntry { digest }) => assert_eq!(digest, prompt_digest("q")),
            other => panic!("{other:?}"),
        }
        // exhausted
        assert!(matches!(
            backend.complete(&req("p", &params)),
            Err(BackendError::MissingEntry { .. })
        ));
    }

    #[test]
    fn repeated_prompts_replay_in_order() {
        let params = DecodingParams::default();
        let backend = ReplayBackend::new(
            [
                TranscriptEntry::new("p", "first", "live", "0"),
                TranscriptEntry::new("p", "second", "live", "1"),
            ],
            ReplayMode::Fuzzy,
        );
        assert_eq!(backend.complete(&req("p", &params)).unwrap(), "first");
        assert_eq!(backend.complete(&req("p", &params)).unwrap(), "second");
        assert_eq!(backend.complete(&req("p", &params)).unwrap(), "second");
        assert_eq!(backend.len(), 2);
    }

    #[test]
    fn fuzzy_falls_back_to_nearest_prompt() {
        let params = DecodingParams::default();
        let backend = ReplayBackend::new(
            [
                TranscriptEntry::new("Example 1: x[0]", "a", "live", "0"),
                TranscriptEntry::new("completely different", "b", "live", "0"),
            ],
            ReplayMode::Fuzzy,
        );
        assert_eq!(backend.complete(&req("Example 1: x[1]", &params)).unwrap(), "a");
    }

    #[test]
    fn retryable_classification() {
        assert!(BackendError::Transport("reset".into()).is_retryable());
        assert!(BackendError::Http {
            status: 503,
            body: String::new()
        }
        .is_retryable());
        assert!(!BackendError::Http {
            status: 401,
            body: String::new()
        }
        .is_retryable());
        assert!(!BackendError::MissingEntry { digest: String::new() }.is_retryable());
    }
}
