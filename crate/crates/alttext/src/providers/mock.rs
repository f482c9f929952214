//! Offline backend answering from fixture tables. Image requests are keyed
//! by [`image_digest`] of the decoded pixels, chat requests by
//! [`prompt_digest`] of the reassembled prompt. Missing entries get fixed
//! fallbacks, so any input produces a deterministic answer.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use alttext_core::prompt::SYSTEM_SEPARATOR;
use alttext_core::raster::Rgba;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{Backend, OcrItem, ProviderError, ProviderKind, Response, Usage};
use crate::imageio;

/// Label returned for images without a fixture.
pub const FALLBACK_LABEL: &str = "icon";

/// SHA-256 over the raster size and RGBA bytes.
pub fn image_digest(img: &Rgba) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}x{}:", img.width(), img.height()).as_bytes());
    h.update(img.data());
    hex::encode(h.finalize())
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fixtures {
    pub labels: BTreeMap<String, String>,
    pub ocr: BTreeMap<String, Vec<OcrItem>>,
    pub alttext: BTreeMap<String, String>,
}

impl Fixtures {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}

/// Fixture backend with call counters. `delay` and `fail_first` exist for
/// exercising the concurrency limit and the retry loop.
#[derive(Default)]
pub struct MockBackend {
    fixtures: Arc<Fixtures>,
    delay: Option<Duration>,
    fail_first: AtomicUsize,
    calls: AtomicUsize,
    active: Mutex<(usize, usize)>,
}

impl MockBackend {
    pub fn new(fixtures: Arc<Fixtures>) -> Self {
        MockBackend {
            fixtures,
            ..Default::default()
        }
    }

    pub fn with_delay(mut self, d: Duration) -> Self {
        self.delay = Some(d);
        self
    }

    /// The next `n` calls fail as if the service were down.
    pub fn failing_first(self, n: usize) -> Self {
        self.fail_first.store(n, Ordering::SeqCst);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Most calls observed running at the same time.
    pub fn peak_concurrency(&self) -> usize {
        self.active.lock().expect("mock lock").1
    }

    fn answer(&self, kind: ProviderKind, payload: &Value) -> Result<Response, ProviderError> {
        let name = kind.as_str();
        let bad = |reason: &str| ProviderError::BadResponse {
            kind: name,
            reason: reason.to_string(),
        };
        match kind {
            ProviderKind::Upscaler => {
                let img = image_field(payload).ok_or_else(|| bad("no image_base64"))?;
                let out = imageio::decode_base64(img)
                    .map_err(|e| ProviderError::DecodeError(e.to_string()))?
                    .to_icon_size();
                Ok(Response {
                    body: json!({ "image_base64": imageio::encode_png_base64(&out) }),
                    usage: None,
                })
            }
            ProviderKind::Ocr => {
                let img = image_field(payload).ok_or_else(|| bad("no image_base64"))?;
                let img = imageio::decode_base64(img)
                    .map_err(|e| ProviderError::DecodeError(e.to_string()))?;
                let items = self
                    .fixtures
                    .ocr
                    .get(&image_digest(&img))
                    .cloned()
                    .unwrap_or_default();
                Ok(Response {
                    body: json!({ "items": items }),
                    usage: None,
                })
            }
            ProviderKind::VisionLabeler => {
                let (text, url) = vision_parts(payload).ok_or_else(|| bad("no image part"))?;
                let img = imageio::decode_base64(url)
                    .map_err(|e| ProviderError::DecodeError(e.to_string()))?;
                let label = self
                    .fixtures
                    .labels
                    .get(&image_digest(&img))
                    .map_or(FALLBACK_LABEL, String::as_str);
                Ok(chat_reply(label, word_count(text) + 1))
            }
            ProviderKind::ChatLlm => {
                let prompt = chat_prompt(payload).ok_or_else(|| bad("no messages"))?;
                let digest = prompt_digest(&prompt);
                let reply = match self.fixtures.alttext.get(&digest) {
                    Some(t) => t.clone(),
                    None => format!("mock alt text {}", &digest[..8]),
                };
                Ok(chat_reply(&reply, word_count(&prompt)))
            }
        }
    }
}

impl Backend for MockBackend {
    fn call(&self, kind: ProviderKind, _model: &str, payload: &Value) -> Result<Response, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        {
            let mut a = self.active.lock().expect("mock lock");
            a.0 += 1;
            a.1 = a.1.max(a.0);
        }
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        let failing = self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        let out = if failing {
            Err(ProviderError::ProviderUnavailable {
                kind: kind.as_str(),
                reason: "injected failure".into(),
            })
        } else {
            self.answer(kind, payload)
        };
        self.active.lock().expect("mock lock").0 -= 1;
        out
    }
}

fn image_field(payload: &Value) -> Option<&str> {
    payload.get("image_base64")?.as_str()
}

fn vision_parts(payload: &Value) -> Option<(&str, &str)> {
    let parts = payload.get("messages")?.get(0)?.get("content")?.as_array()?;
    let text = parts.iter().find_map(|p| p.get("text")?.as_str())?;
    let url = parts
        .iter()
        .find_map(|p| p.get("image_url")?.get("url")?.as_str())?;
    Some((text, url))
}

/// System and user contents joined back into the original prompt.
fn chat_prompt(payload: &Value) -> Option<String> {
    let messages = payload.get("messages")?.as_array()?;
    let texts: Vec<&str> = messages
        .iter()
        .filter_map(|m| m.get("content")?.as_str())
        .collect();
    (!texts.is_empty()).then(|| texts.join(SYSTEM_SEPARATOR))
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

fn chat_reply(content: &str, prompt_tokens: u64) -> Response {
    let usage = Usage {
        prompt_tokens,
        completion_tokens: word_count(content),
    };
    Response {
        body: json!({
            "choices": [{ "index": 0, "message": { "role": "assistant", "content": content } }],
            "usage": usage,
        }),
        usage: Some(usage),
    }
}
