//! External model interfaces. Every provider kind goes through one
//! [`ProviderClient`], which layers the response cache, the spend budget,
//! the in-flight limit and retries over a [`Backend`] (an HTTP endpoint or
//! an offline fixture table).

mod budget;
mod cache;
mod client;
mod limiter;
pub mod mock;
mod ops;
mod remote;
mod retry;
mod transport;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use budget::{micro_usd, Budget, ModelPrice, PriceTable};
pub use cache::{CacheKey, ResponseCache};
pub use client::{CallRecord, ProviderClient};
pub use limiter::{InFlight, Permit};
pub use mock::{image_digest, prompt_digest, Fixtures, MockBackend};
pub use ops::{
    generate_alttext, label_icon, normalize_reply, ocr_icon, upscale_icon, AltText, IconLabel,
    OcrItem, OcrResult, DEFAULT_OCR_MIN_CONFIDENCE,
};
pub use remote::HttpBackend;
pub use retry::{retry, RetryPolicy};
pub use transport::{CountingTransport, Transport, TransportError, UreqTransport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Upscaler,
    Ocr,
    VisionLabeler,
    ChatLlm,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 4] = [
        ProviderKind::Upscaler,
        ProviderKind::Ocr,
        ProviderKind::VisionLabeler,
        ProviderKind::ChatLlm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderKind::Upscaler => "upscaler",
            ProviderKind::Ocr => "ocr",
            ProviderKind::VisionLabeler => "vision_labeler",
            ProviderKind::ChatLlm => "chat_llm",
        }
    }
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key, never the key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub budget_usd: Option<f64>,
    /// Completion cap sent with chat-style requests.
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind, endpoint: &str, model_name: &str) -> Self {
        ProviderConfig {
            kind,
            endpoint: endpoint.to_string(),
            model_name: model_name.to_string(),
            api_key_env: None,
            max_in_flight: default_in_flight(),
            retry: RetryPolicy::default(),
            budget_usd: None,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let name = self.kind.as_str();
        if self.max_in_flight == 0 {
            return Err(format!("{name}: max_in_flight must be at least 1"));
        }
        if self.retry.max_attempts == 0 {
            return Err(format!("{name}: retry.max_attempts must be at least 1"));
        }
        if let Some(b) = self.budget_usd {
            if !(b.is_finite() && b >= 0.0) {
                return Err(format!("{name}: budget_usd must be a non-negative number"));
            }
        }
        if self.model_name.trim().is_empty() {
            return Err(format!("{name}: model_name is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("{kind} provider unavailable: {reason}")]
    ProviderUnavailable { kind: &'static str, reason: String },
    #[error("spend limit reached: {needed_usd:.6} USD needed, {left_usd:.6} USD left")]
    BudgetExceeded { needed_usd: f64, left_usd: f64 },
    #[error("{0} provider returned an empty response")]
    EmptyResponse(&'static str),
    #[error("cannot decode image: {0}")]
    DecodeError(String),
    #[error("malformed {kind} response: {reason}")]
    BadResponse { kind: &'static str, reason: String },
}

impl ProviderError {
    /// Whether another attempt may succeed.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ProviderError::ProviderUnavailable { .. } | ProviderError::EmptyResponse(_)
        )
    }
}

/// Token counts reported by a provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One attempt's outcome: the response body and any reported usage.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub body: Value,
    pub usage: Option<Usage>,
}

/// A provider endpoint that performs single attempts.
pub trait Backend: Send + Sync {
    fn call(&self, kind: ProviderKind, model: &str, payload: &Value) -> Result<Response, ProviderError>;
}

/// Reads `usage.prompt_tokens` / `usage.completion_tokens` when present.
pub fn usage_of(body: &Value) -> Option<Usage> {
    let u = body.get("usage")?;
    Some(Usage {
        prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
        completion_tokens: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    })
}
