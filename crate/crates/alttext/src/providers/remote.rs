use std::sync::Arc;

use serde_json::Value;

use super::{usage_of, Backend, ProviderError, ProviderKind, Response, Transport};

/// JSON-over-HTTPS endpoint. Chat-style kinds speak the chat-completion
/// wire format; OCR and upscaling take `{model, image_base64}`.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
}

impl HttpBackend {
    pub fn new(endpoint: &str, api_key: Option<String>, transport: Arc<dyn Transport>) -> Self {
        HttpBackend {
            endpoint: endpoint.to_string(),
            api_key,
            transport,
        }
    }

    /// Reads the key from `api_key_env` when one is configured.
    pub fn key_from_env(var: Option<&str>) -> Option<String> {
        let var = var?;
        match std::env::var(var) {
            Ok(v) if !v.trim().is_empty() => Some(v),
            _ => {
                log::warn!("environment variable {var} is not set");
                None
            }
        }
    }
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl Backend for HttpBackend {
    fn call(&self, kind: ProviderKind, _model: &str, payload: &Value) -> Result<Response, ProviderError> {
        let name = kind.as_str();
        let (status, text) = self
            .transport
            .post_json(&self.endpoint, self.api_key.as_deref(), payload)
            .map_err(|e| ProviderError::ProviderUnavailable {
                kind: name,
                reason: e.to_string(),
            })?;
        if status == 429 || status >= 500 {
            return Err(ProviderError::ProviderUnavailable {
                kind: name,
                reason: format!("HTTP {status}"),
            });
        }
        if !(200..300).contains(&status) {
            let snippet: String = text.chars().take(200).collect();
            return Err(ProviderError::BadResponse {
                kind: name,
                reason: format!("HTTP {status}: {snippet}"),
            });
        }
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyResponse(name));
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse {
            kind: name,
            reason: e.to_string(),
        })?;
        let usage = usage_of(&body);
        Ok(Response { body, usage })
    }
}
