use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::budget::micro_usd;
use super::{
    retry, Backend, Budget, CacheKey, InFlight, ModelPrice, ProviderConfig, ProviderError,
    ProviderKind, Response, ResponseCache, Usage,
};

/// Completion allowance assumed when a request sets no `max_tokens`.
const DEFAULT_COMPLETION_ALLOWANCE: u64 = 256;
/// Per-message overhead of the chat format, in tokens.
const MESSAGE_OVERHEAD: u64 = 8;

/// What one logical request produced, independent of whether it was served
/// from the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: ProviderKind,
    pub model: String,
    pub request_digest: String,
    pub usage: Option<Usage>,
    pub cost_usd: f64,
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Shareable handle for one configured provider.
pub struct ProviderClient {
    cfg: ProviderConfig,
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    limiter: InFlight,
    budgets: Vec<Arc<Budget>>,
    price: ModelPrice,
    sleep: Sleeper,
    attempts: AtomicUsize,
    cache_hits: AtomicUsize,
    charged: AtomicU64,
}

impl ProviderClient {
    /// `shared_budget` is an optional run-wide limit applied on top of the
    /// provider's own `budget_usd`.
    pub fn new(
        cfg: ProviderConfig,
        backend: Arc<dyn Backend>,
        cache: Option<ResponseCache>,
        price: ModelPrice,
        shared_budget: Option<Arc<Budget>>,
    ) -> Self {
        let mut budgets = Vec::new();
        if cfg.budget_usd.is_some() {
            budgets.push(Arc::new(Budget::new(cfg.budget_usd)));
        }
        budgets.extend(shared_budget);
        ProviderClient {
            limiter: InFlight::new(cfg.max_in_flight),
            cfg,
            backend,
            cache,
            budgets,
            price,
            sleep: Box::new(std::thread::sleep),
            attempts: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
            charged: AtomicU64::new(0),
        }
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    pub fn kind(&self) -> ProviderKind {
        self.cfg.kind
    }

    pub fn model(&self) -> &str {
        &self.cfg.model_name
    }

    pub fn limiter(&self) -> &InFlight {
        &self.limiter
    }

    /// Backend attempts made so far (cache hits excluded).
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    /// Spend charged by this client, in USD.
    pub fn charged_usd(&self) -> f64 {
        self.charged.load(Ordering::SeqCst) as f64 / 1e6
    }

    /// Worst-case cost of `payload`: every byte of text counted as a token,
    /// a fixed overhead per message, the configured image tokens per image,
    /// and the full completion allowance.
    pub fn estimate_usd(&self, payload: &Value) -> f64 {
        let mut prompt = 0u64;
        let mut images = 0u64;
        match payload.get("messages").and_then(Value::as_array) {
            Some(messages) => {
                for m in messages {
                    prompt += MESSAGE_OVERHEAD;
                    match m.get("content") {
                        Some(Value::String(s)) => prompt += s.len() as u64,
                        Some(Value::Array(parts)) => {
                            for p in parts {
                                match p.get("text").and_then(Value::as_str) {
                                    Some(t) => prompt += t.len() as u64,
                                    None => images += 1,
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
            None => images += u64::from(payload.get("image_base64").is_some()),
        }
        let completion = if payload.get("messages").is_some() {
            payload
                .get("max_tokens")
                .and_then(Value::as_u64)
                .unwrap_or(DEFAULT_COMPLETION_ALLOWANCE)
        } else {
            0
        };
        let usage = Usage {
            prompt_tokens: prompt + images * self.price.image_tokens,
            completion_tokens: completion,
        };
        self.price.cost_usd(usage)
    }

    fn cost_of(&self, resp: &Response, estimate: f64) -> f64 {
        match resp.usage {
            Some(u) => self.price.cost_usd(u),
            None => estimate,
        }
    }

    fn reserve(&self, amount: u64) -> Result<Vec<u64>, ProviderError> {
        let mut held = Vec::with_capacity(self.budgets.len());
        for b in &self.budgets {
            match b.reserve(amount) {
                Ok(r) => held.push(r),
                Err(e) => {
                    for (b, r) in self.budgets.iter().zip(held) {
                        b.release(r);
                    }
                    return Err(e);
                }
            }
        }
        Ok(held)
    }

    /// Sends `payload`, consulting the cache first. Cache hits cost nothing
    /// and never reach the backend.
    pub fn request(&self, payload: &Value) -> Result<(Response, CallRecord), ProviderError> {
        self.request_checked(payload, |_| Ok(()))
    }

    /// Like [`request`](Self::request), but a response rejected by `check`
    /// counts as a failed attempt and is never cached.
    pub fn request_checked(
        &self,
        payload: &Value,
        check: impl Fn(&Response) -> Result<(), ProviderError>,
    ) -> Result<(Response, CallRecord), ProviderError> {
        let key = CacheKey::new(self.cfg.kind, &self.cfg.model_name, payload);
        let estimate = self.estimate_usd(payload);
        let record = |resp: &Response| CallRecord {
            kind: self.cfg.kind,
            model: self.cfg.model_name.clone(),
            request_digest: key.hex().to_string(),
            usage: resp.usage,
            cost_usd: self.cost_of(resp, estimate),
        };

        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)).filter(|r| check(r).is_ok()) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            let rec = record(&hit);
            return Ok((hit, rec));
        }

        let reservation = micro_usd(estimate);
        let held = self.reserve(reservation)?;
        let outcome = {
            let _permit = self.limiter.acquire();
            retry(&self.cfg.retry, self.cfg.kind.as_str(), &*self.sleep, |_| {
                self.attempts.fetch_add(1, Ordering::SeqCst);
                let resp = self.backend.call(self.cfg.kind, &self.cfg.model_name, payload)?;
                check(&resp)?;
                Ok(resp)
            })
        };
        match outcome {
            Ok(resp) => {
                let actual = micro_usd(self.cost_of(&resp, estimate));
                let mut charged = 0;
                for (b, r) in self.budgets.iter().zip(held) {
                    charged = b.settle(r, actual);
                }
                if self.budgets.is_empty() {
                    charged = actual;
                }
                self.charged.fetch_add(charged, Ordering::SeqCst);
                if let Some(cache) = &self.cache {
                    if let Err(e) = cache.put(&key, &resp) {
                        log::warn!("cannot write cache entry {}: {e}", key.hex());
                    }
                }
                let rec = record(&resp);
                Ok((resp, rec))
            }
            Err(e) => {
                for (b, r) in self.budgets.iter().zip(held) {
                    b.release(r);
                }
                Err(e)
            }
        }
    }
}
