use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use alttext::manifest::redact;
use alttext::providers::{
    generate_alttext, Backend, Budget, CacheKey, CountingTransport, Fixtures, HttpBackend,
    MockBackend, ModelPrice, ProviderClient, ProviderConfig, ProviderError, ProviderKind,
    Response, ResponseCache, RetryPolicy, Transport, TransportError, Usage,
};
use proptest::prelude::*;
use serde_json::{json, Value};

fn chat_config(max_in_flight: usize) -> ProviderConfig {
    let mut c = ProviderConfig::new(ProviderKind::ChatLlm, "mock://", "mock");
    c.max_in_flight = max_in_flight;
    c.retry = RetryPolicy {
        max_attempts: 3,
        base_backoff_ms: 1,
    };
    c
}

fn chat(prompt: &str) -> Value {
    json!({ "messages": [{ "role": "user", "content": prompt }], "max_tokens": 32 })
}

fn client(cfg: ProviderConfig, backend: Arc<dyn Backend>, price: ModelPrice, budget: Option<Arc<Budget>>) -> ProviderClient {
    ProviderClient::new(cfg, backend, None, price, budget).with_sleeper(|_| {})
}

#[test]
fn transient_failures_are_retried() {
    let mock = Arc::new(MockBackend::new(Arc::new(Fixtures::default())).failing_first(2));
    let c = client(chat_config(1), mock.clone(), ModelPrice::default(), None);
    let (resp, _) = c.request(&chat("hello")).unwrap();
    assert!(resp.body.to_string().contains("mock alt text"));
    assert_eq!(mock.calls(), 3);
    assert_eq!(c.attempts(), 3);

    let mock = Arc::new(MockBackend::new(Arc::new(Fixtures::default())).failing_first(3));
    let c = client(chat_config(1), mock.clone(), ModelPrice::default(), None);
    let e = c.request(&chat("hello")).unwrap_err();
    assert!(matches!(e, ProviderError::ProviderUnavailable { .. }));
    assert_eq!(mock.calls(), 3);
}

#[test]
fn failed_calls_cost_nothing() {
    let mock = Arc::new(MockBackend::new(Arc::new(Fixtures::default())).failing_first(3));
    let budget = Arc::new(Budget::new(Some(1.0)));
    let price = ModelPrice {
        per_request: 0.25,
        ..Default::default()
    };
    let c = client(chat_config(1), mock, price, Some(budget.clone()));
    assert!(c.request(&chat("x")).is_err());
    assert_eq!(budget.spent_micro(), 0);
    c.request(&chat("x")).unwrap();
    assert_eq!(budget.spent_micro(), 250_000);
}

#[test]
fn saturated_limiter_reaches_but_never_passes_its_bound() {
    let mock = Arc::new(MockBackend::new(Arc::new(Fixtures::default())).with_delay(Duration::from_millis(20)));
    let c = client(chat_config(3), mock.clone(), ModelPrice::default(), None);
    std::thread::scope(|s| {
        for i in 0..12 {
            let c = &c;
            s.spawn(move || c.request(&chat(&format!("p{i}"))).unwrap());
        }
    });
    assert_eq!(mock.peak_concurrency(), 3);
    assert_eq!(c.limiter().peak(), 3);
}

#[test]
fn mock_answers_are_deterministic() {
    let a = MockBackend::new(Arc::new(Fixtures::default()));
    let b = MockBackend::new(Arc::new(Fixtures::default()));
    for p in ["one", "two", "three"] {
        let x = a.call(ProviderKind::ChatLlm, "m", &chat(p)).unwrap();
        let y = b.call(ProviderKind::ChatLlm, "m", &chat(p)).unwrap();
        assert_eq!(x.body, y.body);
        assert_eq!(x.usage, y.usage);
    }
}

/// Answers every call and remembers the bearer tokens it saw.
#[derive(Default)]
struct Recorder {
    bearers: Mutex<Vec<Option<String>>>,
}

impl Transport for Recorder {
    fn post_json(&self, _url: &str, bearer: Option<&str>, _body: &Value) -> Result<(u16, String), TransportError> {
        self.bearers.lock().unwrap().push(bearer.map(str::to_string));
        let reply = json!({
            "choices": [{ "message": { "content": "\"Open settings.\"" } }],
            "usage": { "prompt_tokens": 10, "completion_tokens": 3 }
        });
        Ok((200, reply.to_string()))
    }
}

#[test]
fn api_key_is_sent_but_never_shown() {
    let secret = "sk-test-0123456789";
    let rec = Arc::new(Recorder::default());
    let counted = Arc::new(CountingTransport::wrapping(rec.clone()));
    let backend = HttpBackend::new("https://example.invalid/v1/chat", Some(secret.into()), counted.clone());
    assert!(!format!("{backend:?}").contains(secret));
    let c = client(chat_config(1), Arc::new(backend), ModelPrice::default(), None);
    let alt = generate_alttext(&c, &alttext_core::build_prompt("gear", "{}").unwrap()).unwrap();
    assert_eq!(alt.text, "Open settings");
    assert_eq!(counted.calls(), 1);
    assert_eq!(rec.bearers.lock().unwrap()[0].as_deref(), Some(secret));
    let logged = serde_json::to_string(&alt.record).unwrap();
    assert!(!logged.contains(secret));
}

#[test]
fn http_status_classes() {
    struct Fixed(u16, &'static str);
    impl Transport for Fixed {
        fn post_json(&self, _: &str, _: Option<&str>, _: &Value) -> Result<(u16, String), TransportError> {
            Ok((self.0, self.1.to_string()))
        }
    }
    let call = |status, body| {
        HttpBackend::new("u", None, Arc::new(Fixed(status, body))).call(ProviderKind::ChatLlm, "m", &json!({}))
    };
    assert!(call(429, "").unwrap_err().is_transient());
    assert!(call(503, "").unwrap_err().is_transient());
    assert!(!call(400, "bad").unwrap_err().is_transient());
    assert!(call(200, "  ").unwrap_err().is_transient());
    assert!(matches!(call(200, "{"), Err(ProviderError::BadResponse { .. })));
    assert!(call(200, "{}").is_ok());
}

#[test]
fn large_payloads_are_redacted() {
    let v = json!({ "image_base64": "AAAA", "note": "short", "url": "data:image/png;base64,AAAA" });
    let r = redact(&v);
    assert!(r["image_base64"].as_str().unwrap().starts_with("sha256:"));
    assert!(r["url"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(r["note"], "short");
}

/// Reports a usage derived from the prompt text, at times above the
/// client's own estimate.
struct Overreporting;

impl Backend for Overreporting {
    fn call(&self, _: ProviderKind, _: &str, payload: &Value) -> Result<Response, ProviderError> {
        let n = payload.to_string().len() as u64;
        Ok(Response {
            body: json!({ "choices": [{ "message": { "content": "ok" } }] }),
            usage: Some(Usage {
                prompt_tokens: n * (n % 3),
                completion_tokens: n % 50,
            }),
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn in_flight_never_exceeds_limit(limit in 1usize..5, threads in 1usize..8, calls in 1usize..4) {
        let mock = Arc::new(
            MockBackend::new(Arc::new(Fixtures::default())).with_delay(Duration::from_micros(50)),
        );
        let c = client(chat_config(limit), mock.clone(), ModelPrice::default(), None);
        std::thread::scope(|s| {
            for t in 0..threads {
                let c = &c;
                s.spawn(move || {
                    for k in 0..calls {
                        c.request(&chat(&format!("{t}-{k}"))).unwrap();
                    }
                });
            }
        });
        prop_assert!(mock.peak_concurrency() <= limit);
        prop_assert!(c.limiter().peak() <= limit);
        prop_assert_eq!(c.limiter().current(), 0);
        prop_assert_eq!(mock.calls(), threads * calls);
    }

    #[test]
    fn spend_never_exceeds_budget(
        limit_cents in 0u32..200,
        per_request_milli in 0u32..80,
        input_per_mtok in 0.0f64..400.0,
        prompts in proptest::collection::vec("[a-z ]{0,40}", 1..24),
        threads in 1usize..4,
    ) {
        let limit = f64::from(limit_cents) / 100.0;
        let budget = Arc::new(Budget::new(Some(limit)));
        let price = ModelPrice {
            input_per_mtok,
            output_per_mtok: 2.0 * input_per_mtok,
            per_request: f64::from(per_request_milli) / 1000.0,
            image_tokens: 0,
        };
        let mut cfg = chat_config(2);
        cfg.budget_usd = Some(limit * 2.0);
        let c = client(cfg, Arc::new(Overreporting), price, Some(budget.clone()));
        let refused = AtomicUsize::new(0);
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(p) = prompts.get(i) else { break };
                    match c.request(&chat(p)) {
                        Ok(_) => {}
                        Err(ProviderError::BudgetExceeded { .. }) => {
                            refused.fetch_add(1, Ordering::SeqCst);
                        }
                        Err(e) => panic!("{e}"),
                    }
                });
            }
        });
        let limit_micro = (limit * 1e6).ceil() as u64;
        prop_assert!(budget.spent_micro() <= limit_micro);
        prop_assert!(c.charged_usd() <= limit + 1e-9);
        prop_assert_eq!(c.attempts() + refused.load(Ordering::SeqCst), prompts.len());
    }

    #[test]
    fn cache_is_idempotent(
        prompts in proptest::collection::vec("[a-z]{0,12}", 1..6),
        replies in proptest::collection::vec("[a-z ]{1,12}", 2),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        for p in &prompts {
            let key = CacheKey::new(ProviderKind::ChatLlm, "m", &chat(p));
            let same = CacheKey::new(ProviderKind::ChatLlm, "m", &chat(p));
            let other = CacheKey::new(ProviderKind::VisionLabeler, "m", &chat(p));
            prop_assert_eq!(key.hex(), same.hex());
            prop_assert_ne!(key.hex(), other.hex());
            let first = Response { body: json!({ "text": replies[0] }), usage: None };
            let second = Response { body: json!({ "text": replies[1] }), usage: None };
            cache.put(&key, &first).unwrap();
            let got = cache.get(&key).unwrap();
            cache.put(&key, &second).unwrap();
            // the first write wins and reads are stable
            prop_assert_eq!(&cache.get(&key).unwrap().body, &got.body);
            prop_assert_eq!(&cache.get(&key).unwrap().body, &first.body);
        }

        // a cached client answers without touching the backend
        let mock = Arc::new(MockBackend::new(Arc::new(Fixtures::default())));
        let c = ProviderClient::new(chat_config(1), mock.clone(), Some(ResponseCache::new(dir.path().join("c"))), ModelPrice::default(), None);
        let a = c.request(&chat(&prompts[0])).unwrap();
        let b = c.request(&chat(&prompts[0])).unwrap();
        prop_assert_eq!(a.0.body, b.0.body);
        prop_assert_eq!(a.1, b.1);
        prop_assert_eq!(mock.calls(), 1);
        prop_assert_eq!(c.cache_hits(), 1);
    }
}
