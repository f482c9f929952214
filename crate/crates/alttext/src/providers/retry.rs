use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ProviderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1` (1-based `attempt`): the base
    /// doubled per failure, capped at one minute.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(16);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor).min(60_000))
    }
}

/// Runs `op` until it succeeds, fails permanently, or `max_attempts` is
/// used up. Transient failures that exhaust the attempts become
/// `ProviderUnavailable`.
pub fn retry<T>(
    policy: &RetryPolicy,
    kind: &'static str,
    sleep: &dyn Fn(Duration),
    mut op: impl FnMut(u32) -> Result<T, ProviderError>,
) -> Result<T, ProviderError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = None;
    for attempt in 1..=attempts {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() => {
                log::warn!("{kind} attempt {attempt}/{attempts} failed: {e}");
                last = Some(e);
                if attempt < attempts {
                    sleep(policy.backoff(attempt));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let reason = match last {
        Some(ProviderError::ProviderUnavailable { reason, .. }) => reason,
        Some(e) => e.to_string(),
        None => "no attempt made".to_string(),
    };
    Err(ProviderError::ProviderUnavailable {
        kind,
        reason: format!("gave up after {attempts} attempts: {reason}"),
    })
}
