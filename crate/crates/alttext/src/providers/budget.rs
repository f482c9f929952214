use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ProviderError, Usage};

/// USD to integer micro-dollars, rounded up so estimates never undercount.
pub fn micro_usd(usd: f64) -> u64 {
    if usd <= 0.0 {
        0
    } else {
        (usd * 1e6).ceil() as u64
    }
}

/// Prices for one model. Token prices are per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPrice {
    pub input_per_mtok: f64,
    pub output_per_mtok: f64,
    pub per_request: f64,
    /// Tokens billed for an attached image.
    pub image_tokens: u64,
}

impl ModelPrice {
    pub fn cost_usd(&self, usage: Usage) -> f64 {
        self.per_request
            + usage.prompt_tokens as f64 * self.input_per_mtok / 1e6
            + usage.completion_tokens as f64 * self.output_per_mtok / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(pub BTreeMap<String, ModelPrice>);

impl PriceTable {
    /// Unknown models cost nothing; a warning is logged once per lookup.
    pub fn get(&self, model: &str) -> ModelPrice {
        match self.0.get(model) {
            Some(p) => *p,
            None => {
                log::warn!("no price for model {model}; counting it as free");
                ModelPrice::default()
            }
        }
    }
}

#[derive(Debug, Default)]
struct Ledger {
    spent: u64,
    reserved: u64,
}

/// Spend tracker in micro-USD. Calls reserve their worst-case cost before
/// going out and settle to the reported cost afterwards, so the total never
/// passes the limit even with calls in flight.
#[derive(Debug)]
pub struct Budget {
    limit: Option<u64>,
    ledger: Mutex<Ledger>,
}

impl Budget {
    pub fn new(limit_usd: Option<f64>) -> Self {
        Budget {
            limit: limit_usd.map(micro_usd),
            ledger: Mutex::new(Ledger::default()),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    pub fn limit_usd(&self) -> Option<f64> {
        self.limit.map(|m| m as f64 / 1e6)
    }

    pub fn spent_usd(&self) -> f64 {
        self.ledger.lock().expect("budget lock").spent as f64 / 1e6
    }

    pub fn spent_micro(&self) -> u64 {
        self.ledger.lock().expect("budget lock").spent
    }

    pub fn reserve(&self, estimate: u64) -> Result<u64, ProviderError> {
        let mut l = self.ledger.lock().expect("budget lock");
        if let Some(limit) = self.limit {
            let committed = l.spent + l.reserved;
            if committed + estimate > limit {
                return Err(ProviderError::BudgetExceeded {
                    needed_usd: estimate as f64 / 1e6,
                    left_usd: limit.saturating_sub(committed) as f64 / 1e6,
                });
            }
        }
        l.reserved += estimate;
        Ok(estimate)
    }

    /// Converts a reservation into spend. The charge is capped at the
    /// reservation so the limit holds even if a provider over-reports.
    pub fn settle(&self, reservation: u64, actual: u64) -> u64 {
        let charged = actual.min(reservation);
        if actual > reservation {
            log::warn!("reported cost {actual} exceeds estimate {reservation} micro-USD");
        }
        let mut l = self.ledger.lock().expect("budget lock");
        l.reserved -= reservation;
        l.spent += charged;
        charged
    }

    pub fn release(&self, reservation: u64) {
        self.ledger.lock().expect("budget lock").reserved -= reservation;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_past_limit() {
        let b = Budget::new(Some(0.000_010));
        let r = b.reserve(6).unwrap();
        assert!(b.reserve(6).is_err());
        b.settle(r, 4);
        let r2 = b.reserve(6).unwrap();
        b.settle(r2, 9);
        assert_eq!(b.spent_micro(), 10);
        assert!(b.reserve(1).is_err());
    }

    #[test]
    fn price_arithmetic() {
        let p = ModelPrice {
            input_per_mtok: 3.0,
            output_per_mtok: 6.0,
            per_request: 0.0,
            image_tokens: 0,
        };
        let c = p.cost_usd(Usage { prompt_tokens: 1_000_000, completion_tokens: 500_000 });
        assert!((c - 6.0).abs() < 1e-12);
        assert_eq!(micro_usd(0.0000011), 2);
    }
}
