//! Token and cost accounting.
//!
//! Prices are user configuration (USD per one million tokens, per model);
//! unknown models cost zero. The ledger is a single-writer-serialized
//! accumulator: updates appear atomic to observers.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, Provider, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub prompt_usd_per_million: f64,
    pub completion_usd_per_million: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceTable(pub BTreeMap<String, ModelPrice>);

impl PriceTable {
    pub fn cost_of(&self, model: &str, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        match self.0.get(model) {
            Some(price) => {
                prompt_tokens as f64 * price.prompt_usd_per_million / 1_000_000.0
                    + completion_tokens as f64 * price.completion_usd_per_million / 1_000_000.0
            }
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub calls: u64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub per_model: BTreeMap<String, ModelUsage>,
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub total_cost_usd: f64,
}

#[derive(Default)]
struct LedgerState {
    per_model: BTreeMap<String, ModelUsage>,
    total_cost_usd: f64,
}

pub struct UsageLedger {
    prices: PriceTable,
    state: Mutex<LedgerState>,
}

impl UsageLedger {
    pub fn new(prices: PriceTable) -> Self {
        UsageLedger {
            prices,
            state: Mutex::new(LedgerState::default()),
        }
    }

    /// Adds one response's usage and returns the cost it contributed.
    pub fn record(&self, model: &str, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        let cost = self.prices.cost_of(model, prompt_tokens, completion_tokens);
        let mut state = self.state.lock().unwrap();
        let usage = state.per_model.entry(model.to_string()).or_default();
        usage.prompt_tokens += prompt_tokens;
        usage.completion_tokens += completion_tokens;
        usage.calls += 1;
        usage.cost_usd += cost;
        state.total_cost_usd += cost;
        cost
    }

    pub fn total_cost_usd(&self) -> f64 {
        self.state.lock().unwrap().total_cost_usd
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let state = self.state.lock().unwrap();
        let mut snap = LedgerSnapshot {
            per_model: state.per_model.clone(),
            total_cost_usd: state.total_cost_usd,
            ..LedgerSnapshot::default()
        };
        for usage in state.per_model.values() {
            snap.total_prompt_tokens += usage.prompt_tokens;
            snap.total_completion_tokens += usage.completion_tokens;
        }
        snap
    }
}

/// Hook for mirroring every accounted response somewhere else (the run log).
pub trait UsageObserver: Send + Sync {
    fn on_response(&self, model: &str, response: &ChatResponse, cost_usd: f64);
}

/// Cost-accounting wrapper. Placed outermost so the ledger sees exactly
/// the responses the engine sees.
pub struct Metered<P> {
    inner: P,
    ledger: Arc<UsageLedger>,
    observer: Option<Arc<dyn UsageObserver>>,
}

impl<P: Provider> Metered<P> {
    pub fn new(inner: P, ledger: Arc<UsageLedger>) -> Self {
        Metered {
            inner,
            ledger,
            observer: None,
        }
    }

    pub fn with_observer(mut self, observer: Arc<dyn UsageObserver>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn ledger(&self) -> &Arc<UsageLedger> {
        &self.ledger
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Provider> Provider for Metered<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let response = self.inner.complete(request)?;
        let cost = self.ledger.record(
            &request.model,
            response.prompt_tokens,
            response.completion_tokens,
        );
        if let Some(observer) = &self.observer {
            observer.on_response(&request.model, &response, cost);
        }
        Ok(response)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{ChatMessage, Matcher, ScriptEntry, ScriptedProvider};

    fn prices() -> PriceTable {
        let mut table = BTreeMap::new();
        table.insert(
            "m".to_string(),
            ModelPrice {
                prompt_usd_per_million: 0.15,
                completion_usd_per_million: 0.60,
            },
        );
        PriceTable(table)
    }

    #[test]
    fn thousand_prompt_tokens_cost_fifteen_hundredths_of_a_cent() {
        let ledger = UsageLedger::new(prices());
        let cost = ledger.record("m", 1_000, 0);
        assert!((cost - 0.00015).abs() < 1e-12);
        assert!((ledger.total_cost_usd() - 0.00015).abs() < 1e-12);
    }

    #[test]
    fn cost_is_nondecreasing_and_totals_match() {
        let ledger = UsageLedger::new(prices());
        let mut last = 0.0;
        for i in 0..10 {
            ledger.record("m", i * 100, i * 10);
            let now = ledger.total_cost_usd();
            assert!(now >= last);
            last = now;
        }
        let snap = ledger.snapshot();
        assert_eq!(
            snap.total_prompt_tokens,
            (0..10).map(|i| i * 100).sum::<u64>()
        );
        assert_eq!(
            snap.total_completion_tokens,
            (0..10).map(|i| i * 10).sum::<u64>()
        );
    }

    #[test]
    fn unknown_model_costs_zero() {
        let ledger = UsageLedger::new(prices());
        assert_eq!(ledger.record("other", 1_000_000, 1_000_000), 0.0);
    }

    #[test]
    fn metered_provider_updates_ledger_per_call() {
        let scripted = ScriptedProvider::new(vec![ScriptEntry {
            matcher: Matcher::Any,
            outcome: crate::provider::ScriptedOutcome::Respond {
                response: "hi".into(),
                prompt_tokens: Some(1_000),
                completion_tokens: Some(500),
            },
        }]);
        let ledger = Arc::new(UsageLedger::new(prices()));
        let p = Metered::new(scripted, Arc::clone(&ledger));
        let req = ChatRequest::new("m", vec![ChatMessage::user("hello")]);
        p.complete(&req).unwrap();
        let snap = ledger.snapshot();
        assert_eq!(snap.total_prompt_tokens, 1_000);
        assert_eq!(snap.total_completion_tokens, 500);
        let expected = 1_000.0 * 0.15 / 1e6 + 500.0 * 0.60 / 1e6;
        assert!((snap.total_cost_usd - expected).abs() < 1e-12);
    }
}
