//! Retry wrapper: retries rate limits and transport failures with doubling
//! backoff; everything else propagates immediately.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, Provider, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 500,
        }
    }
}

pub struct Retrying<P> {
    inner: P,
    policy: RetryPolicy,
    retries: AtomicU64,
}

/// Wraps a provider with a retry policy. `max_attempts = 1` behaves
/// identically to the unwrapped provider.
pub fn with_retry<P: Provider>(inner: P, policy: RetryPolicy) -> Retrying<P> {
    assert!(policy.max_attempts >= 1, "max_attempts must be >= 1");
    Retrying {
        inner,
        policy,
        retries: AtomicU64::new(0),
    }
}

impl<P> Retrying<P> {
    /// Total retries performed (attempts beyond the first, across all calls).
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Provider> Provider for Retrying<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let mut backoff_ms = self.policy.backoff_base_ms;
        let mut attempt = 1;
        loop {
            match self.inner.complete(request) {
                Ok(resp) => return Ok(resp),
                Err(err) if err.is_retryable() && attempt < self.policy.max_attempts => {
                    self.retries.fetch_add(1, Ordering::SeqCst);
                    if backoff_ms > 0 {
                        std::thread::sleep(Duration::from_millis(backoff_ms));
                    }
                    backoff_ms = backoff_ms.saturating_mul(2);
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
