use std::time::Duration;

use super::ProviderConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl RetryPolicy {
    pub fn from_config(cfg: &ProviderConfig) -> Self {
        RetryPolicy {
            retries: cfg.retries,
            base: Duration::from_millis(cfg.backoff_base_ms),
            cap: Duration::from_millis(cfg.backoff_cap_ms),
        }
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy::from_config(&ProviderConfig::default())
    }
}

/// Delay before re-attempt number `attempt` (0-based): `base * 2^attempt`,
/// capped.
pub fn backoff_delay(policy: &RetryPolicy, attempt: u32) -> Duration {
    let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
    policy.base.saturating_mul(factor).min(policy.cap)
}

/// A failed attempt. Only retryable failures are re-attempted.
#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub retryable: bool,
}

impl Failure {
    pub fn fatal(error: Error) -> Self {
        Failure {
            error,
            retryable: false,
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            retryable: true,
        }
    }
}

/// Runs `op`, re-attempting exactly `policy.retries` times on retryable
/// failure.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    what: &str,
    mut op: impl FnMut() -> std::result::Result<T, Failure>,
) -> Result<T> {
    let mut attempt = 0;
    loop {
        match op() {
            Ok(v) => return Ok(v),
            Err(Failure {
                error,
                retryable: false,
            }) => return Err(error),
            Err(Failure { error: e, .. }) if attempt < policy.retries => {
                let delay = backoff_delay(policy, attempt);
                log::warn!(
                    "{what}: attempt {} failed ({e}); retrying in {delay:?}",
                    attempt + 1
                );
                std::thread::sleep(delay);
                attempt += 1;
            }
            Err(Failure { error: e, .. }) => {
                return Err(Error::Provider(format!(
                    "{what} failed after {} attempt(s): {e}",
                    attempt + 1
                )))
            }
        }
    }
}
