use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_EMBED_URL: &str = "FINFORGE_EMBED_URL";
pub const ENV_LLM_URL: &str = "FINFORGE_LLM_URL";
pub const ENV_JUDGE_URL: &str = "FINFORGE_JUDGE_URL";
pub const ENV_API_TOKEN: &str = "FINFORGE_API_TOKEN";

/// A credential that never appears in `Debug` output or serialized configs.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_empty() { "\"\"" } else { "\"***\"" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Http,
    #[default]
    Stub,
}

impl std::str::FromStr for ProviderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "http" => Ok(ProviderMode::Http),
            "stub" => Ok(ProviderMode::Stub),
            other => Err(Error::config(format!(
                "unknown provider mode `{other}` (http|stub)"
            ))),
        }
    }
}

/// Which offline behaviour a stubbed chat provider has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StubKind {
    /// Replies with the last user message.
    #[default]
    Echo,
    /// Replies from a fixture file keyed by request fingerprint.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub endpoint: Option<String>,
    #[serde(skip)]
    pub auth_token: Secret,
    pub model: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    pub batch_size: usize,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub stub: StubKind,
    pub fixture: Option<PathBuf>,
    /// Judging prompt; `{prompt}`, `{first}` and `{second}` are substituted.
    pub judge_template: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::Stub,
            endpoint: None,
            auth_token: Secret::default(),
            model: None,
            timeout_secs: 60,
            retries: 3,
            batch_size: 32,
            backoff_base_ms: 250,
            backoff_cap_ms: 8_000,
            stub: StubKind::Echo,
            fixture: None,
            judge_template: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self, service: &str) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config(format!(
                "providers.{service}: batch_size must be >= 1"
            )));
        }
        if self.mode == ProviderMode::Http && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::config(format!(
                "providers.{service}: http mode requires an endpoint"
            )));
        }
        Ok(())
    }
}

/// The `[providers]` config section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub embed: ProviderConfig,
    pub logprob: ProviderConfig,
    pub judge: ProviderConfig,
    pub chat: ProviderConfig,
}

impl ProvidersConfig {
    /// Fills endpoints and the API token from `FINFORGE_*` environment
    /// variables. Endpoints already set in the config win.
    pub fn apply_env(&mut self) {
        self.apply_env_from(|k| std::env::var(k).ok());
    }

    pub fn apply_env_from(&mut self, get: impl Fn(&str) -> Option<String>) {
        let fill = |slot: &mut Option<String>, key: &str| {
            if slot.is_none() {
                *slot = get(key).filter(|v| !v.is_empty());
            }
        };
        fill(&mut self.embed.endpoint, ENV_EMBED_URL);
        fill(&mut self.logprob.endpoint, ENV_LLM_URL);
        fill(&mut self.chat.endpoint, ENV_LLM_URL);
        fill(&mut self.judge.endpoint, ENV_JUDGE_URL);
        if let Some(token) = get(ENV_API_TOKEN) {
            for p in [
                &mut self.embed,
                &mut self.logprob,
                &mut self.judge,
                &mut self.chat,
            ] {
                p.auth_token = Secret::new(token.clone());
            }
        }
    }

    /// Switches every service to the given mode.
    pub fn set_mode(&mut self, mode: ProviderMode) {
        for p in [
            &mut self.embed,
            &mut self.logprob,
            &mut self.judge,
            &mut self.chat,
        ] {
            p.mode = mode;
        }
    }
}
