//! Client contracts for the external model services (embeddings, token
//! log-probabilities, pairwise judging, chat completion).
//!
//! Every contract has an HTTP client speaking the common JSON conventions and
//! a deterministic stub, so whole pipelines run offline and reproducibly.

mod config;
mod http;
mod retry;
mod stub;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use config::{ProviderConfig, ProviderMode, ProvidersConfig, Secret, StubKind};
pub use http::{
    parse_verdict, HttpChat, HttpEmbedder, HttpJudge, HttpLogprobs, DEFAULT_JUDGE_TEMPLATE,
};
pub use retry::{backoff_delay, with_retries, Failure, RetryPolicy};
pub use stub::{
    char_trigrams, trigram_jaccard, BigramLm, EchoChat, ScriptedChat, StubEmbedder, StubJudge,
    StubLogprobs, BOS, STUB_EMBED_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Stable key of a chat request, used by scripted fixtures.
pub fn request_fingerprint(system: &str, messages: &[ChatMessage]) -> String {
    let canonical = serde_json::json!({ "system": system, "messages": messages });
    crate::hash::fingerprint(&canonical.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

pub trait EmbeddingProvider: Send + Sync {
    /// One vector per input text, in order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;

    fn batch_size(&self) -> usize {
        32
    }
}

pub trait LogprobProvider: Send + Sync {
    /// Per-token log-probabilities of `continuation` following `context`.
    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<Vec<TokenLogprob>>;

    /// Makes texts available to providers that learn from the run's data.
    /// Remote models ignore this.
    fn observe(&self, _texts: &[&str]) {}
}

pub trait JudgeProvider: Send + Sync {
    /// Which of two answers to `prompt` is better. `reference`, when known,
    /// is a ground-truth answer the judge may compare against.
    fn judge(
        &self,
        prompt: &str,
        first: &str,
        second: &str,
        reference: Option<&str>,
    ) -> Result<Verdict>;
}

pub trait ChatProvider: Send + Sync {
    fn chat(&self, system: &str, messages: &[ChatMessage]) -> Result<String>;
}

pub fn build_embedder(cfg: &ProviderConfig) -> Result<Box<dyn EmbeddingProvider>> {
    cfg.validate("embed")?;
    Ok(match cfg.mode {
        ProviderMode::Stub => Box::new(StubEmbedder::new(cfg.batch_size)),
        ProviderMode::Http => Box::new(HttpEmbedder::new(cfg)?),
    })
}

pub fn build_logprobs(cfg: &ProviderConfig) -> Result<Box<dyn LogprobProvider>> {
    cfg.validate("logprob")?;
    Ok(match cfg.mode {
        ProviderMode::Stub => Box::new(StubLogprobs::new()),
        ProviderMode::Http => Box::new(HttpLogprobs::new(cfg)?),
    })
}

pub fn build_judge(cfg: &ProviderConfig) -> Result<Box<dyn JudgeProvider>> {
    cfg.validate("judge")?;
    Ok(match cfg.mode {
        ProviderMode::Stub => Box::new(StubJudge),
        ProviderMode::Http => Box::new(HttpJudge::new(cfg)?),
    })
}

pub fn build_chat(cfg: &ProviderConfig) -> Result<Box<dyn ChatProvider>> {
    cfg.validate("chat")?;
    Ok(match cfg.mode {
        ProviderMode::Stub => match cfg.stub {
            StubKind::Echo => Box::new(EchoChat),
            StubKind::Scripted => {
                let path = cfg.fixture.as_deref().ok_or_else(|| {
                    crate::Error::config("scripted chat stub needs a `fixture` path")
                })?;
                Box::new(ScriptedChat::from_file(path)?)
            }
        },
        ProviderMode::Http => Box::new(HttpChat::new(cfg)?),
    })
}
