//! HTTP clients for the provider contracts.
//!
//! Wire formats:
//! - embeddings: `{"input": [...]}` -> `{"data": [{"embedding": [...]}, ...]}`
//! - chat: `{"messages": [{"role", "content"}, ...]}` ->
//!   `{"choices": [{"message": {"content": ...}}]}`
//! - log-probabilities: `{"context", "continuation"}` ->
//!   `{"tokens": [{"token", "logprob"}, ...]}`
//! - judging: a chat request whose reply contains `[[A]]`, `[[B]]` or `[[TIE]]`.
//!
//! A `model` field is added to every request body when configured.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::retry::{with_retries, Failure, RetryPolicy};
use super::{
    ChatMessage, ChatProvider, EmbeddingProvider, JudgeProvider, LogprobProvider, ProviderConfig,
    Role, Secret, TokenLogprob, Verdict,
};
use crate::error::{Error, Result};

pub const DEFAULT_JUDGE_TEMPLATE: &str = "请比较两个回答对下面问题的质量。\n\
问题：{prompt}\n\
参考答案：{reference}\n\
回答A：{first}\n\
回答B：{second}\n\
如果A更好输出[[A]]，如果B更好输出[[B]]，不相上下输出[[TIE]]。";

const JUDGE_SYSTEM: &str = "You are an impartial judge of answer quality.";

#[derive(Debug, Clone)]
struct Client {
    agent: ureq::Agent,
    endpoint: String,
    token: Secret,
    model: Option<String>,
    policy: RetryPolicy,
}

impl Client {
    fn new(cfg: &ProviderConfig) -> Result<Self> {
        let endpoint = cfg
            .endpoint
            .clone()
            .filter(|e| !e.is_empty())
            .ok_or_else(|| Error::config("http provider requires an endpoint"))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Client {
            agent,
            endpoint,
            token: cfg.auth_token.clone(),
            model: cfg.model.clone(),
            policy: RetryPolicy::from_config(cfg),
        })
    }

    fn post<T: DeserializeOwned>(&self, what: &str, mut body: Value) -> Result<T> {
        if let (Some(model), Some(obj)) = (&self.model, body.as_object_mut()) {
            obj.insert("model".into(), Value::String(model.clone()));
        }
        with_retries(&self.policy, what, || {
            let mut req = self.agent.post(&self.endpoint);
            if !self.token.is_empty() {
                req = req.header("Authorization", format!("Bearer {}", self.token.expose()));
            }
            let mut resp = req
                .send_json(&body)
                .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?;
            let status = resp.status().as_u16();
            if !(200..300).contains(&status) {
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                let err = Error::Provider(format!(
                    "{} returned HTTP {status}: {}",
                    self.endpoint,
                    text.chars().take(200).collect::<String>()
                ));
                let retryable = status == 408 || status == 429 || status >= 500;
                return Err(Failure {
                    error: err,
                    retryable,
                });
            }
            resp.body_mut().read_json::<T>().map_err(|e| {
                Failure::fatal(Error::Provider(format!(
                    "{}: malformed response: {e}",
                    self.endpoint
                )))
            })
        })
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: Client,
    batch_size: usize,
}

impl HttpEmbedder {
    pub fn new(cfg: &ProviderConfig) -> Result<Self> {
        Ok(HttpEmbedder {
            client: Client::new(cfg)?,
            batch_size: cfg.batch_size.max(1),
        })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let resp: EmbedResponse = self.client.post("embed", json!({ "input": texts }))?;
        if resp.data.len() != texts.len() {
            return Err(Error::Provider(format!(
                "embedding service returned {} vectors for {} inputs",
                resp.data.len(),
                texts.len()
            )));
        }
        Ok(resp.data.into_iter().map(|d| d.embedding).collect())
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

#[derive(Debug, Clone)]
pub struct HttpChat {
    client: Client,
}

impl HttpChat {
    pub fn new(cfg: &ProviderConfig) -> Result<Self> {
        Ok(HttpChat {
            client: Client::new(cfg)?,
        })
    }
}

impl ChatProvider for HttpChat {
    fn chat(&self, system: &str, messages: &[ChatMessage]) -> Result<String> {
        let mut all = Vec::with_capacity(messages.len() + 1);
        if !system.is_empty() {
            all.push(ChatMessage {
                role: Role::System,
                content: system.to_string(),
            });
        }
        all.extend_from_slice(messages);
        let resp: ChatResponse = self.client.post("chat", json!({ "messages": all }))?;
        resp.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Provider("chat service returned no choices".into()))
    }
}

#[derive(Deserialize)]
struct LogprobResponse {
    tokens: Vec<TokenLogprob>,
}

#[derive(Debug, Clone)]
pub struct HttpLogprobs {
    client: Client,
}

impl HttpLogprobs {
    pub fn new(cfg: &ProviderConfig) -> Result<Self> {
        Ok(HttpLogprobs {
            client: Client::new(cfg)?,
        })
    }
}

impl LogprobProvider for HttpLogprobs {
    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<Vec<TokenLogprob>> {
        let resp: LogprobResponse = self.client.post(
            "logprobs",
            json!({ "context": context, "continuation": continuation }),
        )?;
        Ok(resp.tokens)
    }
}

/// Reads a verdict tag from a judge reply.
pub fn parse_verdict(reply: &str) -> Option<Verdict> {
    let tags = [
        ("[[A]]", Verdict::First),
        ("[[B]]", Verdict::Second),
        ("[[TIE]]", Verdict::Tie),
    ];
    tags.iter()
        .filter_map(|(tag, v)| reply.find(tag).map(|pos| (pos, *v)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, v)| v)
}

#[derive(Debug, Clone)]
pub struct HttpJudge {
    chat: HttpChat,
    template: String,
}

impl HttpJudge {
    pub fn new(cfg: &ProviderConfig) -> Result<Self> {
        Ok(HttpJudge {
            chat: HttpChat::new(cfg)?,
            template: cfg
                .judge_template
                .clone()
                .unwrap_or_else(|| DEFAULT_JUDGE_TEMPLATE.to_string()),
        })
    }
}

impl JudgeProvider for HttpJudge {
    fn judge(
        &self,
        prompt: &str,
        first: &str,
        second: &str,
        reference: Option<&str>,
    ) -> Result<Verdict> {
        let text = self
            .template
            .replace("{prompt}", prompt)
            .replace("{reference}", reference.unwrap_or("（无）"))
            .replace("{first}", first)
            .replace("{second}", second);
        let reply = self.chat.chat(JUDGE_SYSTEM, &[ChatMessage::user(text)])?;
        parse_verdict(&reply).ok_or_else(|| {
            Error::Provider(format!(
                "judge reply has no verdict tag: {}",
                reply.chars().take(120).collect::<String>()
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_tags() {
        assert_eq!(parse_verdict("分析……[[B]]"), Some(Verdict::Second));
        assert_eq!(
            parse_verdict("[[TIE]] though [[A]] is close"),
            Some(Verdict::Tie)
        );
        assert_eq!(parse_verdict("no idea"), None);
    }
}
