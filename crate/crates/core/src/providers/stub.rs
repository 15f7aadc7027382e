//! Deterministic offline providers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::RwLock;

use serde::Deserialize;

use super::{
    request_fingerprint, ChatMessage, ChatProvider, EmbeddingProvider, JudgeProvider,
    LogprobProvider, Role, TokenLogprob, Verdict,
};
use crate::error::{Error, Result};
use crate::hash::HashAlgo;

pub const STUB_EMBED_DIM: usize = 256;

/// Start-of-sequence marker used by [`BigramLm`].
pub const BOS: char = '\u{2}';

/// Character n-grams of `text`; texts shorter than three characters form a
/// single gram.
pub fn char_trigrams(text: &str) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < 3 {
        return if chars.is_empty() {
            HashSet::new()
        } else {
            HashSet::from([text.to_string()])
        };
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Jaccard similarity of the character trigram sets. Two empty texts score 1.
pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    let (sa, sb) = (char_trigrams(a), char_trigrams(b));
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    inter as f64 / (sa.len() + sb.len() - inter) as f64
}

/// Signed feature hashing of character trigrams into 256 dimensions,
/// L2-normalised. Near-duplicate texts get high cosine similarity.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    batch_size: usize,
}

impl StubEmbedder {
    pub fn new(batch_size: usize) -> Self {
        StubEmbedder {
            batch_size: batch_size.max(1),
        }
    }

    pub fn embed_one(text: &str) -> Option<Vec<f64>> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            return None;
        }
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        if chars.len() < 3 {
            counts.insert(chars.iter().collect(), 1.0);
        } else {
            for w in chars.windows(3) {
                *counts.entry(w.iter().collect()).or_default() += 1.0;
            }
        }
        let mut v = vec![0.0; STUB_EMBED_DIM];
        for (gram, n) in counts {
            let h = HashAlgo::Fnv1aSplitMix.hash_str(&gram);
            let idx = (h % STUB_EMBED_DIM as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign * n;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Every feature cancelled out; fall back to a fixed axis.
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Some(v)
    }
}

impl Default for StubEmbedder {
    fn default() -> Self {
        StubEmbedder::new(32)
    }
}

impl EmbeddingProvider for StubEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                StubEmbedder::embed_one(t)
                    .ok_or_else(|| Error::data(format!("cannot embed empty text at index {i}")))
            })
            .collect()
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }
}

#[derive(Debug, Default)]
struct BigramState {
    pairs: HashMap<(char, char), u64>,
    contexts: HashMap<char, u64>,
    vocab: HashSet<char>,
    frozen: bool,
}

/// Character bigram language model with add-one smoothing.
///
/// `P(c | prev) = (count(prev, c) + 1) / (count(prev) + V)` where `V` is the
/// number of distinct observed characters plus one for unseen ones. The model
/// trains on [`observe`](BigramLm::observe) calls and freezes at the first
/// scoring call, so every score in a run comes from the same counts.
#[derive(Debug, Default)]
pub struct BigramLm {
    state: RwLock<BigramState>,
}

impl BigramLm {
    pub fn new() -> Self {
        BigramLm::default()
    }

    pub fn observe(&self, texts: &[&str]) {
        let mut st = self.state.write().expect("bigram lock poisoned");
        if st.frozen {
            log::warn!(
                "bigram stub is frozen; ignoring {} observed text(s)",
                texts.len()
            );
            return;
        }
        for t in texts {
            let mut prev = BOS;
            for c in t.chars() {
                *st.pairs.entry((prev, c)).or_default() += 1;
                *st.contexts.entry(prev).or_default() += 1;
                st.vocab.insert(c);
                prev = c;
            }
        }
    }

    /// Log-probability of each character of `continuation` given the last
    /// character of `context` (or [`BOS`] when `context` is empty).
    pub fn score(&self, context: &str, continuation: &str) -> Vec<TokenLogprob> {
        {
            let mut st = self.state.write().expect("bigram lock poisoned");
            st.frozen = true;
        }
        let st = self.state.read().expect("bigram lock poisoned");
        let v = st.vocab.len() as f64 + 1.0;
        let mut prev = context.chars().last().unwrap_or(BOS);
        continuation
            .chars()
            .map(|c| {
                let num = st.pairs.get(&(prev, c)).copied().unwrap_or(0) as f64 + 1.0;
                let den = st.contexts.get(&prev).copied().unwrap_or(0) as f64 + v;
                prev = c;
                TokenLogprob {
                    token: c.to_string(),
                    logprob: (num / den).ln(),
                }
            })
            .collect()
    }
}

/// [`LogprobProvider`] backed by a [`BigramLm`].
#[derive(Debug, Default)]
pub struct StubLogprobs {
    lm: BigramLm,
}

impl StubLogprobs {
    pub fn new() -> Self {
        StubLogprobs::default()
    }
}

impl LogprobProvider for StubLogprobs {
    fn token_logprobs(&self, context: &str, continuation: &str) -> Result<Vec<TokenLogprob>> {
        if continuation.is_empty() {
            return Err(Error::data("cannot score an empty continuation"));
        }
        Ok(self.lm.score(context, continuation))
    }

    fn observe(&self, texts: &[&str]) {
        self.lm.observe(texts);
    }
}

/// Prefers the answer with higher trigram Jaccard similarity to the
/// reference. Without a reference, or on equal similarity, it declares a tie.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubJudge;

impl JudgeProvider for StubJudge {
    fn judge(
        &self,
        _prompt: &str,
        first: &str,
        second: &str,
        reference: Option<&str>,
    ) -> Result<Verdict> {
        let Some(reference) = reference else {
            return Ok(Verdict::Tie);
        };
        let a = trigram_jaccard(first, reference);
        let b = trigram_jaccard(second, reference);
        Ok(if (a - b).abs() <= 1e-12 {
            Verdict::Tie
        } else if a > b {
            Verdict::First
        } else {
            Verdict::Second
        })
    }
}

/// Replies with the content of the last user message.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoChat;

impl ChatProvider for EchoChat {
    fn chat(&self, _system: &str, messages: &[ChatMessage]) -> Result<String> {
        Ok(messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.clone())
            .unwrap_or_default())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Fixture {
    Keyed(BTreeMap<String, String>),
    Listed(Vec<ScriptEntry>),
}

#[derive(Deserialize)]
struct ScriptEntry {
    #[serde(default)]
    system: String,
    messages: Vec<ChatMessage>,
    reply: String,
}

/// Replays recorded replies keyed by [`request_fingerprint`].
#[derive(Debug, Clone, Default)]
pub struct ScriptedChat {
    replies: BTreeMap<String, String>,
}

impl ScriptedChat {
    pub fn new(replies: BTreeMap<String, String>) -> Self {
        ScriptedChat { replies }
    }

    /// Loads either a JSON object `{fingerprint: reply}` or a JSON array of
    /// `{system, messages, reply}` entries.
    pub fn from_file(path: &Path) -> Result<Self> {
        let fixture: Fixture = crate::jsonl::read_json(path)?;
        let replies = match fixture {
            Fixture::Keyed(m) => m,
            Fixture::Listed(entries) => entries
                .into_iter()
                .map(|e| (request_fingerprint(&e.system, &e.messages), e.reply))
                .collect(),
        };
        Ok(ScriptedChat { replies })
    }

    pub fn insert(&mut self, system: &str, messages: &[ChatMessage], reply: impl Into<String>) {
        self.replies
            .insert(request_fingerprint(system, messages), reply.into());
    }
}

impl ChatProvider for ScriptedChat {
    fn chat(&self, system: &str, messages: &[ChatMessage]) -> Result<String> {
        let key = request_fingerprint(system, messages);
        self.replies
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::Provider(format!("scripted chat has no reply for request {key}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn embedder_is_normalised_and_deterministic() {
        let e = StubEmbedder::default();
        let texts = vec![
            "央行宣布下调存款准备金率0.5个百分点".to_string(),
            "央行宣布下调存款准备金率0.5个百分点。".to_string(),
            "今天天气晴朗适合出游".to_string(),
        ];
        let v = e.embed(&texts).unwrap();
        assert_eq!(v.len(), 3);
        for x in &v {
            assert_eq!(x.len(), STUB_EMBED_DIM);
            assert!((cosine(x, x) - 1.0).abs() < 1e-12);
        }
        assert!(cosine(&v[0], &v[1]) > 0.9);
        assert!(cosine(&v[0], &v[2]) < 0.5);
        assert_eq!(v, e.embed(&texts).unwrap());
    }

    #[test]
    fn embedder_rejects_empty_by_index() {
        let err = StubEmbedder::default()
            .embed(&["ok".into(), "  ".into()])
            .unwrap_err();
        assert!(err.to_string().contains("index 1"));
    }

    #[test]
    fn bigram_laplace() {
        let lm = BigramLm::new();
        lm.observe(&["aa"]);
        let s = lm.score("", "a");
        assert!((s[0].logprob - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        // After (a, a) once: count(a)=1, V=2 -> P(a|a) = 2/3, P(b|a) = 1/3.
        let s = lm.score("a", "ab");
        assert!((s[0].logprob - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((s[1].logprob - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        // Frozen: further observations change nothing.
        lm.observe(&["bbbb"]);
        assert_eq!(lm.score("a", "ab"), s);
    }

    #[test]
    fn judge_prefers_reference_overlap() {
        let j = StubJudge;
        let r = "利率上升会压低债券价格";
        assert_eq!(
            j.judge("q", "利率上升会压低债券价格", "不知道", Some(r))
                .unwrap(),
            Verdict::First
        );
        assert_eq!(
            j.judge("q", "不知道", "利率上升压低债券价格", Some(r))
                .unwrap(),
            Verdict::Second
        );
        assert_eq!(j.judge("q", "x", "y", None).unwrap(), Verdict::Tie);
        assert_eq!(j.judge("q", "same", "same", Some(r)).unwrap(), Verdict::Tie);
    }

    #[test]
    fn scripted_chat_by_fingerprint() {
        let mut chat = ScriptedChat::default();
        let msgs = vec![ChatMessage::user("1+1?")];
        chat.insert("sys", &msgs, "2");
        assert_eq!(chat.chat("sys", &msgs).unwrap(), "2");
        let err = chat.chat("other", &msgs).unwrap_err().to_string();
        assert!(err.contains(&request_fingerprint("other", &msgs)));
        assert_eq!(EchoChat.chat("", &msgs).unwrap(), "1+1?");
    }
}
