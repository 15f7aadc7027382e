//! Pre-training corpus preparation: normalization, balanced chunking and
//! rule-based cleaning of plain-text documents.

mod chunk;
mod clean;
mod normalize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk_documents, token_estimate, ChunkConfig, DEFAULT_MAX_LENGTH, MIN_MAX_LENGTH};
pub use clean::{apply_clean_rules, PatternRule, PrivacyAction, RuleSet, RulesConfig};
pub use normalize::{normalize_document, normalize_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    FinanceNews,
    Paper,
    Report,
    Policy,
    Law,
    GeneralZh,
    GeneralEn,
}

impl Source {
    pub fn is_domain(self) -> bool {
        !matches!(self, Source::GeneralZh | Source::GeneralEn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub source: Source,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub doc_ids: Vec<String>,
    pub text: String,
    pub char_len: usize,
    pub token_estimate: usize,
}

impl Chunk {
    pub fn new(id: String, doc_ids: Vec<String>, text: String) -> Self {
        let char_len = text.chars().count();
        Chunk {
            id,
            doc_ids,
            text,
            char_len,
            token_estimate: token_estimate(char_len),
        }
    }

    /// Replaces the text and recomputes the derived length fields.
    pub fn set_text(&mut self, text: String) {
        self.char_len = text.chars().count();
        self.token_estimate = token_estimate(self.char_len);
        self.text = text;
    }
}

/// Outcome counts of a filtering pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped: usize,
    pub reasons: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub redacted: BTreeMap<String, usize>,
}

impl CleanReport {
    pub fn drop(&mut self, reason: &str) {
        self.dropped += 1;
        *self.reasons.entry(reason.to_owned()).or_default() += 1;
    }
}
