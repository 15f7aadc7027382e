use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Chunk, CleanReport};
use crate::error::{Error, Result};

const REDACTION: &str = "[REDACTED]";

const ID_PATTERN: &str = r"(?:^|[^0-9])([1-9][0-9]{5}(?:18|19|20)[0-9]{2}(?:0[1-9]|1[0-2])(?:0[1-9]|[12][0-9]|3[01])[0-9]{3}[0-9Xx])(?:[^0-9]|$)";
const MOBILE_PATTERN: &str = r"(?:^|[^0-9])(1[3-9][0-9]{9})(?:[^0-9]|$)";
const EMAIL_PATTERN: &str = r"([A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,})";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyAction {
    #[default]
    Drop,
    Redact,
}

/// A named drop rule. The first capture group, when present, is the span
/// that gets redacted; otherwise the whole match is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRule {
    pub name: String,
    pub pattern: String,
}

/// Serialized form of the cleaning rules (the `[clean]` config section).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesConfig {
    pub privacy: bool,
    pub privacy_action: PrivacyAction,
    pub sensitive_terms: Vec<String>,
    /// One term per line; merged with `sensitive_terms`.
    pub sensitive_terms_file: Option<PathBuf>,
    pub patterns: Vec<PatternRule>,
    pub min_content_ratio: f64,
    pub repeat_ngram: usize,
    pub repeat_max: usize,
}

impl Default for RulesConfig {
    fn default() -> Self {
        RulesConfig {
            privacy: true,
            privacy_action: PrivacyAction::Drop,
            sensitive_terms: Vec::new(),
            sensitive_terms_file: None,
            patterns: Vec::new(),
            min_content_ratio: 0.3,
            repeat_ngram: 10,
            repeat_max: 5,
        }
    }
}

struct RegexRule {
    name: String,
    regex: Regex,
}

impl RegexRule {
    fn new(name: &str, pattern: &str) -> Result<Self> {
        let regex = Regex::new(pattern).map_err(|e| Error::Rule {
            rule: name.to_owned(),
            reason: e.to_string(),
        })?;
        Ok(RegexRule {
            name: name.to_owned(),
            regex,
        })
    }

    fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }

    /// Replaces every target span. Searching resumes at the end of the
    /// target rather than the end of the match so a delimiter shared by two
    /// adjacent hits is not consumed by the first.
    fn redact(&self, text: &str) -> (String, usize) {
        let mut out = String::with_capacity(text.len());
        let mut copied = 0;
        let mut pos = 0;
        let mut hits = 0;
        while pos <= text.len() {
            let Some(caps) = self.regex.captures_at(text, pos) else {
                break;
            };
            let target = caps.get(1).or_else(|| caps.get(0)).expect("match");
            out.push_str(&text[copied..target.start()]);
            out.push_str(REDACTION);
            copied = target.end();
            hits += 1;
            pos = if target.end() > target.start() {
                target.end()
            } else {
                next_char_boundary(text, target.end())
            };
        }
        out.push_str(&text[copied..]);
        (out, hits)
    }
}

fn next_char_boundary(s: &str, i: usize) -> usize {
    s[i..]
        .chars()
        .next()
        .map_or(s.len() + 1, |c| i + c.len_utf8())
}

/// Compiled cleaning rules.
pub struct RuleSet {
    privacy: Vec<RegexRule>,
    privacy_action: PrivacyAction,
    sensitive: Option<RegexRule>,
    patterns: Vec<RegexRule>,
    min_content_ratio: f64,
    repeat_ngram: usize,
    repeat_max: usize,
}

impl RuleSet {
    pub fn from_config(cfg: &RulesConfig) -> Result<Self> {
        let mut terms = cfg.sensitive_terms.clone();
        if let Some(path) = &cfg.sensitive_terms_file {
            let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            terms.extend(
                body.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_owned),
            );
        }
        Self::build(cfg, &terms)
    }

    fn build(cfg: &RulesConfig, terms: &[String]) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.min_content_ratio) {
            return Err(Error::config("min_content_ratio must lie in [0, 1]"));
        }
        if cfg.repeat_ngram == 0 || cfg.repeat_max < 2 {
            return Err(Error::config(
                "repeat_ngram must be >= 1 and repeat_max >= 2",
            ));
        }
        let privacy = if cfg.privacy {
            vec![
                RegexRule::new("privacy_id", ID_PATTERN)?,
                RegexRule::new("privacy_mobile", MOBILE_PATTERN)?,
                RegexRule::new("privacy_email", EMAIL_PATTERN)?,
            ]
        } else {
            Vec::new()
        };
        let sensitive = if terms.is_empty() {
            None
        } else {
            let alternation = terms
                .iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join("|");
            Some(RegexRule::new("sensitive_term", &alternation)?)
        };
        let patterns = cfg
            .patterns
            .iter()
            .map(|p| RegexRule::new(&p.name, &p.pattern))
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleSet {
            privacy,
            privacy_action: cfg.privacy_action,
            sensitive,
            patterns,
            min_content_ratio: cfg.min_content_ratio,
            repeat_ngram: cfg.repeat_ngram,
            repeat_max: cfg.repeat_max,
        })
    }

    /// Rule name that rejects `text`, plus the (possibly redacted) text and
    /// per-rule redaction counts when it passes.
    fn check(&self, text: &str) -> Verdict {
        let mut redacted: Vec<(String, usize)> = Vec::new();
        let mut current: Option<String> = None;
        for rule in &self.privacy {
            let t = current.as_deref().unwrap_or(text);
            if !rule.is_match(t) {
                continue;
            }
            match self.privacy_action {
                PrivacyAction::Drop => return Verdict::Drop(rule.name.clone()),
                PrivacyAction::Redact => {
                    let (r, hits) = rule.redact(t);
                    redacted.push((rule.name.clone(), hits));
                    current = Some(r);
                }
            }
        }
        let t = current.as_deref().unwrap_or(text);
        if let Some(rule) = &self.sensitive {
            if rule.is_match(t) {
                return Verdict::Drop(rule.name.clone());
            }
        }
        for rule in &self.patterns {
            if rule.is_match(t) {
                return Verdict::Drop(rule.name.clone());
            }
        }
        if content_ratio(t) < self.min_content_ratio {
            return Verdict::Drop("low_content_ratio".into());
        }
        if max_ngram_repeats(t, self.repeat_ngram) >= self.repeat_max {
            return Verdict::Drop("repeated_ngram".into());
        }
        Verdict::Keep {
            text: current,
            redacted,
        }
    }
}

enum Verdict {
    Keep {
        text: Option<String>,
        redacted: Vec<(String, usize)>,
    },
    Drop(String),
}

/// Fraction of characters that are letters or digits in any script (CJK
/// ideographs count as letters).
pub(crate) fn content_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut content = 0usize;
    for c in text.chars() {
        total += 1;
        if c.is_alphanumeric() {
            content += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    content as f64 / total as f64
}

/// Highest occurrence count of any character n-gram, ignoring n-grams made
/// only of whitespace. Occurrences may overlap.
pub(crate) fn max_ngram_repeats(text: &str, n: usize) -> usize {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < n {
        return 0;
    }
    let mut counts: HashMap<&[char], usize> = HashMap::new();
    let mut best = 0;
    for w in chars.windows(n) {
        if w.iter().all(|c| c.is_whitespace()) {
            continue;
        }
        let c = counts.entry(w).or_default();
        *c += 1;
        best = best.max(*c);
    }
    best
}

/// Removes chunks rejected by any rule. Kept chunks keep their input order;
/// in redact mode their text (and length fields) reflect the redaction.
pub fn apply_clean_rules(chunks: Vec<Chunk>, rules: &RuleSet) -> (Vec<Chunk>, CleanReport) {
    let verdicts: Vec<Verdict> = chunks.par_iter().map(|c| rules.check(&c.text)).collect();
    let mut report = CleanReport::default();
    let mut kept = Vec::with_capacity(chunks.len());
    for (mut chunk, verdict) in chunks.into_iter().zip(verdicts) {
        match verdict {
            Verdict::Drop(reason) => {
                log::debug!("dropping chunk {}: {reason}", chunk.id);
                report.drop(&reason);
            }
            Verdict::Keep { text, redacted } => {
                if let Some(t) = text {
                    chunk.set_text(t);
                }
                for (rule, hits) in redacted {
                    *report.redacted.entry(rule).or_default() += hits;
                }
                report.kept += 1;
                kept.push(chunk);
            }
        }
    }
    (kept, report)
}
