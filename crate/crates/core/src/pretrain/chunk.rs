use serde::{Deserialize, Serialize};

use super::{Chunk, DocumentRecord, Source};
use crate::error::{Error, Result};

pub const MIN_MAX_LENGTH: usize = 64;
pub const DEFAULT_MAX_LENGTH: usize = 2048;

const SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    /// Character budget per chunk.
    pub max_length: usize,
    /// How far (as a fraction of the ideal piece length) a split may move
    /// away from the balanced cut to land on a paragraph or sentence end.
    pub boundary_slack: f64,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            max_length: DEFAULT_MAX_LENGTH,
            boundary_slack: 0.1,
        }
    }
}

/// `ceil(char_len / 1.6)`, computed in integers.
pub fn token_estimate(char_len: usize) -> usize {
    (char_len * 5).div_ceil(8)
}

/// Splits long documents into balanced pieces and packs runs of short
/// same-source documents together, preserving input order.
pub fn chunk_documents(docs: &[DocumentRecord], cfg: &ChunkConfig) -> Result<Vec<Chunk>> {
    let max_length = cfg.max_length;
    if max_length < MIN_MAX_LENGTH {
        return Err(Error::config(format!(
            "max_length must be at least {MIN_MAX_LENGTH} characters, got {max_length}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.boundary_slack) {
        return Err(Error::config("boundary_slack must lie in [0, 1]"));
    }

    let mut out = Vec::new();
    let mut group: Option<Group> = None;

    for doc in docs {
        let chars: Vec<char> = doc.text.chars().collect();
        if chars.is_empty() {
            log::debug!("skipping empty document {}", doc.id);
            continue;
        }
        if chars.len() > max_length {
            if let Some(g) = group.take() {
                out.push(g.finish());
            }
            for (i, (a, b)) in split_points(&chars, max_length, cfg.boundary_slack)
                .into_iter()
                .enumerate()
            {
                out.push(Chunk::new(
                    format!("{}#{i}", doc.id),
                    vec![doc.id.clone()],
                    chars[a..b].iter().collect(),
                ));
            }
            continue;
        }
        match group.as_mut() {
            Some(g) if g.source == doc.source && g.len + 2 + chars.len() <= max_length => {
                g.text.push_str(SEPARATOR);
                g.text.push_str(&doc.text);
                g.len += 2 + chars.len();
                g.doc_ids.push(doc.id.clone());
            }
            _ => {
                if let Some(g) = group.take() {
                    out.push(g.finish());
                }
                group = Some(Group {
                    source: doc.source,
                    text: doc.text.clone(),
                    len: chars.len(),
                    doc_ids: vec![doc.id.clone()],
                });
            }
        }
    }
    if let Some(g) = group.take() {
        out.push(g.finish());
    }
    Ok(out)
}

struct Group {
    source: Source,
    text: String,
    len: usize,
    doc_ids: Vec<String>,
}

impl Group {
    fn finish(self) -> Chunk {
        Chunk::new(format!("{}#0", self.doc_ids[0]), self.doc_ids, self.text)
    }
}

/// Character ranges of `ceil(len / max_length)` pieces.
///
/// Each cut starts from the balanced position `start + ceil(rest / pieces)`
/// and may move within the slack window to the nearest paragraph break, else
/// the nearest sentence end. The window is clipped so every piece stays within
/// `max_length` and the remainder still fits into the remaining pieces.
fn split_points(chars: &[char], max_length: usize, slack: f64) -> Vec<(usize, usize)> {
    let len = chars.len();
    let pieces = len.div_ceil(max_length);
    let mut ranges = Vec::with_capacity(pieces);
    let mut start = 0;
    for remaining in (1..=pieces).rev() {
        if remaining == 1 {
            ranges.push((start, len));
            break;
        }
        let rest = len - start;
        let ideal_len = rest.div_ceil(remaining);
        let ideal = start + ideal_len;
        let lo = (len.saturating_sub((remaining - 1) * max_length)).max(start + 1);
        let hi = (start + max_length).min(len - (remaining - 1));
        let w = ((ideal_len as f64) * slack) as usize;
        let win_lo = lo.max(ideal.saturating_sub(w));
        let win_hi = hi.min(ideal + w);
        let cut = nearest(chars, ideal, win_lo, win_hi, is_paragraph_end)
            .or_else(|| nearest(chars, ideal, win_lo, win_hi, is_sentence_end))
            .unwrap_or(ideal);
        ranges.push((start, cut));
        start = cut;
    }
    ranges
}

fn nearest(
    chars: &[char],
    ideal: usize,
    lo: usize,
    hi: usize,
    pred: fn(&[char], usize) -> bool,
) -> Option<usize> {
    let span = (ideal - lo).max(hi - ideal);
    for d in 0..=span {
        if let Some(p) = ideal.checked_sub(d) {
            if p >= lo && pred(chars, p) {
                return Some(p);
            }
        }
        let p = ideal + d;
        if d > 0 && p <= hi && pred(chars, p) {
            return Some(p);
        }
    }
    None
}

/// Cut position `p` sits right after a blank-line separator.
fn is_paragraph_end(chars: &[char], p: usize) -> bool {
    p >= 2 && chars[p - 1] == '\n' && chars[p - 2] == '\n'
}

fn is_sentence_end(chars: &[char], p: usize) -> bool {
    if p == 0 {
        return false;
    }
    match chars[p - 1] {
        '。' | '！' | '？' | '!' | '?' => true,
        // "3.5" is not a sentence end
        '.' => chars.get(p).is_none_or(|c| c.is_whitespace()),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, source: Source, text: &str) -> DocumentRecord {
        DocumentRecord {
            id: id.into(),
            source,
            text: text.into(),
            meta: Default::default(),
        }
    }

    fn cfg(max_length: usize) -> ChunkConfig {
        ChunkConfig {
            max_length,
            ..Default::default()
        }
    }

    /// Balanced partition oracle: k = ceil(L/M) pieces, the first L mod k of
    /// them one longer.
    fn oracle_lengths(len: usize, max: usize) -> Vec<usize> {
        let k = len.div_ceil(max);
        let base = len / k;
        let extra = len % k;
        (0..k).map(|i| base + usize::from(i < extra)).collect()
    }

    #[test]
    fn long_document_balanced() {
        let text = "x".repeat(2500);
        let chunks = chunk_documents(&[doc("d", Source::Report, &text)], &cfg(1000)).unwrap();
        let lens: Vec<_> = chunks.iter().map(|c| c.char_len).collect();
        assert_eq!(lens, vec![834, 833, 833]);
        assert_eq!(lens, oracle_lengths(2500, 1000));
        assert_eq!(chunks[0].id, "d#0");
        assert_eq!(chunks[2].id, "d#2");
        assert!(chunks.iter().all(|c| c.doc_ids == vec!["d".to_string()]));
    }

    #[test]
    fn short_documents_concatenate() {
        let a = "a".repeat(400);
        let b = "b".repeat(400);
        let chunks = chunk_documents(
            &[
                doc("a", Source::FinanceNews, &a),
                doc("b", Source::FinanceNews, &b),
            ],
            &cfg(1000),
        )
        .unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].char_len, 802);
        assert_eq!(chunks[0].doc_ids, vec!["a", "b"]);
        assert_eq!(chunks[0].text, format!("{a}\n\n{b}"));
    }

    #[test]
    fn no_concat_across_sources_or_budget() {
        let t = "t".repeat(400);
        let chunks = chunk_documents(
            &[
                doc("a", Source::FinanceNews, &t),
                doc("b", Source::GeneralZh, &t),
                doc("c", Source::GeneralZh, &t),
                doc("d", Source::GeneralZh, &t),
            ],
            &cfg(1000),
        )
        .unwrap();
        let groups: Vec<_> = chunks.iter().map(|c| c.doc_ids.join(",")).collect();
        assert_eq!(groups, vec!["a", "b,c", "d"]);
        assert!(chunks.iter().all(|c| c.char_len <= 1000));
    }

    #[test]
    fn empty_input() {
        assert!(chunk_documents(&[], &cfg(1000)).unwrap().is_empty());
    }

    #[test]
    fn rejects_small_budget() {
        let err = chunk_documents(&[], &cfg(63)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn prefers_paragraph_then_sentence() {
        // ideal cut at 100; paragraph break ends at 95, sentence end at 103
        let mut text = "x".repeat(93);
        text.push_str("\n\n");
        text.push_str(&"y".repeat(7));
        text.push('。');
        text.push_str(&"z".repeat(97));
        assert_eq!(text.chars().count(), 200);
        let chunks = chunk_documents(&[doc("d", Source::Paper, &text)], &cfg(120)).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].char_len, 95);
        assert!(chunks[0].text.ends_with("\n\n"));

        let mut text = "x".repeat(102);
        text.push('。');
        text.push_str(&"z".repeat(97));
        let chunks = chunk_documents(&[doc("d", Source::Paper, &text)], &cfg(120)).unwrap();
        assert_eq!(chunks[0].char_len, 103);

        // sentence end outside the slack window: hard cut at the balanced point
        let mut text = "x".repeat(120);
        text.push('。');
        text.push_str(&"z".repeat(79));
        let chunks = chunk_documents(&[doc("d", Source::Paper, &text)], &cfg(150)).unwrap();
        assert_eq!(chunks[0].char_len, 100);
    }

    #[test]
    fn decimal_point_is_not_a_sentence_end() {
        let mut text = "x".repeat(99);
        text.push_str("3.5");
        text.push_str(&"z".repeat(98));
        let chunks = chunk_documents(&[doc("d", Source::Paper, &text)], &cfg(150)).unwrap();
        assert_eq!(chunks[0].char_len, 100);
    }

    #[test]
    fn deterministic() {
        let docs: Vec<_> = (0..20)
            .map(|i| {
                doc(
                    &format!("d{i}"),
                    Source::Report,
                    &"句子。".repeat(i * 37 + 3),
                )
            })
            .collect();
        let a = chunk_documents(&docs, &cfg(256)).unwrap();
        let b = chunk_documents(&docs, &cfg(256)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.char_len <= 256 && c.char_len > 0));
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(token_estimate(0), 0);
        assert_eq!(token_estimate(1), 1);
        assert_eq!(token_estimate(16), 10);
        assert_eq!(token_estimate(17), 11);
    }
}
