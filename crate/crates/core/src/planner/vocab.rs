use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pretrain::Chunk;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub max_new: usize,
    /// Pairs seen fewer times than this are never merged.
    pub min_frequency: u64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            max_new: 7689,
            min_frequency: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabExtension {
    /// Sorted by descending score, ties lexicographic.
    pub new_tokens: Vec<String>,
    pub scores: BTreeMap<String, u64>,
    pub base_vocab_size: usize,
}

/// Splits text into maximal runs of letters and digits; whitespace and
/// punctuation never end up inside a learned piece.
fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
}

fn word_frequencies(chunks: &[Chunk]) -> BTreeMap<String, u64> {
    let merged = chunks
        .par_iter()
        .fold(HashMap::<&str, u64>::new, |mut acc, c| {
            for w in words(&c.text) {
                *acc.entry(w).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    merged.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

type Pair = (u32, u32);

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    merged: String,
    pair: Pair,
    parts: (String, String),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: higher count first, then lexicographically smaller piece
        self.count
            .cmp(&other.count)
            .then_with(|| other.merged.cmp(&self.merged))
            .then_with(|| other.parts.cmp(&self.parts))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Learner {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    counts: HashMap<Pair, u64>,
    locations: HashMap<Pair, HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl Learner {
    fn new(freqs: &BTreeMap<String, u64>) -> Self {
        let mut learner = Learner {
            symbols: Vec::new(),
            ids: HashMap::new(),
            words: Vec::with_capacity(freqs.len()),
            counts: HashMap::new(),
            locations: HashMap::new(),
            heap: BinaryHeap::new(),
        };
        for (w, &f) in freqs {
            let syms: Vec<u32> = w.chars().map(|c| learner.intern(c.to_string())).collect();
            learner.words.push((syms, f));
        }
        for wi in 0..learner.words.len() {
            learner.add_pairs(wi);
        }
        let pairs: Vec<Pair> = learner.counts.keys().copied().collect();
        for p in pairs {
            learner.push(p);
        }
        learner
    }

    fn intern(&mut self, s: String) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.ids.insert(s.clone(), id);
        self.symbols.push(s);
        id
    }

    fn add_pairs(&mut self, wi: usize) {
        let (syms, f) = &self.words[wi];
        for w in syms.windows(2) {
            let p = (w[0], w[1]);
            *self.counts.entry(p).or_default() += f;
            self.locations.entry(p).or_default().insert(wi);
        }
    }

    fn remove_pairs(&mut self, wi: usize) {
        let (syms, f) = &self.words[wi];
        for w in syms.windows(2) {
            if let Some(c) = self.counts.get_mut(&(w[0], w[1])) {
                *c -= f;
            }
        }
    }

    fn push(&mut self, pair: Pair) {
        let count = self.counts.get(&pair).copied().unwrap_or(0);
        if count == 0 {
            return;
        }
        let l = &self.symbols[pair.0 as usize];
        let r = &self.symbols[pair.1 as usize];
        self.heap.push(Candidate {
            count,
            merged: format!("{l}{r}"),
            pair,
            parts: (l.clone(), r.clone()),
        });
    }

    /// Highest-count pair with an up-to-date heap entry.
    fn pop_best(&mut self) -> Option<Candidate> {
        while let Some(top) = self.heap.pop() {
            let current = self.counts.get(&top.pair).copied().unwrap_or(0);
            if current == top.count {
                return Some(top);
            }
            if current > 0 {
                self.push(top.pair);
            }
        }
        None
    }

    fn merge(&mut self, cand: &Candidate) -> u32 {
        let new_id = self.intern(cand.merged.clone());
        let (a, b) = cand.pair;
        let mut affected: Vec<usize> = self
            .locations
            .remove(&cand.pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        let mut touched: HashSet<Pair> = HashSet::new();
        for wi in affected {
            if !self.words[wi].0.windows(2).any(|w| w[0] == a && w[1] == b) {
                continue;
            }
            self.remove_pairs(wi);
            let syms = &self.words[wi].0;
            let mut merged = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
                    merged.push(new_id);
                    i += 2;
                } else {
                    merged.push(syms[i]);
                    i += 1;
                }
            }
            for w in merged.windows(2) {
                touched.insert((w[0], w[1]));
            }
            self.words[wi].0 = merged;
            self.add_pairs(wi);
        }
        self.counts.remove(&cand.pair);
        let mut touched: Vec<Pair> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            self.push(p);
        }
        new_id
    }
}

/// Learns multi-character pieces from the domain corpus with iterative
/// pair merging and returns the highest-scoring ones absent from `base_vocab`.
///
/// A piece's score is the corpus frequency of the pair that formed it at the
/// time of the merge. Merging stops once `max_new` new pieces exist or no
/// pair reaches `min_frequency`.
pub fn extend_vocab(
    chunks: &[Chunk],
    base_vocab: &HashSet<String>,
    cfg: &VocabConfig,
) -> Result<VocabExtension> {
    if base_vocab.is_empty() {
        return Err(Error::config("base vocabulary is empty"));
    }
    if cfg.max_new == 0 {
        return Err(Error::config("max_new must be at least 1"));
    }
    let freqs = word_frequencies(chunks);
    if freqs.is_empty() {
        return Err(Error::data("corpus is empty; nothing to learn from"));
    }
    let min_frequency = cfg.min_frequency.max(1);
    let mut learner = Learner::new(&freqs);
    let mut scores: BTreeMap<String, u64> = BTreeMap::new();
    while scores.len() < cfg.max_new {
        let Some(best) = learner.pop_best() else {
            break;
        };
        if best.count < min_frequency {
            break;
        }
        learner.merge(&best);
        if !base_vocab.contains(&best.merged) {
            let s = scores.entry(best.merged).or_default();
            *s = (*s).max(best.count);
        }
    }
    let mut new_tokens: Vec<String> = scores.keys().cloned().collect();
    new_tokens.sort_by(|x, y| scores[y].cmp(&scores[x]).then_with(|| x.cmp(y)));
    new_tokens.truncate(cfg.max_new);
    let chosen: HashSet<&String> = new_tokens.iter().collect();
    scores.retain(|k, _| chosen.contains(k));
    Ok(VocabExtension {
        new_tokens,
        scores,
        base_vocab_size: base_vocab.len(),
    })
}

/// Pluggable token counting for corpus accounting.
pub trait TokenCounter: Sync {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(chars / 1.6)`, the chunker's estimate.
pub struct CharHeuristic;

impl TokenCounter for CharHeuristic {
    fn count(&self, text: &str) -> usize {
        crate::pretrain::token_estimate(text.chars().count())
    }
}

/// Greedy longest-match segmentation over a vocabulary; characters not
/// covered by any entry count as one token each.
pub struct VocabCounter {
    vocab: HashSet<String>,
    max_chars: usize,
}

impl VocabCounter {
    pub fn new<I: IntoIterator<Item = String>>(vocab: I) -> Self {
        let vocab: HashSet<String> = vocab.into_iter().collect();
        let max_chars = vocab.iter().map(|t| t.chars().count()).max().unwrap_or(1);
        VocabCounter { vocab, max_chars }
    }
}

impl TokenCounter for VocabCounter {
    fn count(&self, text: &str) -> usize {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut i = 0;
        let mut n = 0;
        let mut buf = String::new();
        while i < chars.len() {
            let mut step = 1;
            for len in (2..=self.max_chars.min(chars.len() - i)).rev() {
                buf.clear();
                buf.extend(&chars[i..i + len]);
                if self.vocab.contains(&buf) {
                    step = len;
                    break;
                }
            }
            i += step;
            n += 1;
        }
        n
    }
}

pub fn count_tokens(chunks: &[Chunk], counter: &dyn TokenCounter) -> u64 {
    chunks
        .par_iter()
        .map(|c| counter.count(&c.text) as u64)
        .sum()
}
