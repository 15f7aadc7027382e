//! Chunk-level near-duplicate removal with 64-bit SimHash fingerprints and a
//! banded candidate index.
//!
//! With `b` bands and a Hamming threshold `t < b`, two signatures within
//! distance `t` differ in at most `t` bands, so at least one band is
//! identical and the pair is always found as a candidate. The banded sweep
//! therefore drops exactly the same chunks as an all-pairs comparison.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::HashAlgo;
use crate::pretrain::Chunk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature64(pub u64);

impl Signature64 {
    pub fn hamming(self, other: Signature64) -> u32 {
        hamming_distance(self, other)
    }
}

pub fn hamming_distance(a: Signature64, b: Signature64) -> u32 {
    (a.0 ^ b.0).count_ones()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    /// Character n-gram size for features.
    pub ngram: usize,
    pub hamming_threshold: u32,
    pub bands: u32,
    pub hash: HashAlgo,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            ngram: 3,
            hamming_threshold: 3,
            bands: 4,
            hash: HashAlgo::Fnv1aSplitMix,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram == 0 {
            return Err(Error::config("ngram must be at least 1"));
        }
        if self.bands == 0 || 64 % self.bands != 0 {
            return Err(Error::config(format!(
                "bands must divide 64, got {}",
                self.bands
            )));
        }
        if self.hamming_threshold >= self.bands {
            return Err(Error::config(format!(
                "hamming_threshold ({}) must be below bands ({}) for complete candidate recall",
                self.hamming_threshold, self.bands
            )));
        }
        Ok(())
    }

    fn band_width(&self) -> u32 {
        64 / self.bands
    }
}

/// SimHash over frequency-weighted character n-grams.
///
/// Text shorter than `ngram` characters contributes itself as the single
/// feature.
pub fn simhash64(text: &str, ngram: usize, hash: HashAlgo) -> Result<Signature64> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::data("cannot fingerprint empty text"));
    }
    if ngram == 0 {
        return Err(Error::config("ngram must be at least 1"));
    }
    let chars: Vec<char> = trimmed.chars().collect();
    let mut counts: HashMap<String, i64> = HashMap::new();
    if chars.len() < ngram {
        counts.insert(trimmed.to_owned(), 1);
    } else {
        for w in chars.windows(ngram) {
            *counts.entry(w.iter().collect()).or_default() += 1;
        }
    }
    let mut acc = [0i64; 64];
    for (feature, weight) in &counts {
        let h = hash.hash_str(feature);
        for (bit, slot) in acc.iter_mut().enumerate() {
            if h >> bit & 1 == 1 {
                *slot += weight;
            } else {
                *slot -= weight;
            }
        }
    }
    let mut sig = 0u64;
    for (bit, &v) in acc.iter().enumerate() {
        if v > 0 {
            sig |= 1 << bit;
        }
    }
    Ok(Signature64(sig))
}

/// Result of a dedup sweep: indices into the input plus (kept, dropped) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepResult {
    pub kept: Vec<usize>,
    /// `(kept_index, dropped_index)`; the kept index is the earliest kept
    /// item within threshold.
    pub dropped: Vec<(Ref, usize)>,
}

/// Either an item of the current batch or a signature loaded from a prior run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ref {
    Prior(usize),
    Current(usize),
}

/// Banded first-seen-wins sweep over signatures.
///
/// `prior` signatures (from an index of an earlier run) are treated as kept
/// items that precede the current batch.
pub fn sweep(
    prior: &[Signature64],
    sigs: &[Signature64],
    cfg: &DedupConfig,
) -> Result<SweepResult> {
    cfg.validate()?;
    let width = cfg.band_width();
    let mask = if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    };
    let band_key =
        |sig: Signature64, band: u32| -> (u32, u64) { (band, (sig.0 >> (band * width)) & mask) };

    // Candidate lists are keyed by band value and hold positions in the
    // combined order (prior first), so the earliest match is the minimum.
    let mut index: HashMap<(u32, u64), Vec<usize>> = HashMap::new();
    let mut all: Vec<Signature64> = Vec::with_capacity(prior.len() + sigs.len());
    for &s in prior {
        let pos = all.len();
        all.push(s);
        for band in 0..cfg.bands {
            index.entry(band_key(s, band)).or_default().push(pos);
        }
    }

    let mut result = SweepResult::default();
    for (i, &s) in sigs.iter().enumerate() {
        let mut best: Option<usize> = None;
        for band in 0..cfg.bands {
            if let Some(cands) = index.get(&band_key(s, band)) {
                for &pos in cands {
                    if best.is_some_and(|b| b <= pos) {
                        // lists are ascending
                        break;
                    }
                    if hamming_distance(all[pos], s) <= cfg.hamming_threshold {
                        best = Some(pos);
                        break;
                    }
                }
            }
        }
        match best {
            Some(pos) => {
                let r = if pos < prior.len() {
                    Ref::Prior(pos)
                } else {
                    Ref::Current(result.kept[pos - prior.len()])
                };
                result.dropped.push((r, i));
            }
            None => {
                let pos = all.len();
                all.push(s);
                for band in 0..cfg.bands {
                    index.entry(band_key(s, band)).or_default().push(pos);
                }
                result.kept.push(i);
            }
        }
    }
    Ok(result)
}

/// Identity and signature of a chunk kept by a previous run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: String,
    pub signature: Signature64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedPair {
    pub kept_id: String,
    pub dropped_id: String,
    pub distance: u32,
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutput {
    pub kept: Vec<Chunk>,
    pub dropped_pairs: Vec<DroppedPair>,
    /// Signatures of kept chunks, prior entries first, for the sidecar index.
    pub index: Vec<IndexEntry>,
}

/// Drops every chunk within `hamming_threshold` of an earlier kept chunk.
pub fn dedup_chunks(chunks: Vec<Chunk>, cfg: &DedupConfig) -> Result<DedupOutput> {
    dedup_chunks_with_prior(chunks, &[], cfg)
}

pub fn dedup_chunks_with_prior(
    chunks: Vec<Chunk>,
    prior: &[IndexEntry],
    cfg: &DedupConfig,
) -> Result<DedupOutput> {
    cfg.validate()?;
    let sigs = chunks
        .par_iter()
        .map(|c| {
            simhash64(&c.text, cfg.ngram, cfg.hash).map_err(|e| Error::record(&c.id, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let prior_sigs: Vec<Signature64> = prior.iter().map(|e| e.signature).collect();
    let sweep = sweep(&prior_sigs, &sigs, cfg)?;

    let dropped_pairs = sweep
        .dropped
        .iter()
        .map(|&(r, d)| {
            let (kept_id, kept_sig) = match r {
                Ref::Prior(p) => (prior[p].id.clone(), prior[p].signature),
                Ref::Current(k) => (chunks[k].id.clone(), sigs[k]),
            };
            DroppedPair {
                kept_id,
                dropped_id: chunks[d].id.clone(),
                distance: hamming_distance(kept_sig, sigs[d]),
            }
        })
        .collect();

    let mut index: Vec<IndexEntry> = prior.to_vec();
    let mut keep = vec![false; chunks.len()];
    for &k in &sweep.kept {
        keep[k] = true;
        index.push(IndexEntry {
            id: chunks[k].id.clone(),
            signature: sigs[k],
        });
    }
    let kept = chunks
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect();
    Ok(DedupOutput {
        kept,
        dropped_pairs,
        index,
    })
}

/// Writes the sidecar index: per entry a little-endian `u32` id length, the
/// UTF-8 id bytes, and the little-endian `u64` signature.
pub fn write_index(path: &Path, entries: &[IndexEntry]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in entries {
        let id = e.id.as_bytes();
        let len = u32::try_from(id.len()).map_err(|_| Error::data("index id too long"))?;
        w.write_all(&len.to_le_bytes())
            .and_then(|_| w.write_all(id))
            .and_then(|_| w.write_all(&e.signature.0.to_le_bytes()))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let corrupt = |what: &str| Error::data(format!("{}: corrupt index ({what})", path.display()));
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let len_bytes: [u8; 4] = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| corrupt("truncated length"))?
            .try_into()
            .expect("4 bytes");
        let len = u32::from_le_bytes(len_bytes) as usize;
        pos += 4;
        let id = bytes
            .get(pos..pos + len)
            .ok_or_else(|| corrupt("truncated id"))?;
        let id = std::str::from_utf8(id).map_err(|_| corrupt("id is not UTF-8"))?;
        pos += len;
        let sig_bytes: [u8; 8] = bytes
            .get(pos..pos + 8)
            .ok_or_else(|| corrupt("truncated signature"))?
            .try_into()
            .expect("8 bytes");
        pos += 8;
        out.push(IndexEntry {
            id: id.to_owned(),
            signature: Signature64(u64::from_le_bytes(sig_bytes)),
        });
    }
    Ok(out)
}
