//! Instruction-Following Difficulty scoring, top-fraction filtering and
//! tertile banding.
//!
//! IFD is the ratio of the answer's perplexity given the prompt to its
//! perplexity alone: `exp(conditioned_nll - unconditioned_nll)`, with both
//! NLLs in mean nats per answer token.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{LogprobProvider, TokenLogprob};
use crate::sft::{Band, InstructionRecord};

pub const DEFAULT_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfdScore {
    pub conditioned_nll: f64,
    pub unconditioned_nll: f64,
    pub ifd: f64,
}

impl IfdScore {
    pub fn from_nll(conditioned_nll: f64, unconditioned_nll: f64) -> Self {
        IfdScore {
            conditioned_nll,
            unconditioned_nll,
            ifd: (conditioned_nll - unconditioned_nll).exp(),
        }
    }
}

/// Context preceding the answer in the conditioned pass.
pub fn conditioning_context(rec: &InstructionRecord) -> String {
    format!("{}\n{}\n", rec.instruction, rec.question)
}

fn mean_nll(id: &str, tokens: &[TokenLogprob]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::record(id, "provider returned zero answer tokens"));
    }
    if let Some(t) = tokens
        .iter()
        .find(|t| !t.logprob.is_finite() || t.logprob > 0.0)
    {
        return Err(Error::record(
            id,
            format!(
                "invalid log-probability {} for token {:?}",
                t.logprob, t.token
            ),
        ));
    }
    Ok(-tokens.iter().map(|t| t.logprob).sum::<f64>() / tokens.len() as f64)
}

pub fn ifd_score(rec: &InstructionRecord, provider: &dyn LogprobProvider) -> Result<IfdScore> {
    if rec.answer.is_empty() {
        return Err(Error::record(&rec.id, "cannot score an empty answer"));
    }
    let cond = provider.token_logprobs(&conditioning_context(rec), &rec.answer)?;
    let uncond = provider.token_logprobs("", &rec.answer)?;
    Ok(IfdScore::from_nll(
        mean_nll(&rec.id, &cond)?,
        mean_nll(&rec.id, &uncond)?,
    ))
}

/// Scores every record and writes `annotations.ifd_score`.
///
/// The full texts are first offered to the provider through `observe`, in
/// input order, so a self-trained stub sees the whole record set before any
/// score is taken.
pub fn score_records(
    mut records: Vec<InstructionRecord>,
    provider: &dyn LogprobProvider,
) -> Result<Vec<(InstructionRecord, IfdScore)>> {
    let texts: Vec<String> = records
        .iter()
        .map(|r| format!("{}{}", conditioning_context(r), r.answer))
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    provider.observe(&refs);
    let scores: Vec<IfdScore> = records
        .par_iter()
        .map(|r| ifd_score(r, provider))
        .collect::<Result<_>>()?;
    for (r, s) in records.iter_mut().zip(&scores) {
        r.annotations.ifd_score = Some(s.ifd);
    }
    Ok(records.into_iter().zip(scores).collect())
}

fn score_of(r: &InstructionRecord) -> Result<f64> {
    r.annotations
        .ifd_score
        .filter(|s| s.is_finite())
        .ok_or_else(|| Error::record(&r.id, "record has no IFD score"))
}

fn sorted(records: Vec<InstructionRecord>, descending: bool) -> Result<Vec<InstructionRecord>> {
    let mut keyed: Vec<(f64, InstructionRecord)> = records
        .into_iter()
        .map(|r| Ok((score_of(&r)?, r)))
        .collect::<Result<_>>()?;
    keyed.sort_by(|(sa, a), (sb, b)| {
        let by_score = if descending {
            sb.total_cmp(sa)
        } else {
            sa.total_cmp(sb)
        };
        match by_score {
            Ordering::Equal => a.id.cmp(&b.id),
            o => o,
        }
    });
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Number of records kept: `floor(fraction * n)`, at least one.
pub fn kept_count(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    (((fraction * n as f64) + 1e-9).floor() as usize).clamp(1, n)
}

/// Keeps the highest-IFD `floor(fraction * N)` records (minimum 1), sorted
/// by score descending then id ascending. Returns (kept, rest).
pub fn filter_top_fraction(
    records: Vec<InstructionRecord>,
    fraction: f64,
) -> Result<(Vec<InstructionRecord>, Vec<InstructionRecord>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut all = sorted(records, true)?;
    let rest = all.split_off(kept_count(all.len(), fraction));
    Ok((all, rest))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub low: Vec<InstructionRecord>,
    pub mid: Vec<InstructionRecord>,
    pub high: Vec<InstructionRecord>,
}

/// Tertile split by IFD ascending (ties by id): `[0, N/3)`, `[N/3, 2N/3)`,
/// `[2N/3, N)`. Writes `annotations.band`.
pub fn band_partition(records: Vec<InstructionRecord>) -> Result<Bands> {
    let mut all = sorted(records, false)?;
    let n = all.len();
    let (a, b) = (n / 3, 2 * n / 3);
    for (i, r) in all.iter_mut().enumerate() {
        r.annotations.band = Some(if i < a {
            Band::Low
        } else if i < b {
            Band::Mid
        } else {
            Band::High
        });
    }
    let high = all.split_off(b);
    let mid = all.split_off(a);
    Ok(Bands {
        low: all,
        mid,
        high,
    })
}
