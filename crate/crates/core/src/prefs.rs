//! Preference pairs for DPO: judged pairs inside duplicate clusters, and
//! ground truth against model output.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed_dedup::DupCluster;
use crate::error::{Error, Result};
use crate::providers::{ChatMessage, ChatProvider, JudgeProvider, Verdict};
use crate::sft::InstructionRecord;
use crate::tool::system_prompt_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    JudgedCluster,
    ModelContrast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub source: PairSource,
    #[serde(default)]
    pub judge_meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrefOutput {
    pub pairs: Vec<PreferencePair>,
    pub skipped: Vec<Skip>,
}

impl PrefOutput {
    pub fn skip_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for s in &self.skipped {
            *m.entry(s.reason.clone()).or_default() += 1;
        }
        m
    }
}

/// Trims and collapses internal whitespace runs to one space.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

enum Job<'a> {
    Pair(PreferencePair),
    Skip(Skip),
    Judge {
        id: String,
        rep: &'a InstructionRecord,
        other: &'a InstructionRecord,
    },
}

/// Judges each cluster member's answer against the representative's, using
/// the representative's prompt and its answer as the reference. Ties and
/// identical answers produce no pair.
pub fn pairs_from_clusters(
    clusters: &[DupCluster],
    records: &HashMap<String, InstructionRecord>,
    judge: &dyn JudgeProvider,
) -> Result<PrefOutput> {
    let lookup = |id: &str, cluster: &str| {
        records
            .get(id)
            .ok_or_else(|| Error::record(id, format!("member of cluster {cluster} not found")))
    };
    let mut jobs = Vec::new();
    for c in clusters {
        let rep = lookup(&c.representative_id, &c.cluster_id)?;
        for m in &c.member_ids {
            let other = lookup(m, &c.cluster_id)?;
            if *m == c.representative_id {
                continue;
            }
            let id = format!("{}:{}", c.cluster_id, m);
            let job = if rep.answer.trim().is_empty() || other.answer.trim().is_empty() {
                Job::Skip(Skip {
                    id,
                    reason: "empty_answer".into(),
                })
            } else if normalize_answer(&rep.answer) == normalize_answer(&other.answer) {
                Job::Skip(Skip {
                    id,
                    reason: "identical_answers".into(),
                })
            } else {
                Job::Judge { id, rep, other }
            };
            jobs.push(job);
        }
    }
    let resolved: Vec<Job> = jobs
        .into_par_iter()
        .map(|job| {
            let Job::Judge { id, rep, other } = job else {
                return Ok(job);
            };
            let prompt = rep.prompt();
            let verdict = judge.judge(&prompt, &rep.answer, &other.answer, Some(&rep.answer))?;
            let (chosen, rejected, chosen_id, rejected_id) = match verdict {
                Verdict::Tie => {
                    log::info!("pair {id}: judge returned tie, skipped");
                    return Ok(Job::Skip(Skip {
                        id,
                        reason: "tie".into(),
                    }));
                }
                Verdict::First => (rep, other, &rep.id, &other.id),
                Verdict::Second => (other, rep, &other.id, &rep.id),
            };
            let judge_meta = BTreeMap::from([
                ("chosen_id".to_string(), chosen_id.clone()),
                ("rejected_id".to_string(), rejected_id.clone()),
                (
                    "verdict".to_string(),
                    match verdict {
                        Verdict::First => "first",
                        _ => "second",
                    }
                    .to_string(),
                ),
            ]);
            Ok(Job::Pair(PreferencePair {
                id,
                prompt,
                chosen: chosen.answer.clone(),
                rejected: rejected.answer.clone(),
                source: PairSource::JudgedCluster,
                judge_meta,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(collect(resolved))
}

fn collect(jobs: Vec<Job>) -> PrefOutput {
    let mut out = PrefOutput::default();
    for j in jobs {
        match j {
            Job::Pair(p) => out.pairs.push(p),
            Job::Skip(s) => out.skipped.push(s),
            Job::Judge { .. } => unreachable!("all judge jobs resolved"),
        }
    }
    out
}

/// Asks the model each record's prompt; its output becomes the rejected
/// answer and the ground truth the chosen one. Records where the two agree
/// after whitespace normalisation are skipped.
pub fn pairs_from_model_outputs(
    records: &[InstructionRecord],
    model: &dyn ChatProvider,
) -> Result<PrefOutput> {
    let jobs: Vec<Job> = records
        .par_iter()
        .map(|r| {
            if r.answer.trim().is_empty() {
                return Ok(Job::Skip(Skip {
                    id: r.id.clone(),
                    reason: "empty_ground_truth".into(),
                }));
            }
            let prompt = r.prompt();
            let output = model.chat(
                system_prompt_for(r.task),
                &[ChatMessage::user(prompt.clone())],
            )?;
            if normalize_answer(&output) == normalize_answer(&r.answer) {
                log::info!(
                    "record {}: model output matches ground truth, skipped",
                    r.id
                );
                return Ok(Job::Skip(Skip {
                    id: r.id.clone(),
                    reason: "model_matches_truth".into(),
                }));
            }
            Ok(Job::Pair(PreferencePair {
                id: r.id.clone(),
                prompt,
                chosen: r.answer.clone(),
                rejected: output,
                source: PairSource::ModelContrast,
                judge_meta: BTreeMap::new(),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(collect(jobs))
}
