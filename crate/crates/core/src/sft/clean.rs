use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{InstructionRecord, TaskKind};
use crate::error::Result;
use crate::pretrain::CleanReport;

pub const MIN_ANSWER_CHARS: usize = 2;

/// The `[sft_clean]` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftCleanConfig {
    pub inappropriate_terms: Vec<String>,
    pub min_answer_chars: usize,
    /// Tasks whose records must carry an answer of at least
    /// `min_answer_chars` characters.
    pub answer_required: Vec<TaskKind>,
}

impl Default for SftCleanConfig {
    fn default() -> Self {
        SftCleanConfig {
            inappropriate_terms: Vec::new(),
            min_answer_chars: MIN_ANSWER_CHARS,
            answer_required: TaskKind::ALL.to_vec(),
        }
    }
}

fn placeholder() -> Regex {
    Regex::new(r"\{\{[^{}]*\}\}").expect("static pattern")
}

fn check(
    rec: &InstructionRecord,
    cfg: &SftCleanConfig,
    placeholder: &Regex,
) -> Option<&'static str> {
    let fields = [&rec.instruction, &rec.question, &rec.answer];
    if rec.instruction.trim().is_empty() {
        return Some("empty_instruction");
    }
    if rec.question.trim().is_empty() {
        return Some("empty_question");
    }
    if fields.iter().any(|f| placeholder.is_match(f)) {
        return Some("unresolved_template");
    }
    if cfg
        .inappropriate_terms
        .iter()
        .filter(|t| !t.is_empty())
        .any(|t| fields.iter().any(|f| f.contains(t.as_str())))
    {
        return Some("inappropriate_term");
    }
    if cfg.answer_required.contains(&rec.task)
        && rec.answer.trim().chars().count() < cfg.min_answer_chars
    {
        return Some("short_answer");
    }
    None
}

/// Drops records with empty fields, unresolved `{{...}}` placeholders,
/// configured inappropriate terms, or too-short answers. Order is preserved.
pub fn clean_instruction(
    records: Vec<InstructionRecord>,
    cfg: &SftCleanConfig,
) -> Result<(Vec<InstructionRecord>, CleanReport)> {
    let re = placeholder();
    let verdicts: Vec<Option<&'static str>> =
        records.par_iter().map(|r| check(r, cfg, &re)).collect();
    let mut report = CleanReport::default();
    let mut kept = Vec::with_capacity(records.len());
    for (rec, verdict) in records.into_iter().zip(verdicts) {
        match verdict {
            Some(reason) => {
                log::debug!("dropping instruction {}: {reason}", rec.id);
                report.drop(reason);
            }
            None => {
                report.kept += 1;
                kept.push(rec);
            }
        }
    }
    Ok((kept, report))
}
