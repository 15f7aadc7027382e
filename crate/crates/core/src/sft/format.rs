use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Annotations, InstructionRecord, Origin, TaskKind};
use crate::error::{Error, Result};
use crate::pretrain::normalize_text;

pub const DEFAULT_INSTRUCTION: &str = "请回答下面的问题。";

/// Source field names for each uniform field.
///
/// `question` is always required. The other fields are optional: when a
/// mapping is given the source field must exist, otherwise the uniform field
/// name is looked up and a default applies if it is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    pub id: Option<String>,
    pub task: Option<String>,
    pub instruction: Option<String>,
    pub question: String,
    pub answer: Option<String>,
    pub default_task: TaskKind,
    pub default_instruction: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: None,
            task: None,
            instruction: None,
            question: "question".into(),
            answer: None,
            default_task: TaskKind::QaOpen,
            default_instruction: DEFAULT_INSTRUCTION.into(),
        }
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn clean(s: &str) -> String {
    normalize_text(s).trim().to_string()
}

/// Converts one loosely structured JSON object into an [`InstructionRecord`].
pub fn to_uniform_format(raw: &Value, map: &FieldMap) -> Result<InstructionRecord> {
    let obj = raw
        .as_object()
        .ok_or_else(|| Error::data("instruction source record is not a JSON object"))?;
    let mut missing = Vec::new();
    let mut field = |mapped: Option<&str>, fallback: &str| -> Option<String> {
        match mapped {
            Some(name) => match obj.get(name).and_then(scalar) {
                Some(v) => Some(v),
                None => {
                    missing.push(name.to_string());
                    None
                }
            },
            None => obj.get(fallback).and_then(scalar),
        }
    };
    let question = field(Some(&map.question), "question");
    let instruction = field(map.instruction.as_deref(), "instruction");
    let answer = match &map.answer {
        // The answer may legitimately be absent for records still to be filled.
        Some(name) => obj.get(name).and_then(scalar),
        None => obj.get("answer").and_then(scalar),
    };
    let id = field(map.id.as_deref(), "id");
    let task = field(map.task.as_deref(), "task");
    if !missing.is_empty() {
        return Err(Error::Schema(missing));
    }

    let instruction = instruction
        .map(|s| clean(&s))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| map.default_instruction.clone());
    let question = clean(&question.unwrap_or_default());
    let answer = clean(&answer.unwrap_or_default());
    let task = match task {
        Some(t) => t.trim().parse()?,
        None => map.default_task,
    };
    let id = id
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| {
            crate::hash::fingerprint(&format!("{instruction}\n{question}\n{answer}"))
        });
    let origin = obj
        .get("origin")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or(Origin::Seed);
    let annotations: Annotations = obj
        .get("annotations")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_default();
    Ok(InstructionRecord {
        id,
        task,
        instruction,
        question,
        answer,
        origin,
        annotations,
    })
}

/// Converts a batch; the first failing record aborts with its line index.
pub fn to_uniform_batch(raws: &[Value], map: &FieldMap) -> Result<Vec<InstructionRecord>> {
    raws.par_iter()
        .enumerate()
        .map(|(i, raw)| {
            to_uniform_format(raw, map).map_err(|e| match e {
                Error::Schema(_) | Error::Data(_) => {
                    Error::record(format!("#{}", i + 1), e.to_string())
                }
                other => other,
            })
        })
        .collect()
}
