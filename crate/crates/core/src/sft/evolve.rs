use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{InstructionRecord, Origin};
use crate::error::{Error, Result};
use crate::providers::{ChatMessage, ChatProvider};
use crate::tool::GENERAL_SYSTEM_PROMPT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolKind {
    ConstraintFormat,
    ConstraintLength,
    RolePersona,
    WhatIf,
}

impl EvolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvolKind::ConstraintFormat => "constraint_format",
            EvolKind::ConstraintLength => "constraint_length",
            EvolKind::RolePersona => "role_persona",
            EvolKind::WhatIf => "what_if",
        }
    }
}

impl fmt::Display for EvolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EvolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            EvolKind::ConstraintFormat,
            EvolKind::ConstraintLength,
            EvolKind::RolePersona,
            EvolKind::WhatIf,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::config(format!("unknown evolution kind `{s}`")))
    }
}

/// One evolution step. Required params by kind: `n` (constraint_length),
/// `format` = numbered_list | json (constraint_format), `role`
/// (role_persona), `scenario` (what_if).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolSpec {
    pub kind: EvolKind,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl EvolSpec {
    pub fn new(kind: EvolKind) -> Self {
        EvolSpec {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    fn param(&self, key: &str) -> Result<&str> {
        self.params
            .get(key)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::config(format!("{} needs a `{key}` parameter", self.kind)))
    }

    /// Checks kind-specific parameters.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EvolKind::ConstraintLength => {
                let n: u64 = self.param("n")?.parse().map_err(|_| {
                    Error::config("constraint_length `n` must be a positive integer")
                })?;
                if n == 0 {
                    return Err(Error::config("constraint_length `n` must be > 0"));
                }
            }
            EvolKind::ConstraintFormat => {
                format_directive(self.param("format")?)?;
            }
            EvolKind::RolePersona => {
                self.param("role")?;
            }
            EvolKind::WhatIf => {
                self.param("scenario")?;
            }
        }
        Ok(())
    }
}

fn format_directive(format: &str) -> Result<&'static str> {
    match format {
        "numbered_list" => Ok("请以编号列表的形式作答"),
        "json" => Ok("请以JSON格式输出回答"),
        other => Err(Error::config(format!(
            "unknown output format `{other}` (numbered_list|json)"
        ))),
    }
}

fn append_clause(instruction: &str, clause: &str) -> String {
    let mut s = instruction.trim_end().to_string();
    if !s.is_empty() && !s.ends_with(['。', '！', '？', '；', '，', '.', '!', '?', ';', ',']) {
        s.push('。');
    }
    s.push_str(clause);
    s
}

/// Applies one deterministic evolution. The answer is never changed.
pub fn evolve_prompt(record: &InstructionRecord, spec: &EvolSpec) -> Result<InstructionRecord> {
    spec.validate()?;
    let mut out = record.clone();
    match spec.kind {
        EvolKind::ConstraintLength => {
            let clause = format!("请将回答控制在{}字以内", spec.param("n")?);
            out.instruction = append_clause(&out.instruction, &clause);
        }
        EvolKind::ConstraintFormat => {
            out.instruction =
                append_clause(&out.instruction, format_directive(spec.param("format")?)?);
        }
        EvolKind::RolePersona => {
            out.instruction = format!("假设你是一名{}，{}", spec.param("role")?, out.instruction);
        }
        EvolKind::WhatIf => {
            out.question = format!("假如{}，{}", spec.param("scenario")?, out.question);
        }
    }
    out.origin = Origin::Evolved;
    out.id = format!("{}-{}", record.id, spec.kind);
    Ok(out)
}

/// Template evolution followed by a chat rewrite of the instruction.
pub fn evolve_with_chat(
    record: &InstructionRecord,
    spec: &EvolSpec,
    chat: &dyn ChatProvider,
) -> Result<InstructionRecord> {
    let mut out = evolve_prompt(record, spec)?;
    let request = format!(
        "请在保持原意和全部要求的前提下改写下面的指令，使其更具体、更有挑战性，只输出改写后的指令：\n{}",
        out.instruction
    );
    let rewritten = chat.chat(GENERAL_SYSTEM_PROMPT, &[ChatMessage::user(request)])?;
    let rewritten = rewritten.trim();
    if !rewritten.is_empty() {
        out.instruction = rewritten.to_string();
    }
    Ok(out)
}
