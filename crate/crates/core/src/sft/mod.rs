//! Instruction-data construction: uniform-format conversion, rule cleaning,
//! template-driven records from corpus chunks, and prompt evolution.

mod clean;
mod context;
mod evolve;
mod format;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean_instruction, SftCleanConfig, MIN_ANSWER_CHARS};
pub use context::{complete_record, context_to_instruction, TemplateSet};
pub use evolve::{evolve_prompt, evolve_with_chat, EvolKind, EvolSpec};
pub use format::{to_uniform_batch, to_uniform_format, FieldMap, DEFAULT_INSTRUCTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    QaChoice,
    QaOpen,
    Mrc,
    Summarize,
    Compute,
    Sentiment,
    RelationExtraction,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::QaChoice,
        TaskKind::QaOpen,
        TaskKind::Mrc,
        TaskKind::Summarize,
        TaskKind::Compute,
        TaskKind::Sentiment,
        TaskKind::RelationExtraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::QaChoice => "qa_choice",
            TaskKind::QaOpen => "qa_open",
            TaskKind::Mrc => "mrc",
            TaskKind::Summarize => "summarize",
            TaskKind::Compute => "compute",
            TaskKind::Sentiment => "sentiment",
            TaskKind::RelationExtraction => "relation_extraction",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Seed,
    Generated,
    ContextDriven,
    Evolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ifd_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub task: TaskKind,
    pub instruction: String,
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default)]
    pub annotations: Annotations,
}

impl InstructionRecord {
    /// Text used as the model prompt: instruction, newline, question.
    pub fn prompt(&self) -> String {
        format!("{}\n{}", self.instruction, self.question)
    }
}
