use serde::{Deserialize, Serialize};

use super::{Annotations, InstructionRecord, Origin, TaskKind, DEFAULT_INSTRUCTION};
use crate::error::{Error, Result};
use crate::pretrain::Chunk;
use crate::providers::{ChatMessage, ChatProvider};
use crate::tool::GENERAL_SYSTEM_PROMPT;

pub const QUESTION_SLOT: &str = "{{question}}";

/// Templates for records derived from corpus chunks. `{term}` and
/// `{passage}` are substituted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSet {
    pub summarize_instruction: String,
    pub qa_open_instruction: String,
    pub qa_open_question: String,
    pub mrc_instruction: String,
    pub mrc_question: String,
    /// Minimum chunk length, in characters, for summarize and mrc.
    pub min_chars: usize,
    /// Prompt asking the chat model for a question about a passage.
    pub question_request: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            summarize_instruction: "为以下内容生成摘要/标题".into(),
            qa_open_instruction: DEFAULT_INSTRUCTION.into(),
            qa_open_question: "什么是{term}？".into(),
            mrc_instruction: "阅读以下材料，并根据材料回答问题。\n材料：{passage}".into(),
            mrc_question: QUESTION_SLOT.into(),
            min_chars: 100,
            question_request:
                "请根据以下材料提出一个可以从材料中找到答案的问题，只输出问题。\n{passage}".into(),
        }
    }
}

fn split_concept(text: &str) -> Option<(&str, &str)> {
    let pos = text.find(['：', ':'])?;
    let sep_len = text[pos..].chars().next()?.len_utf8();
    let term = text[..pos].trim();
    let explanation = text[pos + sep_len..].trim();
    (!term.is_empty() && !explanation.is_empty()).then_some((term, explanation))
}

/// Builds an instruction record from a corpus chunk by template filling.
/// Summaries and reading-comprehension records leave the answer empty.
pub fn context_to_instruction(
    chunk: &Chunk,
    task: TaskKind,
    templates: &TemplateSet,
) -> Result<InstructionRecord> {
    let text = chunk.text.trim();
    let len = text.chars().count();
    let too_short = || {
        Error::record(
            &chunk.id,
            format!(
                "chunk has {len} characters; {task} needs at least {}",
                templates.min_chars
            ),
        )
    };
    let (instruction, question, answer) = match task {
        TaskKind::Summarize => {
            if len < templates.min_chars {
                return Err(too_short());
            }
            (
                templates.summarize_instruction.clone(),
                text.to_string(),
                String::new(),
            )
        }
        TaskKind::QaOpen => {
            let (term, explanation) = split_concept(text).ok_or_else(|| {
                Error::record(&chunk.id, "qa_open needs a `term：explanation` chunk")
            })?;
            (
                templates.qa_open_instruction.clone(),
                templates.qa_open_question.replace("{term}", term),
                explanation.to_string(),
            )
        }
        TaskKind::Mrc => {
            if len < templates.min_chars {
                return Err(too_short());
            }
            (
                templates.mrc_instruction.replace("{passage}", text),
                templates.mrc_question.clone(),
                String::new(),
            )
        }
        other => {
            return Err(Error::config(format!(
                "context-driven construction supports summarize, qa_open and mrc, not {other}"
            )))
        }
    };
    Ok(InstructionRecord {
        id: format!("{}:{task}", chunk.id),
        task,
        instruction,
        question,
        answer,
        origin: Origin::ContextDriven,
        annotations: Annotations::default(),
    })
}

/// Fills a question slot and an empty answer through the chat provider.
pub fn complete_record(
    mut rec: InstructionRecord,
    templates: &TemplateSet,
    chat: &dyn ChatProvider,
) -> Result<InstructionRecord> {
    if rec.question.contains(QUESTION_SLOT) {
        let request = templates
            .question_request
            .replace("{passage}", &rec.instruction);
        let q = chat.chat(GENERAL_SYSTEM_PROMPT, &[ChatMessage::user(request)])?;
        rec.question = rec.question.replace(QUESTION_SLOT, q.trim());
    }
    if rec.answer.trim().is_empty() {
        let a = chat.chat(GENERAL_SYSTEM_PROMPT, &[ChatMessage::user(rec.prompt())])?;
        rec.answer = a.trim().to_string();
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::EchoChat;

    fn chunk(text: &str) -> Chunk {
        Chunk::new("c7#0".into(), vec!["c7".into()], text.into())
    }

    #[test]
    fn summarize_copies_chunk() {
        let text = "公司年报显示营业收入同比增长。".repeat(40);
        let r = context_to_instruction(&chunk(&text), TaskKind::Summarize, &TemplateSet::default())
            .unwrap();
        assert_eq!(r.instruction, "为以下内容生成摘要/标题");
        assert_eq!(r.question, text);
        assert_eq!(r.answer, "");
        assert_eq!(r.id, "c7#0:summarize");
        assert_eq!(r.origin, Origin::ContextDriven);
    }

    #[test]
    fn concept_split() {
        let r = context_to_instruction(
            &chunk("市盈率：股价与每股收益之比"),
            TaskKind::QaOpen,
            &TemplateSet::default(),
        )
        .unwrap();
        assert_eq!(r.question, "什么是市盈率？");
        assert_eq!(r.answer, "股价与每股收益之比");
        let r = context_to_instruction(
            &chunk("ROE: return on equity"),
            TaskKind::QaOpen,
            &TemplateSet::default(),
        )
        .unwrap();
        assert_eq!(r.question, "什么是ROE？");
        assert!(context_to_instruction(
            &chunk("没有分隔符"),
            TaskKind::QaOpen,
            &TemplateSet::default()
        )
        .is_err());
    }

    #[test]
    fn short_chunk_rejected() {
        let text = "短".repeat(50);
        assert!(
            context_to_instruction(&chunk(&text), TaskKind::Mrc, &TemplateSet::default()).is_err()
        );
        assert!(
            context_to_instruction(&chunk(&text), TaskKind::Compute, &TemplateSet::default())
                .is_err()
        );
    }

    #[test]
    fn mrc_slot_filled_by_chat() {
        let text = "央行下调存款准备金率。".repeat(12);
        let t = TemplateSet::default();
        let r = context_to_instruction(&chunk(&text), TaskKind::Mrc, &t).unwrap();
        assert!(r.instruction.contains(&text));
        assert_eq!(r.question, QUESTION_SLOT);
        let filled = complete_record(r, &t, &EchoChat).unwrap();
        assert!(!filled.question.contains(QUESTION_SLOT));
        assert!(!filled.answer.is_empty());
    }
}
