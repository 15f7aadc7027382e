use serde::{Deserialize, Serialize};

use super::marker::{scan_markers, Evaluation};
use super::CALCULATION_SYSTEM_PROMPT;
use crate::error::{Error, Result};
use crate::providers::{ChatMessage, ChatProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRun {
    pub text: String,
    pub rounds: usize,
    pub transcript: Vec<Evaluation>,
}

/// Runs the calculation assistant with calculator interception.
///
/// After each model reply the first unfilled marker is evaluated, the reply
/// is cut right after the filled marker, and the model is called again with
/// the accumulated assistant text so it can continue. Each fill is one tool
/// round; needing more than `max_tool_rounds` is a truncation error.
pub fn tool_chat_loop(
    user_msg: &str,
    model: &dyn ChatProvider,
    max_tool_rounds: usize,
) -> Result<ToolRun> {
    if max_tool_rounds == 0 {
        return Err(Error::config("max_tool_rounds must be >= 1"));
    }
    let user = ChatMessage::user(user_msg);
    let mut text = String::new();
    let mut transcript = Vec::new();
    loop {
        let messages = if text.is_empty() {
            vec![user.clone()]
        } else {
            vec![user.clone(), ChatMessage::assistant(text.clone())]
        };
        let reply = model.chat(CALCULATION_SYSTEM_PROMPT, &messages)?;
        let base = text.len();
        text.push_str(&reply);
        let pending = scan_markers(&text)
            .into_iter()
            .find(|m| m.start >= base && m.is_unfilled());
        let Some(m) = pending else {
            return Ok(ToolRun {
                text,
                rounds: transcript.len(),
                transcript,
            });
        };
        if transcript.len() == max_tool_rounds {
            return Err(Error::ToolTruncated {
                rounds: transcript.len(),
                partial: text,
            });
        }
        let ev = Evaluation::run(m.start, &m.expr_src);
        text.truncate(m.start);
        text.push_str(&ev.render());
        log::debug!(
            "tool round {}: {} -> {}",
            transcript.len() + 1,
            ev.expr_src,
            ev.result_text()
        );
        transcript.push(ev);
    }
}
