//! Calculator markers in model output: scanning, filling, verification of
//! computation examples, and the tool-augmented chat loop.

mod chat;
mod marker;
mod verify;

use crate::sft::TaskKind;

pub use chat::{tool_chat_loop, ToolRun};
pub use marker::{fill_markers, scan_markers, Evaluation, Filled, Marker, MARKER_OPEN};
pub use verify::{
    parse_claimed, split_verified, verify_examples, verify_record, Tolerance, VerifyOutcome,
    VerifyStatus,
};

pub const GENERAL_SYSTEM_PROMPT: &str =
    "You are one general artificial intelligence robot named ShenNong.";

pub const CALCULATION_SYSTEM_PROMPT: &str = "You are a financial and mathematical calculation assistant. When you need to perform formula, you can call the calculator plug-in, which is a specific calculation expression can be executed by Python code. The format is [Calculator( expression)->result].";

/// System prompt for a task: computation tasks get the calculator prompt.
pub fn system_prompt_for(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Compute => CALCULATION_SYSTEM_PROMPT,
        _ => GENERAL_SYSTEM_PROMPT,
    }
}
