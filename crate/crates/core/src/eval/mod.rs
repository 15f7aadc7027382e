//! Multiple-choice benchmark evaluation: prompt rendering, answer-letter
//! extraction, accuracy reports, result tables and dataset conversion.

mod convert;
mod extract;
mod harness;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convert::{convert_csv, convert_json_value};
pub use extract::extract_choice;
pub use harness::{evaluate_mcq, EvalConfig, EvalReport, EvalRun, ItemResult, DEFAULT_TEMPLATE};
pub use table::{render_table, sweep_csv, ScoreRow, SweepPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub question: String,
    /// Option letter to option text, in letter order.
    pub choices: BTreeMap<String, String>,
    pub gold: String,
    #[serde(default = "default_category")]
    pub category: String,
}

fn default_category() -> String {
    "default".into()
}

impl McqItem {
    pub fn validate(&self) -> Result<()> {
        if self.choices.len() < 2 {
            return Err(Error::record(&self.id, "needs at least two choices"));
        }
        if let Some(bad) = self
            .choices
            .keys()
            .find(|k| !(k.len() == 1 && k.chars().all(|c| c.is_ascii_uppercase())))
        {
            return Err(Error::record(
                &self.id,
                format!("choice key `{bad}` is not a letter A-Z"),
            ));
        }
        if !self.choices.contains_key(&self.gold) {
            return Err(Error::record(
                &self.id,
                format!("gold `{}` is not a choice", self.gold),
            ));
        }
        Ok(())
    }

    /// Choice lines as `A. text`.
    pub fn render_choices(&self) -> String {
        self.choices
            .iter()
            .map(|(k, v)| format!("{k}. {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
