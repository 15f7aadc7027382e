use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_choice, McqItem};
use crate::error::{Error, Result};
use crate::providers::{ChatMessage, ChatProvider};

pub const DEFAULT_TEMPLATE: &str =
    "以下是关于金融领域的单项选择题，请直接给出正确答案的选项。\n{question}\n{choices}\n答案：";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Must contain `{question}` and `{choices}`.
    pub template: String,
    pub system: String,
    /// Number of solved examples prepended from the dev set.
    pub shots: usize,
    /// A run fails when more than this fraction of items errored.
    pub max_error_rate: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            template: DEFAULT_TEMPLATE.into(),
            system: crate::tool::GENERAL_SYSTEM_PROMPT.into(),
            shots: 0,
            max_error_rate: 0.1,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for slot in ["{question}", "{choices}"] {
            if !self.template.contains(slot) {
                return Err(Error::config(format!(
                    "eval template lacks the {slot} slot"
                )));
            }
        }
        Ok(())
    }

    fn render(&self, item: &McqItem) -> String {
        self.template
            .replace("{question}", &item.question)
            .replace("{choices}", &item.render_choices())
    }

    pub fn prompt(&self, item: &McqItem, dev: &[McqItem]) -> String {
        let mut out = String::new();
        for ex in dev.iter().take(self.shots) {
            out.push_str(&self.render(ex));
            out.push_str(&ex.gold);
            out.push_str("\n\n");
        }
        out.push_str(&self.render(item));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    pub category: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub n: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category_accuracy: BTreeMap<String, f64>,
    pub per_category: BTreeMap<String, CategoryCount>,
    pub overall_accuracy: f64,
    pub n_items: usize,
    pub n_correct: usize,
    pub n_unparseable: usize,
    pub n_errored: usize,
}

impl EvalReport {
    pub fn from_results(results: &[ItemResult]) -> Self {
        let mut per_category: BTreeMap<String, CategoryCount> = BTreeMap::new();
        for r in results {
            let c = per_category.entry(r.category.clone()).or_default();
            c.n += 1;
            c.correct += usize::from(r.correct);
        }
        let n_correct = results.iter().filter(|r| r.correct).count();
        EvalReport {
            per_category_accuracy: per_category
                .iter()
                .map(|(k, c)| (k.clone(), c.correct as f64 / c.n as f64))
                .collect(),
            per_category,
            overall_accuracy: if results.is_empty() {
                0.0
            } else {
                n_correct as f64 / results.len() as f64
            },
            n_items: results.len(),
            n_correct,
            n_unparseable: results
                .iter()
                .filter(|r| r.error.is_none() && r.predicted.is_none())
                .count(),
            n_errored: results.iter().filter(|r| r.error.is_some()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub report: EvalReport,
    pub items: Vec<ItemResult>,
}

/// Asks the model every item and scores the extracted letters. Errored and
/// unparseable items count as incorrect.
pub fn evaluate_mcq(
    items: &[McqItem],
    dev: &[McqItem],
    model: &dyn ChatProvider,
    cfg: &EvalConfig,
) -> Result<EvalRun> {
    cfg.validate()?;
    if cfg.shots > dev.len() {
        return Err(Error::config(format!(
            "{} shots requested but the dev set has {} items",
            cfg.shots,
            dev.len()
        )));
    }
    for it in items.iter().chain(dev) {
        it.validate()?;
    }
    let results: Vec<ItemResult> = items
        .par_iter()
        .map(|it| {
            let prompt = cfg.prompt(it, dev);
            let base = ItemResult {
                id: it.id.clone(),
                category: it.category.clone(),
                gold: it.gold.clone(),
                predicted: None,
                correct: false,
                output: None,
                error: None,
            };
            match model.chat(&cfg.system, &[ChatMessage::user(prompt)]) {
                Ok(out) => {
                    let predicted = extract_choice(&out, &it.choices);
                    ItemResult {
                        correct: predicted.as_deref() == Some(it.gold.as_str()),
                        predicted,
                        output: Some(out),
                        ..base
                    }
                }
                Err(e) => {
                    log::warn!("item {}: {e}", it.id);
                    ItemResult {
                        error: Some(e.to_string()),
                        ..base
                    }
                }
            }
        })
        .collect();
    let report = EvalReport::from_results(&results);
    if !items.is_empty() && report.n_errored as f64 > cfg.max_error_rate * items.len() as f64 {
        return Err(Error::data(format!(
            "{} of {} items errored (limit {:.0}%)",
            report.n_errored,
            items.len(),
            cfg.max_error_rate * 100.0
        )));
    }
    Ok(EvalRun {
        report,
        items: results,
    })
}
