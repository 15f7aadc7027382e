use std::collections::BTreeMap;
use std::io::Read;

use serde_json::Value;

use super::McqItem;
use crate::error::{Error, Result};

const LETTERS: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

/// Reads the common CSV layout with a header of `question`, option columns
/// `A`..`E`, `answer`, and optional `id` and `category` columns. Rows
/// without an id get `{prefix}-{row}`.
pub fn convert_csv<R: Read>(
    reader: R,
    prefix: &str,
    default_category: &str,
) -> Result<Vec<McqItem>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let csv_err = |e: csv::Error| Error::data(format!("csv: {e}"));
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let q = col("question").ok_or_else(|| Error::Schema(vec!["question".into()]))?;
    let a = col("answer").ok_or_else(|| Error::Schema(vec!["answer".into()]))?;
    let id = col("id");
    let cat = col("category");
    let opts: Vec<(&str, usize)> = LETTERS
        .iter()
        .filter_map(|l| col(l).map(|i| (*l, i)))
        .collect();
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let get = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let choices: BTreeMap<String, String> = opts
            .iter()
            .map(|(l, i)| (l.to_string(), get(*i)))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        let item = McqItem {
            id: id
                .map(get)
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| format!("{prefix}-{}", row + 1)),
            question: get(q),
            choices,
            gold: get(a).to_ascii_uppercase(),
            category: cat
                .map(get)
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| default_category.to_string()),
        };
        item.validate()?;
        out.push(item);
    }
    Ok(out)
}

/// Converts one JSON object whose `choices` is a list (lettered in order)
/// and whose `answer` is a letter or a 0-based index.
pub fn convert_json_value(v: &Value, fallback_id: &str, default_category: &str) -> Result<McqItem> {
    let get_str = |k: &str| v.get(k).and_then(Value::as_str).map(str::trim);
    let question = get_str("question").ok_or_else(|| Error::Schema(vec!["question".into()]))?;
    let list = v
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Schema(vec!["choices".into()]))?;
    if list.len() > LETTERS.len() {
        return Err(Error::record(fallback_id, "too many choices"));
    }
    let choices: BTreeMap<String, String> = list
        .iter()
        .zip(LETTERS)
        .map(|(c, l)| {
            let text = match c {
                Value::String(s) => s.trim().to_string(),
                other => other.to_string(),
            };
            (l.to_string(), text)
        })
        .collect();
    let gold = match v.get("answer") {
        Some(Value::String(s)) => s.trim().to_ascii_uppercase(),
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(|i| LETTERS.get(i as usize))
            .ok_or_else(|| Error::record(fallback_id, format!("answer index {n} out of range")))?
            .to_string(),
        _ => return Err(Error::Schema(vec!["answer".into()])),
    };
    let item = McqItem {
        id: get_str("id")
            .map(str::to_string)
            .unwrap_or_else(|| fallback_id.to_string()),
        question: question.to_string(),
        choices,
        gold,
        category: get_str("category")
            .or_else(|| get_str("subject"))
            .unwrap_or(default_category)
            .to_string(),
    };
    item.validate()?;
    Ok(item)
}
