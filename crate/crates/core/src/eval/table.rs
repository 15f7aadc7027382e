use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cell of a model-by-dataset results grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub dataset: String,
    /// Fraction in [0, 1]; rendered as a percentage.
    pub accuracy: f64,
}

fn ordered_unique<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    it.filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

fn display_width(s: &str) -> usize {
    // CJK ideographs and full-width forms take two terminal columns.
    s.chars()
        .map(|c| {
            if ('\u{1100}'..='\u{115f}').contains(&c)
                || ('\u{2e80}'..='\u{a4cf}').contains(&c)
                || ('\u{ac00}'..='\u{d7a3}').contains(&c)
                || ('\u{f900}'..='\u{faff}').contains(&c)
                || ('\u{fe30}'..='\u{fe4f}').contains(&c)
                || ('\u{ff00}'..='\u{ff60}').contains(&c)
                || ('\u{ffe0}'..='\u{ffe6}').contains(&c)
            {
                2
            } else {
                1
            }
        })
        .sum()
}

fn pad(s: &str, width: usize, right: bool) -> String {
    let fill = " ".repeat(width.saturating_sub(display_width(s)));
    if right {
        format!("{fill}{s}")
    } else {
        format!("{s}{fill}")
    }
}

/// Aligned text table: one row per model, one column per dataset, in first
/// appearance order. Accuracies are percentages with two decimals; missing
/// cells show `-`.
pub fn render_table(rows: &[ScoreRow]) -> Result<String> {
    let models = ordered_unique(rows.iter().map(|r| r.model.as_str()));
    let datasets = ordered_unique(rows.iter().map(|r| r.dataset.as_str()));
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in rows {
        if !(0.0..=1.0).contains(&r.accuracy) {
            return Err(Error::data(format!(
                "accuracy {} for {} / {} is outside [0, 1]",
                r.accuracy, r.model, r.dataset
            )));
        }
        if cells.insert((&r.model, &r.dataset), r.accuracy).is_some() {
            return Err(Error::data(format!(
                "duplicate cell {} / {}",
                r.model, r.dataset
            )));
        }
    }
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("Model".to_string())
        .chain(datasets.iter().cloned())
        .collect()];
    for m in &models {
        let mut line = vec![m.clone()];
        for d in &datasets {
            line.push(match cells.get(&(m.as_str(), d.as_str())) {
                Some(a) => format!("{:.2}", a * 100.0),
                None => "-".into(),
            });
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|c| {
            grid.iter()
                .map(|row| display_width(&row[c]))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let render_row = |row: &[String]| {
        row.iter()
            .enumerate()
            .map(|(c, s)| pad(s, widths[c], c > 0))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let rule = widths
        .iter()
        .map(|w| "-".repeat(*w))
        .collect::<Vec<_>>()
        .join("-+-");
    let mut out = render_row(&grid[0]);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for row in &grid[1..] {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    Ok(out)
}

/// Accuracy of one dataset at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub step: u64,
    pub dataset: String,
    pub accuracy: f64,
}

/// CSV time series for checkpoint sweeps: a `step` column then one column
/// per dataset, rows sorted by step.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let datasets: Vec<String> = points
        .iter()
        .map(|p| p.dataset.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut by_step: BTreeMap<u64, BTreeMap<&str, f64>> = BTreeMap::new();
    for p in points {
        by_step
            .entry(p.step)
            .or_default()
            .insert(&p.dataset, p.accuracy);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("step")
        .chain(datasets.iter().map(String::as_str))
        .collect();
    let csv_err = |e: csv::Error| Error::data(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for (step, vals) in &by_step {
        let mut rec = vec![step.to_string()];
        rec.extend(datasets.iter().map(|d| {
            vals.get(d.as_str())
                .map(|a| format!("{a:.4}"))
                .unwrap_or_default()
        }));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::data(e.to_string()))
}
