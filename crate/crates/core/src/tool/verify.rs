use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::marker::scan_markers;
use crate::calc;
use crate::sft::InstructionRecord;

/// Ordered from best to worst; a record reports its worst marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyStatus {
    Ok,
    Mismatch,
    DomainError,
    ParseError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-6,
            abs: 0.005,
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, claimed: f64, evaluated: f64) -> bool {
        (claimed - evaluated).abs() <= (self.rel * evaluated.abs()).max(self.abs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub record_id: String,
    pub status: VerifyStatus,
    pub markers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_diff: Option<f64>,
}

/// Reads a claimed result: optional thousands commas and a trailing `%`.
pub fn parse_claimed(s: &str) -> Option<f64> {
    let s = s.trim();
    let (body, scale) = match s.strip_suffix('%') {
        Some(b) => (b.trim_end(), 0.01),
        None => (s, 1.0),
    };
    let cleaned: String = body.chars().filter(|&c| c != ',').collect();
    if cleaned.is_empty()
        || !cleaned.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
    {
        return None;
    }
    cleaned
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(|v| v * scale)
}

struct Check {
    status: VerifyStatus,
    expected: Option<String>,
    found: Option<String>,
    abs_diff: Option<f64>,
}

fn check_marker(m: &super::Marker, tol: &Tolerance) -> Check {
    let found = m.claimed.clone();
    if m.malformed.is_some() {
        return Check {
            status: VerifyStatus::ParseError,
            expected: None,
            found,
            abs_diff: None,
        };
    }
    let result = match calc::evaluate(&m.expr_src) {
        Ok(r) => r,
        Err(e) => {
            return Check {
                status: if e.is_parse() {
                    VerifyStatus::ParseError
                } else {
                    VerifyStatus::DomainError
                },
                expected: None,
                found,
                abs_diff: None,
            }
        }
    };
    let claimed = found.as_deref().and_then(parse_claimed);
    let abs_diff = claimed.map(|c| (c - result.value).abs());
    let status = match claimed {
        Some(c) if tol.accepts(c, result.value) => VerifyStatus::Ok,
        _ => VerifyStatus::Mismatch,
    };
    Check {
        status,
        expected: Some(result.display),
        found,
        abs_diff,
    }
}

/// Verifies every marker in the record's answer.
pub fn verify_record(rec: &InstructionRecord, tol: &Tolerance) -> VerifyOutcome {
    let markers = scan_markers(&rec.answer);
    let mut worst: Option<Check> = None;
    for m in &markers {
        let c = check_marker(m, tol);
        if worst.as_ref().is_none_or(|w| c.status > w.status) {
            worst = Some(c);
        }
    }
    let w = worst.unwrap_or(Check {
        status: VerifyStatus::Ok,
        expected: None,
        found: None,
        abs_diff: None,
    });
    VerifyOutcome {
        record_id: rec.id.clone(),
        status: w.status,
        markers: markers.len(),
        expected: w.expected,
        found: w.found,
        abs_diff: w.abs_diff,
    }
}

/// Record-parallel verification; outcomes follow input order.
pub fn verify_examples(records: &[InstructionRecord], tol: &Tolerance) -> Vec<VerifyOutcome> {
    records.par_iter().map(|r| verify_record(r, tol)).collect()
}

/// Splits records into those that verified `ok` and the rest.
pub fn split_verified(
    records: Vec<InstructionRecord>,
    outcomes: &[VerifyOutcome],
) -> (Vec<InstructionRecord>, Vec<InstructionRecord>) {
    let mut ok = Vec::new();
    let mut rest = Vec::new();
    for (r, o) in records.into_iter().zip(outcomes) {
        if o.status == VerifyStatus::Ok {
            ok.push(r);
        } else {
            rest.push(r);
        }
    }
    (ok, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::{Annotations, Origin, TaskKind};

    fn rec(answer: &str) -> InstructionRecord {
        InstructionRecord {
            id: "c1".into(),
            task: TaskKind::Compute,
            instruction: "计算".into(),
            question: "q".into(),
            answer: answer.into(),
            origin: Origin::Seed,
            annotations: Annotations::default(),
        }
    }

    #[test]
    fn statuses() {
        let tol = Tolerance::default();
        let ok = verify_record(&rec("本息和[Calculator(1000*(1+0.05)^2)->1102.5]元"), &tol);
        assert_eq!(ok.status, VerifyStatus::Ok);
        let bad = verify_record(&rec("本息和[Calculator(1000*(1+0.05)^2)->1102.6]元"), &tol);
        assert_eq!(bad.status, VerifyStatus::Mismatch);
        assert!((bad.abs_diff.unwrap() - 0.1).abs() < 1e-9);
        assert_eq!(bad.expected.as_deref(), Some("1102.5"));
        let p = verify_record(&rec("[Calculator(1+)->2]"), &tol);
        assert_eq!(p.status, VerifyStatus::ParseError);
        let d = verify_record(&rec("[Calculator(1/0)->1]"), &tol);
        assert_eq!(d.status, VerifyStatus::DomainError);
    }

    #[test]
    fn worst_status_wins() {
        let r = rec(
            "[Calculator(1+1)->2] [Calculator(2*2)->5] [Calculator(1/0)->0] [Calculator(1+1)->2]",
        );
        assert_eq!(
            verify_record(&r, &Tolerance::default()).status,
            VerifyStatus::DomainError
        );
        let r = rec("[Calculator(1+1)->3] [Calculator(1+)->2]");
        assert_eq!(
            verify_record(&r, &Tolerance::default()).status,
            VerifyStatus::ParseError
        );
    }

    #[test]
    fn tolerance_floor() {
        let tol = Tolerance::default();
        assert_eq!(
            verify_record(&rec("[Calculator(10/3)->3.33]"), &tol).status,
            VerifyStatus::Ok
        );
        assert_eq!(
            verify_record(&rec("[Calculator(10/3)->3.32]"), &tol).status,
            VerifyStatus::Mismatch
        );
        assert_eq!(
            verify_record(&rec("[Calculator(5000*0.2)->1,000]"), &tol).status,
            VerifyStatus::Ok
        );
        assert_eq!(
            verify_record(&rec("[Calculator(0.05)->5%]"), &tol).status,
            VerifyStatus::Ok
        );
        assert_eq!(
            verify_record(&rec("[Calculator(2)->两]"), &tol).status,
            VerifyStatus::Mismatch
        );
    }

    #[test]
    fn split() {
        let records = vec![rec("[Calculator(1+1)->2]"), rec("[Calculator(1+1)->3]")];
        let outcomes = verify_examples(&records, &Tolerance::default());
        let (ok, bad) = split_verified(records, &outcomes);
        assert_eq!((ok.len(), bad.len()), (1, 1));
    }
}
