use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::calc;

pub const MARKER_OPEN: &str = "[Calculator(";
const ARROW: &str = "->";

/// A calculator marker candidate found in text.
///
/// `start..end` is the byte span in the scanned text. Well-formed markers
/// have `malformed == None`; `claimed` is the text between `->` and `]`, or
/// `None` when the text ends right after `->`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub start: usize,
    pub end: usize,
    pub expr_src: String,
    pub claimed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub malformed: Option<String>,
}

impl Marker {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }

    /// Well-formed with no result yet.
    pub fn is_unfilled(&self) -> bool {
        self.malformed.is_none() && self.claimed.as_deref().is_none_or(|c| c.trim().is_empty())
    }
}

/// Left-to-right scan for `[Calculator(` markers using parenthesis depth
/// counting. Malformed candidates are returned with a reason; spans are
/// disjoint and sorted.
pub fn scan_markers(text: &str) -> Vec<Marker> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(found) = text[pos..].find(MARKER_OPEN) {
        let start = pos + found;
        let marker = scan_one(text, start);
        pos = marker.end;
        out.push(marker);
    }
    out
}

fn scan_one(text: &str, start: usize) -> Marker {
    let expr_start = start + MARKER_OPEN.len();
    let malformed = |end: usize, expr_end: usize, reason: &str| Marker {
        start,
        end,
        expr_src: text[expr_start..expr_end.max(expr_start)].to_string(),
        claimed: None,
        malformed: Some(reason.to_string()),
    };
    let mut depth = 1usize;
    let mut close = None;
    for (off, c) in text[expr_start..].char_indices() {
        let i = expr_start + off;
        if text[i..].starts_with(MARKER_OPEN) {
            return malformed(i, i, "unbalanced parentheses");
        }
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            ']' => return malformed(i + 1, i, "unbalanced parentheses"),
            _ => {}
        }
    }
    let Some(close) = close else {
        return malformed(text.len(), text.len(), "unbalanced parentheses");
    };
    let expr_src = text[expr_start..close].to_string();
    let after = close + 1;
    if !text[after..].starts_with(ARROW) {
        return Marker {
            malformed: Some("missing `->`".into()),
            ..malformed(after, close, "")
        };
    }
    let res_start = after + ARROW.len();
    let rest = &text[res_start..];
    let stop = rest
        .char_indices()
        .find(|&(i, c)| c == ']' || c == '\n' || rest[i..].starts_with(MARKER_OPEN));
    match stop {
        Some((i, ']')) => Marker {
            start,
            end: res_start + i + 1,
            expr_src,
            claimed: Some(rest[..i].to_string()),
            malformed: None,
        },
        Some((0, _)) => open_marker(start, res_start, expr_src),
        None if rest.is_empty() => open_marker(start, res_start, expr_src),
        Some((i, _)) => Marker {
            start,
            end: res_start + i,
            expr_src,
            claimed: Some(rest[..i].to_string()),
            malformed: Some("missing `]`".into()),
        },
        None => Marker {
            start,
            end: text.len(),
            expr_src,
            claimed: Some(rest.to_string()),
            malformed: Some("missing `]`".into()),
        },
    }
}

fn open_marker(start: usize, end: usize, expr_src: String) -> Marker {
    Marker {
        start,
        end,
        expr_src,
        claimed: None,
        malformed: None,
    }
}

/// One calculator evaluation performed while filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub start: usize,
    pub expr_src: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Evaluation {
    pub fn run(start: usize, expr_src: &str) -> Self {
        match calc::evaluate(expr_src) {
            Ok(r) => Evaluation {
                start,
                expr_src: expr_src.to_string(),
                display: Some(r.display),
                error: None,
            },
            Err(e) => Evaluation {
                start,
                expr_src: expr_src.to_string(),
                display: None,
                error: Some(e.kind().to_string()),
            },
        }
    }

    /// The text written after `->`.
    pub fn result_text(&self) -> String {
        match (&self.display, &self.error) {
            (Some(d), _) => d.clone(),
            (None, Some(kind)) => format!("ERROR:{kind}"),
            (None, None) => String::new(),
        }
    }

    pub fn render(&self) -> String {
        format!("{MARKER_OPEN}{})->{}]", self.expr_src, self.result_text())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filled {
    pub text: String,
    pub evaluations: Vec<Evaluation>,
    /// Malformed markers, left as they were.
    pub malformed: Vec<Marker>,
}

/// Fills every well-formed marker that has no result. Markers with results
/// and malformed markers are left untouched, so filling is idempotent.
pub fn fill_markers(text: &str) -> Filled {
    let mut out = String::with_capacity(text.len() + 16);
    let mut evaluations = Vec::new();
    let mut malformed = Vec::new();
    let mut last = 0;
    for m in scan_markers(text) {
        if m.malformed.is_some() {
            malformed.push(m);
            continue;
        }
        if !m.is_unfilled() {
            continue;
        }
        out.push_str(&text[last..m.start]);
        let ev = Evaluation::run(m.start, &m.expr_src);
        out.push_str(&ev.render());
        evaluations.push(ev);
        last = m.end;
    }
    out.push_str(&text[last..]);
    Filled {
        text: out,
        evaluations,
        malformed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_marker() {
        let t = "设利息为[Calculator(1000*0.05)->50]元";
        let m = scan_markers(t);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].expr_src, "1000*0.05");
        assert_eq!(m[0].claimed.as_deref(), Some("50"));
        assert_eq!(&t[m[0].span()], "[Calculator(1000*0.05)->50]");
        assert!(scan_markers("no markers here").is_empty());
    }

    #[test]
    fn nested_parens() {
        let t = "[Calculator(max(2,3)*(4+1))->]";
        let m = scan_markers(t);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].expr_src, "max(2,3)*(4+1)");
        assert_eq!(m[0].claimed.as_deref(), Some(""));
        assert_eq!(fill_markers(t).text, "[Calculator(max(2,3)*(4+1))->15]");
    }

    #[test]
    fn fills_and_errors() {
        assert_eq!(
            fill_markers("[Calculator(2+2)->]").text,
            "[Calculator(2+2)->4]"
        );
        let f = fill_markers("[Calculator(1/0)->]");
        assert_eq!(f.text, "[Calculator(1/0)->ERROR:div_zero]");
        assert_eq!(f.evaluations[0].error.as_deref(), Some("div_zero"));
        let f = fill_markers("x=[Calculator(1+)->]");
        assert_eq!(f.text, "x=[Calculator(1+)->ERROR:parse]");
        // Open marker at end of text.
        assert_eq!(
            fill_markers("利息=[Calculator(1000*0.05)->").text,
            "利息=[Calculator(1000*0.05)->50]"
        );
    }

    #[test]
    fn malformed_reported() {
        let cases = [
            ("a[Calculator(1+(2)->3]b", "unbalanced parentheses"),
            ("a[Calculator(1+2)=3]b", "missing `->`"),
            ("a[Calculator(1+2->", "unbalanced parentheses"),
            ("a[Calculator(1+2)->3\nb", "missing `]`"),
        ];
        for (t, why) in cases {
            let m = scan_markers(t);
            assert_eq!(m.len(), 1, "{t}");
            assert_eq!(m[0].malformed.as_deref(), Some(why), "{t}");
            assert_eq!(fill_markers(t).text, t);
        }
    }

    #[test]
    fn restart_after_unbalanced() {
        let t = "[Calculator(1+(2 then [Calculator(3*4)->]";
        let m = scan_markers(t);
        assert_eq!(m.len(), 2);
        assert!(m[0].malformed.is_some());
        assert_eq!(m[1].expr_src, "3*4");
        assert!(fill_markers(t).text.ends_with("[Calculator(3*4)->12]"));
    }

    #[test]
    fn idempotent() {
        let t = "A[Calculator(2^10)->]B[Calculator(1/0)->]C[Calculator(3)->9]";
        let once = fill_markers(t).text;
        assert_eq!(fill_markers(&once).text, once);
        assert!(once.contains("->9]"));
    }
}
