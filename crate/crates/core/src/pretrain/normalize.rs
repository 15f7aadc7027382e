use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use super::DocumentRecord;

static BLANK_RUN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\n(?:[ \t]*\n){3,}").expect("static regex"));

/// Text normalization shared by corpus documents and instruction records.
///
/// CRLF becomes LF, control characters other than `\n` and `\t` are removed,
/// U+3000 becomes an ASCII space, the result is NFC-composed and runs of more
/// than two blank lines collapse to exactly two. Idempotent.
pub fn normalize_text(text: &str) -> String {
    let mut cleaned = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' | '\t' => cleaned.push(c),
            '\u{3000}' => cleaned.push(' '),
            c if c.is_control() => {}
            c => cleaned.push(c),
        }
    }
    // Composition runs after control removal: dropping a control character
    // can bring a combining mark next to its base.
    let composed: String = cleaned.nfc().collect();
    BLANK_RUN.replace_all(&composed, "\n\n\n").into_owned()
}

pub fn normalize_document(raw: DocumentRecord) -> DocumentRecord {
    DocumentRecord {
        text: normalize_text(&raw.text),
        ..raw
    }
}
