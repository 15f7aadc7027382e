use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

fn answer_cue() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?:答案是|答案为|正确答案(?:是|为)?)[\s:：]*[（(【\[]?\s*([A-Za-z])")
            .expect("static pattern")
    })
}

fn trim_punct(s: &str) -> &str {
    s.trim()
        .trim_end_matches(['。', '.', '！', '!', '；', ';'])
        .trim()
}

/// Picks the answer letter from a model reply.
///
/// Rules, first hit wins: a letter right after `答案是`/`答案为`/`正确答案`;
/// the first valid capital letter not adjacent to another ASCII letter or
/// digit; the reply equal to one choice's text. Never fails.
pub fn extract_choice(output: &str, choices: &BTreeMap<String, String>) -> Option<String> {
    let valid = |c: char| choices.contains_key(c.to_string().as_str());
    for cap in answer_cue().captures_iter(output) {
        let c = cap[1].chars().next()?.to_ascii_uppercase();
        if valid(c) {
            return Some(c.to_string());
        }
    }
    let chars: Vec<char> = output.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_ascii_uppercase() || !valid(c) {
            continue;
        }
        let before = i.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i + 1).copied();
        let bounded = |n: Option<char>| n.is_none_or(|n| !n.is_ascii_alphanumeric());
        if bounded(before) && bounded(after) {
            return Some(c.to_string());
        }
    }
    let reply = trim_punct(output);
    if reply.is_empty() {
        return None;
    }
    choices
        .iter()
        .find(|(_, text)| trim_punct(text) == reply)
        .map(|(k, _)| k.clone())
}
