use super::CalcError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Number(f64),
    Percent(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Number(v) => format!("number {v}"),
            Tok::Percent(v) => format!("percentage {v}%"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Spanned {
    pub tok: Tok,
    /// Byte offset into the original (un-normalized) source.
    pub offset: usize,
}

/// Maps full-width forms and common math symbols to their ASCII spelling.
fn fold(c: char) -> char {
    match c {
        '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
        '\u{3000}' => ' ',
        '×' | '·' => '*',
        '÷' => '/',
        '−' | '–' => '-',
        c => c,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Paren {
    Call,
    Group,
}

pub(super) fn tokenize(src: &str) -> Result<Vec<Spanned>, CalcError> {
    let chars: Vec<(usize, char)> = src.char_indices().map(|(i, c)| (i, fold(c))).collect();
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let offset_of = |i: usize| chars.get(i).map_or(src.len(), |&(o, _)| o);

    let mut out: Vec<Spanned> = Vec::new();
    let mut parens: Vec<Paren> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (offset, c) = chars[i];
        match c {
            c if c.is_whitespace() => {
                i += 1;
            }
            '0'..='9' | '.' => {
                // Thousands separators are only legal where a comma cannot be
                // an argument separator.
                let allow_commas = parens.last() != Some(&Paren::Call);
                let (text, next) = scan_number(&chars, i, allow_commas);
                let value: f64 = text.parse().map_err(|_| CalcError::Syntax {
                    offset,
                    message: format!("malformed number `{text}`"),
                })?;
                i = next;
                if at(i) == Some('%') {
                    i += 1;
                    out.push(Spanned {
                        tok: Tok::Percent(value),
                        offset,
                    });
                } else {
                    out.push(Spanned {
                        tok: Tok::Number(value),
                        offset,
                    });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while at(i).is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                out.push(Spanned {
                    tok: Tok::Ident(name.to_ascii_lowercase()),
                    offset,
                });
            }
            '*' if at(i + 1) == Some('*') => {
                out.push(Spanned {
                    tok: Tok::Caret,
                    offset,
                });
                i += 2;
            }
            _ => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => {
                        let kind = match out.last() {
                            Some(Spanned {
                                tok: Tok::Ident(_), ..
                            }) => Paren::Call,
                            _ => Paren::Group,
                        };
                        parens.push(kind);
                        Tok::LParen
                    }
                    ')' => {
                        parens.pop();
                        Tok::RParen
                    }
                    ',' => Tok::Comma,
                    other => {
                        return Err(CalcError::Syntax {
                            offset,
                            message: format!(
                                "unexpected character `{}`",
                                src[offset..].chars().next().unwrap_or(other)
                            ),
                        })
                    }
                };
                out.push(Spanned { tok, offset });
                i += 1;
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        offset: offset_of(chars.len()),
    });
    Ok(out)
}

/// Scans `digits[,ddd]*[.digits][e[+-]digits]` starting at `i` and returns
/// the literal with separators removed plus the index after it.
fn scan_number(chars: &[(usize, char)], mut i: usize, allow_commas: bool) -> (String, usize) {
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let digit_at = |i: usize| at(i).is_some_and(|c| c.is_ascii_digit());
    let mut text = String::new();
    let int_start = i;
    while digit_at(i) {
        text.push(at(i).unwrap());
        i += 1;
    }
    if allow_commas && i > int_start && i - int_start <= 3 {
        // `1,000` / `12,345,678`: each group exactly three digits
        while at(i) == Some(',')
            && digit_at(i + 1)
            && digit_at(i + 2)
            && digit_at(i + 3)
            && !digit_at(i + 4)
        {
            for k in 1..=3 {
                text.push(at(i + k).unwrap());
            }
            i += 4;
        }
    }
    if at(i) == Some('.') {
        text.push('.');
        i += 1;
        while digit_at(i) {
            text.push(at(i).unwrap());
            i += 1;
        }
    }
    if matches!(at(i), Some('e' | 'E')) {
        let mut j = i + 1;
        if matches!(at(j), Some('+' | '-')) {
            j += 1;
        }
        if digit_at(j) {
            text.extend(chars[i..j].iter().map(|&(_, c)| c));
            i = j;
            while digit_at(i) {
                text.push(at(i).unwrap());
                i += 1;
            }
        }
    }
    (text, i)
}
