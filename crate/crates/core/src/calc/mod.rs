//! The calculator expression language used inside `[Calculator(expr)->result]`
//! markers: lexer, recursive-descent parser, evaluator and result display.
//!
//! See `docs/grammar.md` for the grammar.

mod ast;
mod eval;
mod lexer;
mod parser;

use thiserror::Error;

pub use ast::{BinOp, Expr, Func};
pub use eval::{eval_expr, format_display, CalcResult};
pub use parser::parse_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivZero,
    NegativeSqrt,
    LogDomain,
    Overflow,
    Invalid,
    RoundDigits,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::DivZero => "div_zero",
            DomainKind::NegativeSqrt => "negative_sqrt",
            DomainKind::LogDomain => "log_domain",
            DomainKind::Overflow => "overflow",
            DomainKind::Invalid => "invalid",
            DomainKind::RoundDigits => "round_digits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalcError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("`{name}` expects {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        name: String,
        expected: String,
        found: usize,
        offset: usize,
    },
    #[error("{} in `{node}`", .kind.as_str())]
    Domain { kind: DomainKind, node: String },
}

impl CalcError {
    /// Short machine-readable kind, used in `ERROR:<kind>` marker fills.
    pub fn kind(&self) -> &'static str {
        match self {
            CalcError::Domain { kind, .. } => kind.as_str(),
            _ => "parse",
        }
    }

    pub fn is_parse(&self) -> bool {
        !matches!(self, CalcError::Domain { .. })
    }
}

/// Parses and evaluates in one step.
pub fn evaluate(src: &str) -> Result<CalcResult, CalcError> {
    eval_expr(&parse_expr(src)?)
}

/// Renders `[Calculator(<expr_src>)-><display>]`, keeping the source text
/// byte-for-byte.
pub fn format_marker(expr_src: &str, result: &CalcResult) -> Result<String, CalcError> {
    parse_expr(expr_src)?;
    Ok(format!("[Calculator({expr_src})->{}]", result.display))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_format() {
        let four = evaluate("2+2").unwrap();
        assert_eq!(format_marker("2+2", &four).unwrap(), "[Calculator(2+2)->4]");
        let fv = evaluate("1000*(1+0.05)^2").unwrap();
        assert_eq!(
            format_marker("1000*(1+0.05)^2", &fv).unwrap(),
            "[Calculator(1000*(1+0.05)^2)->1102.5]"
        );
        assert_eq!(format_marker("", &four), Err(CalcError::Empty));
        assert!(format_marker("2+", &four).is_err());
    }

    #[test]
    fn error_kinds() {
        assert_eq!(evaluate("1/0").unwrap_err().kind(), "div_zero");
        assert_eq!(evaluate("1+").unwrap_err().kind(), "parse");
        assert!(evaluate("1+").unwrap_err().is_parse());
    }
}
