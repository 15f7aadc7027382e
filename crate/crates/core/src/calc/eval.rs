use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, Func};
use super::{CalcError, DomainKind};

/// Largest |decimals| accepted by `round`.
const MAX_ROUND_DIGITS: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalcResult {
    pub value: f64,
    pub display: String,
}

impl CalcResult {
    pub fn new(value: f64) -> Self {
        CalcResult {
            value,
            display: format_display(value),
        }
    }
}

/// Renders a value with at most six decimals, trailing zeros trimmed.
///
/// When six decimals would move the value by more than 1e-9 relative (e.g.
/// 1/3 or very small magnitudes), more decimals are used until it does not.
pub fn format_display(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    let mut out = String::new();
    for decimals in 6..=40 {
        out = trim_decimals(format!("{value:.decimals$}"));
        let back: f64 = out.parse().unwrap_or(f64::NAN);
        if (back - value).abs() <= 1e-9 * value.abs() {
            break;
        }
    }
    out
}

fn trim_decimals(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn domain(kind: DomainKind, node: &Expr) -> CalcError {
    CalcError::Domain {
        kind,
        node: node.to_string(),
    }
}

fn checked(v: f64, node: &Expr) -> Result<f64, CalcError> {
    if v.is_nan() {
        Err(domain(DomainKind::Invalid, node))
    } else if v.is_infinite() {
        Err(domain(DomainKind::Overflow, node))
    } else {
        Ok(v)
    }
}

/// Half-away-from-zero rounding to `decimals` places.
///
/// Values whose scaled fraction is within floating-point noise of one half
/// (2.675 is stored as 2.67499999...) are treated as exact halves.
fn round_half_away(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let scaled = v * scale;
    let trunc = scaled.trunc();
    let frac = (scaled - trunc).abs();
    // ties within representation noise of .5 round away from zero
    let noise = (1e-12 * scaled.abs()).max(1e-9);
    let rounded = if (frac - 0.5).abs() <= noise {
        trunc + scaled.signum()
    } else {
        scaled.round()
    };
    rounded / scale
}

fn eval(e: &Expr) -> Result<f64, CalcError> {
    let v = match e {
        Expr::Number(v) => *v,
        Expr::Percent(v) => *v / 100.0,
        Expr::Neg(inner) => -eval(inner)?,
        Expr::Group(inner) => eval(inner)?,
        Expr::Binary(op, l, r) => {
            let a = eval(l)?;
            let b = eval(r)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(domain(DomainKind::DivZero, e));
                    }
                    a / b
                }
                BinOp::Pow => {
                    if a == 0.0 && b < 0.0 {
                        return Err(domain(DomainKind::DivZero, e));
                    }
                    a.powf(b)
                }
            }
        }
        Expr::Call(func, args) => {
            let xs = args.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
            match func {
                Func::Sqrt => {
                    if xs[0] < 0.0 {
                        return Err(domain(DomainKind::NegativeSqrt, e));
                    }
                    xs[0].sqrt()
                }
                Func::Abs => xs[0].abs(),
                Func::Ln | Func::Log10 => {
                    if xs[0] <= 0.0 {
                        return Err(domain(DomainKind::LogDomain, e));
                    }
                    if *func == Func::Ln {
                        xs[0].ln()
                    } else {
                        xs[0].log10()
                    }
                }
                Func::Exp => xs[0].exp(),
                Func::Pow => {
                    if xs[0] == 0.0 && xs[1] < 0.0 {
                        return Err(domain(DomainKind::DivZero, e));
                    }
                    xs[0].powf(xs[1])
                }
                Func::Round => {
                    let d = xs[1];
                    if d.fract() != 0.0 || d.abs() > MAX_ROUND_DIGITS {
                        return Err(domain(DomainKind::RoundDigits, e));
                    }
                    round_half_away(xs[0], d as i32)
                }
                Func::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
                Func::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        }
    };
    checked(v, e)
}

/// Evaluates in double precision. Division by zero, square roots of
/// negatives, logarithms of non-positive values and non-finite intermediate
/// results are domain errors naming the offending sub-expression.
pub fn eval_expr(expr: &Expr) -> Result<CalcResult, CalcError> {
    eval(expr).map(CalcResult::new)
}

#[cfg(test)]
mod tests {
    use super::super::{evaluate, parse_expr};
    use super::*;

    fn value(s: &str) -> f64 {
        evaluate(s).unwrap().value
    }

    #[test]
    fn basics() {
        assert_eq!(value("2+3*4"), 14.0);
        assert_eq!(value("5%"), 0.05);
        assert_eq!(value("-2^2"), -4.0);
        assert_eq!(value("2^3^2"), 512.0);
        assert_eq!(value("max(2,3)*(4+1)"), 15.0);
        assert_eq!(value("min(4,-1,3)"), -1.0);
        assert_eq!(value("sqrt(16)+abs(-2)+log10(1000)"), 9.0);
        assert_eq!(value("pow(2,10)"), 1024.0);
        assert_eq!(value("1,000*5%"), 50.0);
    }

    #[test]
    fn compound_interest() {
        // 1000 * 1.05 * 1.05 written out by hand
        let oracle = 1000.0 * (1.0 + 0.05) * (1.0 + 0.05);
        let r = evaluate("1000*(1+0.05)^2").unwrap();
        assert!((r.value - oracle).abs() <= 1e-9 * oracle);
        assert_eq!(r.display, "1102.5");
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(value("round(2.5,0)"), 3.0);
        assert_eq!(value("round(-2.5,0)"), -3.0);
        assert_eq!(value("round(2.675,2)"), 2.68);
        assert_eq!(value("round(1.005,2)"), 1.01);
        assert_eq!(value("round(1234.5678,-2)"), 1200.0);
        assert_eq!(value("round(2.4449,2)"), 2.44);
        assert_eq!(value("round(54071,4)"), 54071.0);
        assert_eq!(value("round(123456789.12345,4)"), 123456789.1235);
        assert_eq!(evaluate("round(1,0.5)").unwrap_err().kind(), "round_digits");
    }

    #[test]
    fn domain_errors() {
        let err = evaluate("1/0").unwrap_err();
        assert_eq!(
            err,
            CalcError::Domain {
                kind: DomainKind::DivZero,
                node: "1/0".into()
            }
        );
        assert_eq!(evaluate("2*(3/(1-1))").unwrap_err().kind(), "div_zero");
        assert_eq!(evaluate("sqrt(-1)").unwrap_err().kind(), "negative_sqrt");
        assert_eq!(evaluate("ln(0)").unwrap_err().kind(), "log_domain");
        assert_eq!(evaluate("log10(-5)").unwrap_err().kind(), "log_domain");
        assert_eq!(evaluate("exp(1000)").unwrap_err().kind(), "overflow");
        assert_eq!(evaluate("10^400").unwrap_err().kind(), "overflow");
        assert_eq!(evaluate("(-8)^(1/3)").unwrap_err().kind(), "invalid");
        assert_eq!(evaluate("0^-1").unwrap_err().kind(), "div_zero");
    }

    #[test]
    fn display_rules() {
        assert_eq!(format_display(4.0), "4");
        assert_eq!(format_display(1102.5), "1102.5");
        assert_eq!(format_display(-0.0), "0");
        assert_eq!(format_display(0.1 + 0.2), "0.3");
        assert_eq!(format_display(1.0 / 3.0), "0.333333333");
        assert_eq!(format_display(1.5e-12), "0.0000000000015");
        assert_eq!(format_display(-2.25), "-2.25");
        for v in [
            1.0 / 3.0,
            2.0f64.sqrt() * 1e7,
            1e-15,
            123456.789012345,
            -7.0 / 9.0,
            6.02e23,
        ] {
            let back: f64 = format_display(v).parse().unwrap();
            assert!((back - v).abs() <= 1e-9 * v.abs(), "{v}");
        }
    }

    #[test]
    fn parse_then_eval_full_width() {
        let e = parse_expr("１０００×（１＋５％）").unwrap();
        assert_eq!(eval_expr(&e).unwrap().value, 1050.0);
    }
}
