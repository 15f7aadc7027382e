use super::ast::{BinOp, Expr, Func};
use super::lexer::{tokenize, Spanned, Tok};
use super::CalcError;

/// Parses a calculator expression.
///
/// Precedence from loosest to tightest: `+ -`, `* /`, unary minus, `^`
/// (right-associative, its right operand may carry a sign).
pub fn parse_expr(src: &str) -> Result<Expr, CalcError> {
    if src.trim().is_empty() {
        return Err(CalcError::Empty);
    }
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(e),
        other => Err(p.syntax(format!(
            "expected operator or end of input, found {}",
            other.describe()
        ))),
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: String) -> CalcError {
        CalcError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), CalcError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn expr(&mut self) -> Result<Expr, CalcError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, CalcError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, CalcError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, CalcError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, CalcError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Number(v) => Ok(Expr::Number(v)),
            Tok::Percent(v) => Ok(Expr::Percent(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Group(Box::new(inner)))
            }
            Tok::Ident(name) => {
                let func = Func::lookup(&name).ok_or(CalcError::UnknownFunction {
                    name: name.clone(),
                    offset,
                })?;
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                if !func.accepts(args.len()) {
                    return Err(CalcError::Arity {
                        name,
                        expected: func.arity().to_string(),
                        found: args.len(),
                        offset,
                    });
                }
                Ok(Expr::Call(func, args))
            }
            other => Err(CalcError::Syntax {
                offset,
                message: format!("expected expression, found {}", other.describe()),
            }),
        }
    }
}
