use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exact(usize),
    AtLeast(usize),
}

impl Arity {
    fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exact(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Ln,
    Log10,
    Exp,
    Pow,
    Round,
    Min,
    Max,
}

/// Function registry: name and arity.
const REGISTRY: &[(Func, &str, Arity)] = &[
    (Func::Sqrt, "sqrt", Arity::Exact(1)),
    (Func::Abs, "abs", Arity::Exact(1)),
    (Func::Ln, "ln", Arity::Exact(1)),
    (Func::Log10, "log10", Arity::Exact(1)),
    (Func::Exp, "exp", Arity::Exact(1)),
    (Func::Pow, "pow", Arity::Exact(2)),
    (Func::Round, "round", Arity::Exact(2)),
    (Func::Min, "min", Arity::AtLeast(2)),
    (Func::Max, "max", Arity::AtLeast(2)),
];

impl Func {
    pub fn lookup(name: &str) -> Option<Func> {
        REGISTRY
            .iter()
            .find(|(_, n, _)| *n == name)
            .map(|(f, _, _)| *f)
    }

    fn entry(self) -> &'static (Func, &'static str, Arity) {
        REGISTRY
            .iter()
            .find(|(f, _, _)| *f == self)
            .expect("registered")
    }

    pub fn name(self) -> &'static str {
        self.entry().1
    }

    pub fn arity(self) -> Arity {
        self.entry().2
    }

    pub fn accepts(self, n: usize) -> bool {
        self.arity().accepts(n)
    }

    pub fn all() -> impl Iterator<Item = Func> {
        REGISTRY.iter().map(|(f, _, _)| *f)
    }
}

/// Parsed expression. Parentheses written in the source are kept as
/// `Group` nodes so printing reproduces the parsed structure.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    /// `x%`, holding `x`; evaluates to `x / 100`.
    Percent(f64),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Group(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Percent(v) => write!(f, "{v}%"),
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Binary(op, l, r) => write!(f, "{l}{}{r}", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Group(e) => write!(f, "({e})"),
        }
    }
}
