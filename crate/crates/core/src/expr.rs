//! Whitelisted expression grammar for potentials and operator strings.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'pi' | 'e' | func '(' expr ')'
//!          | 'piecewise' '(' expr cmp expr ',' expr ',' expr ')'
//!          | '(' expr ')' | '|' expr '|'
//! func    := exp | sin | cos | log | abs | sign | sqrt | tanh
//! cmp     := '<' | '<=' | '>' | '>='
//! ```
//!
//! Nothing outside this grammar is accepted; in particular there are no
//! identifiers besides `x`, `pi`, `e` and the listed functions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcspace::RealFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Log,
    Abs,
    Sign,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "log" | "ln" => Func::Log,
            "abs" => Func::Abs,
            "sign" | "sgn" => Func::Sign,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Log => v.ln(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Func::Sqrt => v.sqrt(),
            Func::Tanh => v.tanh(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Parsed expression tree in the variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Piecewise {
        lhs: Box<Expr>,
        cmp: Cmp,
        rhs: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(x)),
            Expr::Piecewise {
                lhs,
                cmp,
                rhs,
                then,
                otherwise,
            } => {
                if cmp.holds(lhs.eval(x), rhs.eval(x)) {
                    then.eval(x)
                } else {
                    otherwise.eval(x)
                }
            }
        }
    }

    /// True when the expression does not depend on `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Piecewise {
                lhs,
                rhs,
                then,
                otherwise,
                ..
            } => lhs.is_constant() && rhs.is_constant() && then.is_constant() && otherwise.is_constant(),
        }
    }
}

// Integer exponents go through powi so that (-2)^3 stays real.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Piecewise {
                lhs,
                cmp,
                rhs,
                then,
                otherwise,
            } => write!(
                f,
                "piecewise({lhs} {} {rhs}, {then}, {otherwise})",
                cmp.symbol()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Bar,
    Comma,
    Cmp(Cmp),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part, only when followed by digits
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                column: col,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(v), col));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), col));
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '|' => Tok::Bar,
            ',' => Tok::Comma,
            '<' | '>' => {
                let eq = i + 1 < bytes.len() && bytes[i + 1] == b'=';
                let cmp = match (c, eq) {
                    ('<', false) => Cmp::Lt,
                    ('<', true) => Cmp::Le,
                    ('>', false) => Cmp::Gt,
                    _ => Cmp::Ge,
                };
                if eq {
                    i += 1;
                }
                Tok::Cmp(cmp)
            }
            other => {
                return Err(Error::Parse {
                    column: col,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push((tok, col));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
    // inside |...| a bar closes the group instead of opening a new one
    bar_depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            column: self.col(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            match self.peek() {
                Some(t) => {
                    let t = format!("{t:?}");
                    self.err(format!("expected {what}, found {t}"))
                }
                None => self.err(format!("expected {what}, found end of input")),
            }
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let saved = self.bar_depth;
                self.bar_depth = 0;
                let e = self.expr()?;
                self.bar_depth = saved;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Bar if self.bar_depth == 0 => {
                self.pos += 1;
                self.bar_depth += 1;
                let e = self.expr()?;
                self.bar_depth -= 1;
                self.expect(Tok::Bar, "closing '|'")?;
                Ok(Expr::Call(Func::Abs, Box::new(e)))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    "piecewise" => self.piecewise(),
                    other => match Func::from_name(other) {
                        Some(func) => {
                            self.expect(Tok::LParen, "'(' after function name")?;
                            let saved = self.bar_depth;
                            self.bar_depth = 0;
                            let arg = self.expr()?;
                            self.bar_depth = saved;
                            self.expect(Tok::RParen, "')'")?;
                            Ok(Expr::Call(func, Box::new(arg)))
                        }
                        None => {
                            self.pos -= 1;
                            self.err(format!("unknown identifier '{other}'"))
                        }
                    },
                }
            }
            other => self.err(format!("unexpected token {other:?}")),
        }
    }

    fn piecewise(&mut self) -> Result<Expr> {
        self.expect(Tok::LParen, "'(' after piecewise")?;
        let saved = self.bar_depth;
        self.bar_depth = 0;
        let lhs = self.expr()?;
        let cmp = match self.peek() {
            Some(Tok::Cmp(c)) => *c,
            _ => return self.err("expected comparison in piecewise condition"),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        self.expect(Tok::Comma, "','")?;
        let then = self.expr()?;
        self.expect(Tok::Comma, "','")?;
        let otherwise = self.expr()?;
        self.bar_depth = saved;
        self.expect(Tok::RParen, "')'")?;
        Ok(Expr::Piecewise {
            lhs: Box::new(lhs),
            cmp,
            rhs: Box::new(rhs),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        })
    }
}

/// Parses a potential expression in `x`.
pub fn parse(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(Error::Parse {
            column: 1,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: src.len() + 1,
        bar_depth: 0,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        let t = format!("{:?}", p.toks[p.pos].0);
        return p.err(format!("trailing input starting at {t}"));
    }
    Ok(e)
}

/// Parses `src` and wraps it as a labelled real function.
pub fn parse_fn(src: &str) -> Result<RealFn> {
    let e = Arc::new(parse(src)?);
    let label = src.trim().to_string();
    Ok(RealFn::new(label, move |x| e.eval(x)))
}

/// Differential part of an operator string such as `i_d_dx + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffPart {
    /// `i d/dx`
    FirstOrder,
    /// `-d²/dx²`
    SecondOrder,
}

/// An operator string split into its differential part and potential.
#[derive(Debug, Clone)]
pub struct OperatorExpr {
    pub diff: DiffPart,
    pub potential: RealFn,
}

/// Parses `i_d_dx [± expr]` or `-d2_dx2 [± expr]`.
pub fn parse_operator(src: &str) -> Result<OperatorExpr> {
    let s = src.trim();
    let (diff, rest) = if let Some(r) = s.strip_prefix("i_d_dx") {
        (DiffPart::FirstOrder, r)
    } else if let Some(r) = s.strip_prefix("-d2_dx2") {
        (DiffPart::SecondOrder, r)
    } else {
        return Err(Error::Parse {
            column: 1,
            message: format!("operator must start with 'i_d_dx' or '-d2_dx2', got '{s}'"),
        });
    };
    let offset = src.len() - src.trim_start().len() + (s.len() - rest.len());
    let rest_trim = rest.trim();
    if rest_trim.is_empty() {
        return Ok(OperatorExpr {
            diff,
            potential: RealFn::zero(),
        });
    }
    let lead = rest.len() - rest.trim_start().len();
    let (negate, body) = if let Some(b) = rest_trim.strip_prefix('+') {
        (false, b)
    } else if let Some(b) = rest_trim.strip_prefix('-') {
        (true, b)
    } else {
        return Err(Error::Parse {
            column: offset + lead + 1,
            message: "expected '+' or '-' after the differential part".into(),
        });
    };
    let expr = parse(body).map_err(|e| match e {
        Error::Parse { column, message } => Error::Parse {
            column: column + offset + lead + 1,
            message,
        },
        other => other,
    })?;
    let label = body.trim().to_string();
    let potential = if negate {
        let e = Arc::new(expr);
        RealFn::new(format!("-({label})"), move |x| -e.eval(x))
    } else {
        let e = Arc::new(expr);
        RealFn::new(label, move |x| e.eval(x))
    };
    Ok(OperatorExpr { diff, potential })
}
