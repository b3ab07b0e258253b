//! User Lagrangian expressions over `x0..x3` and `w0..w3`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] integer)?
//! atom   := number [unit] | variable | ('sqrt' | 'abs2') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Units come from the closed literal set `s`, `m`, `s/m2`, `1/s`,
//! `dimensionless`; a bare number is dimensionless. The expression is the
//! Lagrangian on V(1), so `w` stands for an absolute velocity there.

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::quantities::{Dim, UNIT_SUFFIXES};
use crate::spacetime::ModelKind;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X(usize),
    W(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sqrt(Box<Expr>),
    Abs2(Box<Expr>),
}

impl Expr {
    pub fn eval<S: Scalar>(&self, x: &[S; 4], w: &[S; 4]) -> S {
        match self {
            Expr::Const(c) => S::cst(*c),
            Expr::X(i) => x[*i],
            Expr::W(i) => w[*i],
            Expr::Neg(a) => -a.eval(x, w),
            Expr::Add(a, b) => a.eval(x, w) + b.eval(x, w),
            Expr::Sub(a, b) => a.eval(x, w) - b.eval(x, w),
            Expr::Mul(a, b) => a.eval(x, w) * b.eval(x, w),
            Expr::Div(a, b) => a.eval(x, w) / b.eval(x, w),
            Expr::Pow(a, n) => a.eval(x, w).powi(*n),
            Expr::Sqrt(a) => a.eval(x, w).sqrt(),
            Expr::Abs2(a) => {
                let v = a.eval(x, w);
                v * v
            }
        }
    }
}

/// Parsed expression with its constant dimensions, ready for checking.
#[derive(Debug, Clone, PartialEq)]
pub struct UserExpression {
    pub source: String,
    expr: Expr,
    // dims of constants in order of appearance
    const_dims: Vec<Dim>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, Option<Dim>),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| Error::parse(format!("bad number '{text}'")))?;
            // optional unit, possibly after one space
            let mut k = i;
            if k < chars.len() && chars[k] == ' ' {
                k += 1;
            }
            let rest: String = chars[k..].iter().collect();
            let mut unit = None;
            for (suffix, dim) in UNIT_SUFFIXES {
                if let Some(after) = rest.strip_prefix(suffix) {
                    let boundary = after.chars().next().is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
                    // "1/s" only as a separate token after a space
                    let spaced_ok = suffix != "1/s" || k > i;
                    if boundary && spaced_ok {
                        unit = Some(dim);
                        i = k + suffix.chars().count();
                        break;
                    }
                }
            }
            out.push(Tok::Num(value, unit));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::parse(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    const_dims: Vec<Dim>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(Error::parse(format!("expected '{op}' at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_op('^') {
            let neg = self.eat_op('-');
            match self.peek().cloned() {
                Some(Tok::Num(v, None)) if v.fract() == 0.0 && v.abs() < 64.0 => {
                    self.pos += 1;
                    let n = if neg { -(v as i32) } else { v as i32 };
                    return Ok(Expr::Pow(Box::new(base), n));
                }
                _ => return Err(Error::parse("exponent must be an integer literal")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v, dim)) => {
                self.pos += 1;
                self.const_dims.push(dim.unwrap_or(Dim::DIMENSIONLESS));
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "sqrt" | "abs2" => {
                        self.expect_op('(')?;
                        let inner = self.expr()?;
                        self.expect_op(')')?;
                        Ok(if name == "sqrt" {
                            Expr::Sqrt(Box::new(inner))
                        } else {
                            Expr::Abs2(Box::new(inner))
                        })
                    }
                    _ => {
                        let slot = |p: &str| {
                            name.strip_prefix(p)
                                .and_then(|d| d.parse::<usize>().ok())
                                .filter(|&d| d < 4)
                        };
                        if let Some(i) = slot("x") {
                            Ok(Expr::X(i))
                        } else if let Some(i) = slot("w") {
                            Ok(Expr::W(i))
                        } else {
                            Err(Error::parse(format!("unknown identifier '{name}'")))
                        }
                    }
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            other => Err(Error::parse(format!("unexpected token {other:?}"))),
        }
    }
}

impl UserExpression {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { toks: tokenize(src)?, pos: 0, const_dims: Vec::new() };
        let expr = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::parse(format!("trailing input in expression '{src}'")));
        }
        Ok(UserExpression { source: src.to_string(), expr, const_dims: p.const_dims })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Dimension of the expression on V(1) in the given model.
    pub fn dimension(&self, model: ModelKind) -> Result<Dim> {
        let mut consts = self.const_dims.iter().copied();
        let d = infer(&self.expr, model, &mut consts)?;
        Ok(match model {
            ModelKind::Relativistic => d.collapse_relativistic(),
            ModelKind::NonRelativistic => d,
        })
    }
}

fn infer(e: &Expr, model: ModelKind, consts: &mut impl Iterator<Item = Dim>) -> Result<Dim> {
    let coll = |d: Dim| match model {
        ModelKind::Relativistic => d.collapse_relativistic(),
        ModelKind::NonRelativistic => d,
    };
    Ok(match e {
        Expr::Const(_) => coll(consts.next().expect("one dim per constant")),
        Expr::X(i) => model.slot_dim(Dim::DIMENSIONLESS, *i),
        Expr::W(i) => model.slot_dim(Dim::PER_SECOND, *i),
        Expr::Neg(a) => infer(a, model, consts)?,
        Expr::Abs2(a) => infer(a, model, consts)?.powi(2),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let (da, db) = (infer(a, model, consts)?, infer(b, model, consts)?);
            if da != db {
                return Err(Error::DimensionMismatch { lhs: da, rhs: db });
            }
            da
        }
        Expr::Mul(a, b) => infer(a, model, consts)? * infer(b, model, consts)?,
        Expr::Div(a, b) => infer(a, model, consts)? / infer(b, model, consts)?,
        Expr::Pow(a, n) => infer(a, model, consts)?.powi(*n),
        Expr::Sqrt(a) => infer(a, model, consts)?.sqrt(),
    })
}
