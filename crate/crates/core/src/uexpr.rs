//! Weyl-invariant scalar expressions for the Ricci datum `u`.
//!
//! Expressions are polynomials in two invariants: `r2 = |x|²` and
//! `p = ∏_{α>0} α(x)²`. Anything built from these is invariant under the
//! Weyl group, so no runtime invariance check is needed.
//!
//! Grammar:
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '·') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'r2' | 'p' | '(' expr ')'
//! ```
//! The literal `zero` is accepted as an alias for `0`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum UExpr {
    Const(f64),
    /// `|x|²`
    R2,
    /// `∏_{α>0} α(x)²`
    P,
    Neg(Box<UExpr>),
    Add(Box<UExpr>, Box<UExpr>),
    Sub(Box<UExpr>, Box<UExpr>),
    Mul(Box<UExpr>, Box<UExpr>),
    Pow(Box<UExpr>, u32),
}

impl UExpr {
    pub fn zero() -> Self {
        UExpr::Const(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, UExpr::Const(c) if *c == 0.0)
    }

    pub fn parse(src: &str) -> Result<Self> {
        let trimmed = src.trim();
        if trimmed.eq_ignore_ascii_case("zero") {
            return Ok(UExpr::zero());
        }
        let tokens = tokenize(trimmed)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected token {:?} in `{src}`",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, r2: f64, p: f64) -> f64 {
        match self {
            UExpr::Const(c) => *c,
            UExpr::R2 => r2,
            UExpr::P => p,
            UExpr::Neg(a) => -a.eval(r2, p),
            UExpr::Add(a, b) => a.eval(r2, p) + b.eval(r2, p),
            UExpr::Sub(a, b) => a.eval(r2, p) - b.eval(r2, p),
            UExpr::Mul(a, b) => a.eval(r2, p) * b.eval(r2, p),
            UExpr::Pow(a, k) => a.eval(r2, p).powi(*k as i32),
        }
    }
}

impl fmt::Display for UExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UExpr::Const(c) => write!(f, "{c:?}"),
            UExpr::R2 => write!(f, "r2"),
            UExpr::P => write!(f, "p"),
            UExpr::Neg(a) => write!(f, "-({a})"),
            UExpr::Add(a, b) => write!(f, "({a} + {b})"),
            UExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            UExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            UExpr::Pow(a, k) => write!(f, "({a})^{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
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
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*·^()".contains(c) {
            out.push(Tok::Op(if c == '·' { '*' } else { c }));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<UExpr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                UExpr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                UExpr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<UExpr> {
        let mut lhs = self.unary()?;
        while self.peek_op() == Some('*') {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = UExpr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<UExpr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(UExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<UExpr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            match self.tokens.get(self.pos) {
                Some(Tok::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && *v <= 64.0 => {
                    self.pos += 1;
                    return Ok(UExpr::Pow(Box::new(base), *v as u32));
                }
                other => {
                    return Err(Error::Expression(format!(
                        "exponent must be a non-negative integer ≤ 64, got {other:?}"
                    )))
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<UExpr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(UExpr::Const(v)),
            Tok::Ident(name) => match name.as_str() {
                "r2" => Ok(UExpr::R2),
                "p" => Ok(UExpr::P),
                _ => Err(Error::Expression(format!(
                    "unknown symbol `{name}` (only r2 and p are invariant)"
                ))),
            },
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(Error::Expression("missing `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Expression(format!("unexpected `{c}`"))),
        }
    }
}
