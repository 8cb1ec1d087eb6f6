//! Small arithmetic language for forcing terms, kernels and nonlinearities.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := ("-" | "+") unary | atom
//! atom   := number | "t" | "s" | "u" | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "atan" | "exp"
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    S,
    U,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::S => "s",
            Var::U => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Atan,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Atan => "atan",
            Func::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values for the three identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bindings<S> {
    pub t: S,
    pub s: S,
    pub u: S,
}

impl<S: Scalar> Bindings<S> {
    pub fn t(t: S) -> Self {
        Bindings {
            t,
            s: S::zero(),
            u: S::zero(),
        }
    }

    pub fn s(s: S) -> Self {
        Bindings {
            t: S::zero(),
            s,
            u: S::zero(),
        }
    }

    pub fn ts(t: S, s: S) -> Self {
        Bindings { t, s, u: S::zero() }
    }

    pub fn su(s: S, u: S) -> Self {
        Bindings { t: S::zero(), s, u }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let value = text.parse::<f64>().map_err(|_| {
                Error::Expression(format!("bad number '{text}' at column {}", start + 1))
            })?;
            out.push((start, Token::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if matches!(c, '+' | '-' | '*' | '/') {
            out.push((i, Token::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Token::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Token::RParen));
            i += 1;
        } else {
            return Err(Error::Expression(format!(
                "unexpected character '{c}' at column {}",
                i + 1
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    allowed: &'a [Var],
    src_len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(c, _)| c + 1)
            .unwrap_or(self.src_len + 1)
    }

    fn err(&self, what: &str) -> Error {
        Error::Expression(format!("{what} at column {}", self.column()))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                let var = match name.as_str() {
                    "t" => Some(Var::T),
                    "s" => Some(Var::S),
                    "u" => Some(Var::U),
                    _ => None,
                };
                if let Some(var) = var {
                    if !self.allowed.contains(&var) {
                        return Err(self.err(&format!("variable '{name}' not allowed here")));
                    }
                    self.pos += 1;
                    return Ok(Expr::Var(var));
                }
                let func = match name.as_str() {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "atan" => Func::Atan,
                    "exp" => Func::Exp,
                    _ => return Err(self.err(&format!("unknown identifier '{name}'"))),
                };
                self.pos += 1;
                if self.peek() != Some(&Token::LParen) {
                    return Err(self.err(&format!("expected '(' after '{name}'")));
                }
                self.pos += 1;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.err("unexpected token")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() != Some(&Token::RParen) {
            return Err(self.err("expected ')'"));
        }
        self.pos += 1;
        Ok(())
    }
}

impl Expr {
    /// Parses `src`, accepting only the listed identifiers.
    pub fn parse(src: &str, allowed: &[Var]) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            allowed,
            src_len: src.len(),
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn eval<S: Scalar>(&self, b: &Bindings<S>) -> Result<S> {
        Ok(match self {
            Expr::Num(v) => S::lit(*v),
            Expr::Var(Var::T) => b.t,
            Expr::Var(Var::S) => b.s,
            Expr::Var(Var::U) => b.u,
            Expr::Neg(e) => -e.eval(b)?,
            Expr::Bin(op, l, r) => {
                let l = l.eval(b)?;
                let r = r.eval(b)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == S::zero() {
                            return Err(Error::Expression(format!(
                                "division by zero in '{self}' at t={}, s={}, u={}",
                                b.t, b.s, b.u
                            )));
                        }
                        l / r
                    }
                }
            }
            Expr::Call(f, e) => {
                let x = e.eval(b)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Atan => x.atan(),
                    Func::Exp => x.exp(),
                }
            }
        })
    }

    /// True when some divisor evaluates to exactly zero at one of the given
    /// bindings.
    pub fn has_vanishing_divisor<S: Scalar>(&self, points: &[Bindings<S>]) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.has_vanishing_divisor(points),
            Expr::Bin(op, l, r) => {
                (*op == BinOp::Div
                    && points
                        .iter()
                        .any(|p| matches!(r.eval(p), Ok(v) if v == S::zero())))
                    || l.has_vanishing_divisor(points)
                    || r.has_vanishing_divisor(points)
            }
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(var),
            Expr::Bin(_, l, r) => l.uses(var) || r.uses(var),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}
