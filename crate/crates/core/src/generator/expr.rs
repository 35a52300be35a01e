//! Small arithmetic grammar for generators and terminal values.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary ('*' unary)*
//! unary := '-' unary | atom
//! atom  := number | var | ('min' | 'max') '(' expr ',' expr ')' | '(' expr ')'
//! var   := t | y | z | b | a
//! ```
//!
//! `b` and `a` stand for the terminal driver values `B_T` and `A_T` and are
//! only meaningful in terminal expressions.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    Y,
    Z,
    B,
    A,
}

impl Var {
    fn name(self) -> char {
        match self {
            Var::T => 't',
            Var::Y => 'y',
            Var::Z => 'z',
            Var::B => 'b',
            Var::A => 'a',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

/// Variable assignment for [`Expr::eval`]; unset variables read as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<T> {
    pub t: T,
    pub y: T,
    pub z: T,
    pub b: T,
    pub a: T,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval<T: Scalar>(&self, env: &Env<T>) -> T {
        match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Var(v) => match v {
                Var::T => env.t,
                Var::Y => env.y,
                Var::Z => env.z,
                Var::B => env.b,
                Var::A => env.a,
            },
            Expr::Neg(e) => -e.eval(env),
            Expr::Add(l, r) => l.eval(env) + r.eval(env),
            Expr::Sub(l, r) => l.eval(env) - r.eval(env),
            Expr::Mul(l, r) => l.eval(env) * r.eval(env),
            Expr::Min(l, r) => l.eval(env).min(r.eval(env)),
            Expr::Max(l, r) => l.eval(env).max(r.eval(env)),
        }
    }

    /// Whether `v` occurs anywhere in the expression.
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(e) => e.uses(v),
            Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Min(l, r)
            | Expr::Max(l, r) => l.uses(v) || r.uses(v),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Sub(l, r) => write!(f, "({l} - {r})"),
            Expr::Mul(l, r) => write!(f, "({l} * {r})"),
            Expr::Min(l, r) => write!(f, "min({l}, {r})"),
            Expr::Max(l, r) => write!(f, "max({l}, {r})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} at offset {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.eat(b'*') {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match word {
                    "t" => Ok(Expr::Var(Var::T)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "z" => Ok(Expr::Var(Var::Z)),
                    "b" => Ok(Expr::Var(Var::B)),
                    "a" => Ok(Expr::Var(Var::A)),
                    "min" | "max" => {
                        self.expect(b'(')?;
                        let l = self.expr()?;
                        self.expect(b',')?;
                        let r = self.expr()?;
                        self.expect(b')')?;
                        let (l, r) = (Box::new(l), Box::new(r));
                        Ok(if word == "min" {
                            Expr::Min(l, r)
                        } else {
                            Expr::Max(l, r)
                        })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{word}'")))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            digits(self);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Expression(format!("bad number '{text}' at offset {start}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, y: f64) -> f64 {
        Expr::parse(src).unwrap().eval(&Env {
            t: 0.5,
            y,
            z: 2.0,
            b: -1.0,
            a: 3.0,
        })
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(ev("1 + 2 * y", 3.0), 7.0);
        assert_eq!(ev("-y - -2", 3.0), -1.0);
        assert_eq!(ev("(1 + 2) * y", 3.0), 9.0);
        assert_eq!(ev("max(min(b, 1), -0.5)", 0.0), -0.5);
        assert_eq!(ev("t * z + a", 0.0), 4.0);
        assert_eq!(ev("1e-1 * 20", 0.0), 2.0);
        assert_eq!(ev("1 - y - y", 1.0), -1.0);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1 +", "sin(y)", "min(y)", "(y", "y y", "2 / y"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Expression(_))), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for src in ["-y + 0.5 * z", "max(-1, min(b, 1))", "1 - t * y * y", "-(2.5)"] {
            let e = Expr::parse(src).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            for &y in &[-2.0, 0.3, 4.0] {
                assert_eq!(ev(src, y), ev(&again.to_string(), y));
            }
        }
    }
}
