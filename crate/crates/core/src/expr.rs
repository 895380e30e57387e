//! Closed-form expressions over the variables `x` and `t`.
//!
//! Covers the input grammar of the harness: polynomials, `sin`/`cos`/`exp`
//! of sub-expressions, the constants `pi` and `e`, and the usual arithmetic
//! operators including integer powers. Deliberately not a general expression
//! engine.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    X,
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Evaluate with both variables bound.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::T) => t,
            Expr::Neg(e) => -e.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(e, k) => e.eval(x, t).powi(*k),
            Expr::Sin(e) => e.eval(x, t).sin(),
            Expr::Cos(e) => e.eval(x, t).cos(),
            Expr::Exp(e) => e.eval(x, t).exp(),
        }
    }

    /// Evaluate an expression of one spatial variable.
    pub fn eval_x(&self, x: f64) -> f64 {
        self.eval(x, 0.0)
    }

    /// Evaluate an expression of one time variable.
    pub fn eval_t(&self, t: f64) -> f64 {
        self.eval(0.0, t)
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Sin(e) | Expr::Cos(e) | Expr::Exp(e) => {
                e.uses(var)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses(var) || b.uses(var)
            }
        }
    }

    /// Parse an expression from text, e.g. `"sin(pi*x)"` or `"1 + t/2"`.
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser { chars: text.as_bytes(), pos: 0 };
        let e = p.expression()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input at byte {} of {text:?}",
                p.pos
            )));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(e, k) => write!(f, "{e}^{k}"),
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
        }
    }
}

struct Parser<'a> {
    chars: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expression(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let start = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(Error::Expression("expected integer exponent after ^".into()));
            }
            let digits = std::str::from_utf8(&self.chars[start..self.pos]).unwrap();
            let mut k: i32 = digits
                .parse()
                .map_err(|_| Error::Expression(format!("bad exponent {digits:?}")))?;
            if neg {
                k = -k;
            }
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expression()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Expression("missing closing parenthesis".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self
                    .chars
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == b'-' || d == b'+')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.chars[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Expression(format!("bad number {text:?}")))
    }

    fn identifier(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.chars[start..self.pos]).unwrap();
        match name {
            "x" => Ok(Expr::Var(Var::X)),
            "t" => Ok(Expr::Var(Var::T)),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            "sin" | "cos" | "exp" => {
                if self.peek() != Some(b'(') {
                    return Err(Error::Expression(format!("{name} needs parentheses")));
                }
                self.pos += 1;
                let arg = self.expression()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Expression(format!("unclosed {name}(...)")));
                }
                self.pos += 1;
                let boxed = Box::new(arg);
                Ok(match name {
                    "sin" => Expr::Sin(boxed),
                    "cos" => Expr::Cos(boxed),
                    _ => Expr::Exp(boxed),
                })
            }
            other => Err(Error::Expression(format!("unknown identifier {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_grammar() {
        let cases: &[(&str, f64, f64, f64)] = &[
            ("sin(pi*x)", 0.5, 0.0, 1.0),
            ("x*(1-x)", 0.25, 0.0, 0.1875),
            ("1 + t/2", 0.0, 3.0, 2.5),
            ("exp(-t)*sin(pi*x)", 0.5, 0.0, 1.0),
            ("0.3", 0.9, 0.4, 0.3),
            ("x^2", 3.0, 0.0, 9.0),
            ("2*x^3 - x", 2.0, 0.0, 14.0),
            ("-x + 1", 0.25, 0.0, 0.75),
        ];
        for &(text, x, t, want) in cases {
            let e = Expr::parse(text).unwrap();
            assert!((e.eval(x, t) - want).abs() < 1e-12, "{text}");
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for text in ["sin(", "x +", "foo(x)", "1..2", "x^y", "(x"] {
            assert!(Expr::parse(text).is_err(), "{text} should fail");
        }
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("exp(-t) * sin(pi*x) + x^2").unwrap();
        let shown = e.to_string();
        let reparsed = Expr::parse(&shown).unwrap();
        assert!((reparsed.eval(0.3, 0.7) - e.eval(0.3, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn variable_usage() {
        let e = Expr::parse("exp(-t)*sin(pi*x)").unwrap();
        assert!(e.uses(Var::X) && e.uses(Var::T));
        assert!(!Expr::parse("0.3").unwrap().uses(Var::X));
    }
}
