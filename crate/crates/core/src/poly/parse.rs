//! Infix polynomial grammar and its canonical printer.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' INTEGER)?
//! atom   := NUMBER | IDENT | '(' expr ')'
//! ```
//!
//! Division is accepted only by a nonzero constant. `-x^2` parses as
//! `-(x^2)`. Printed polynomials parse back to the same term map.

use std::fmt::{self, Write};
use std::sync::Arc;

use super::{MultiPoly, VarSpace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_EXPONENT: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
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
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((col, Tok::Num(text[start..i].to_string())));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((col, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((col, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse { column: col, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a, T> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end_col: usize,
    space: &'a Arc<VarSpace>,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> Parser<'_, T> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(c, _)| *c)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { column: self.col(), message: message.into() }
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<MultiPoly<T>> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = &acc + &self.term()?;
            } else if self.eat('-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<MultiPoly<T>> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.unary()?;
            } else if self.eat('/') {
                let col = self.col();
                let d = self.unary()?;
                let c = constant_value(&d).ok_or(Error::Parse {
                    column: col,
                    message: "division is only allowed by a constant".into(),
                })?;
                if c == T::zero() {
                    return Err(Error::Parse { column: col, message: "division by zero".into() });
                }
                acc = acc.map_coeffs(|v| *v / c);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<MultiPoly<T>> {
        if self.eat('-') {
            return Ok(-&self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<MultiPoly<T>> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let k = match self.peek() {
            Some(Tok::Num(s)) => s.parse::<u32>().map_err(|_| self.err("exponent must be a nonnegative integer"))?,
            _ => return Err(self.err("expected an integer exponent")),
        };
        if k > MAX_EXPONENT {
            return Err(self.err(format!("exponent exceeds {MAX_EXPONENT}")));
        }
        self.pos += 1;
        let mut out = MultiPoly::constant(self.space, T::one());
        for _ in 0..k {
            out = &out * &base;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<MultiPoly<T>> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                let v = T::from_str_radix(&s, 10).map_err(|_| self.err(format!("invalid number `{s}`")))?;
                self.pos += 1;
                Ok(MultiPoly::constant(self.space, v))
            }
            Some(Tok::Ident(name)) => {
                let i = self.space.index_of(&name).ok_or_else(|| self.err(format!("unknown variable `{name}`")))?;
                self.pos += 1;
                Ok(MultiPoly::var(self.space, i))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(inner)
            }
            Some(Tok::Op(c)) => Err(self.err(format!("unexpected `{c}`"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn constant_value<T: Scalar>(p: &MultiPoly<T>) -> Option<T> {
    match p.n_terms() {
        0 => Some(T::zero()),
        1 => {
            let (e, c) = p.terms().next()?;
            e.iter().all(|&k| k == 0).then_some(*c)
        }
        _ => None,
    }
}

pub(super) fn parse<T: Scalar>(space: &Arc<VarSpace>, text: &str) -> Result<MultiPoly<T>> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(Error::Parse { column: 1, message: "empty expression".into() });
    }
    let mut p = Parser { toks, pos: 0, end_col: text.len() + 1, space, _marker: std::marker::PhantomData };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

fn write_number<T: Scalar>(out: &mut String, v: T) {
    let a = v.abs().as_f64();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        write!(out, "{:e}", v.abs()).unwrap();
    } else {
        write!(out, "{}", v.abs()).unwrap();
    }
}

/// Terms in decreasing total degree, then decreasing exponent order.
pub(super) fn write_poly<T: Scalar>(f: &mut fmt::Formatter<'_>, p: &MultiPoly<T>) -> fmt::Result {
    if p.is_zero() {
        return f.write_str("0");
    }
    let mut terms: Vec<_> = p.terms().collect();
    terms.sort_by(|(a, _), (b, _)| {
        let da: u32 = a.iter().sum();
        let db: u32 = b.iter().sum();
        db.cmp(&da).then_with(|| b.cmp(a))
    });
    let mut out = String::new();
    for (idx, (e, &c)) in terms.iter().enumerate() {
        let neg = c < T::zero();
        match (idx, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        let mut factors = Vec::new();
        for (i, &k) in e.iter().enumerate() {
            match k {
                0 => {}
                1 => factors.push(p.space().name(i).to_string()),
                _ => factors.push(format!("{}^{k}", p.space().name(i))),
            }
        }
        if factors.is_empty() || c.abs() != T::one() {
            write_number(&mut out, c);
            if !factors.is_empty() {
                out.push('*');
            }
        }
        out.push_str(&factors.join("*"));
    }
    f.write_str(&out)
}
