//! Expression language over chart coordinates and named parameters.
//!
//! Grammar (EBNF, also reproduced in the repository README):
//!
//! ```text
//! expr    := term   { ("+" | "-") term } ;
//! term    := unary  { ("*" | "/") unary } ;
//! unary   := "-" unary | power ;
//! power   := atom   [ "^" unary ] ;              (* right associative *)
//! atom    := number | coord | param | func "(" expr ")" | "(" expr ")" ;
//! coord   := ("u" | "t") digits ;                (* 1-based, <= dimension *)
//! func    := "log" | "exp" | "sqrt" | "sin" | "cos" | "tanh" ;
//! number  := decimal literal, optional fraction and exponent ;
//! ```
//!
//! `u<k>` and `t<k>` are aliases for the same coordinate. Differentiation is
//! exact and closed: the derivative of any expression is an expression.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "log" => Func::Log,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

/// Abstract syntax tree of a chart expression.
///
/// Coordinates are stored 0-based; literals are nonnegative as parsed (the
/// parser emits `Neg` nodes for leading minus signs).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// 0-based coordinate index.
    Coord(usize),
    Param(Arc<str>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Fun(Func, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn coord(i: usize) -> Expr {
        Expr::Coord(i)
    }

    fn is_num(&self, x: f64) -> bool {
        matches!(self, Expr::Num(v) if *v == x)
    }

    /// Folding constructors keep derivative trees from ballooning. They only
    /// apply 0/1 identities, never general rewriting.
    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_num(0.0) {
            b
        } else if b.is_num(0.0) {
            a
        } else {
            Expr::Add(Box::new(a), Box::new(b))
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_num(0.0) {
            a
        } else if a.is_num(0.0) {
            Expr::neg(b)
        } else {
            Expr::Sub(Box::new(a), Box::new(b))
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_num(0.0) || b.is_num(0.0) {
            Expr::Num(0.0)
        } else if a.is_num(1.0) {
            b
        } else if b.is_num(1.0) {
            a
        } else {
            Expr::Mul(Box::new(a), Box::new(b))
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_num(0.0) {
            Expr::Num(0.0)
        } else if b.is_num(1.0) {
            a
        } else {
            Expr::Div(Box::new(a), Box::new(b))
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_num(1.0) {
            a
        } else {
            Expr::Pow(Box::new(a), Box::new(b))
        }
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn fun(f: Func, a: Expr) -> Expr {
        Expr::Fun(f, Box::new(a))
    }

    /// Exact partial derivative with respect to coordinate `var` (0-based).
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Param(_) => Expr::Num(0.0),
            Expr::Coord(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                // (a/b)' = a'/b - a b'/b^2
                let da = a.diff(var);
                let db = b.diff(var);
                Expr::sub(
                    Expr::div(da, (**b).clone()),
                    Expr::div(
                        Expr::mul((**a).clone(), db),
                        Expr::pow((**b).clone(), Expr::Num(2.0)),
                    ),
                )
            }
            Expr::Pow(a, b) => {
                let da = a.diff(var);
                if let Expr::Num(c) = **b {
                    // c * a^(c-1) * a'
                    Expr::mul(
                        Expr::mul(Expr::Num(c), Expr::pow((**a).clone(), Expr::Num(c - 1.0))),
                        da,
                    )
                } else {
                    // a^b * (b' log a + b a'/a)
                    let db = b.diff(var);
                    Expr::mul(
                        self.clone(),
                        Expr::add(
                            Expr::mul(db, Expr::fun(Func::Log, (**a).clone())),
                            Expr::div(Expr::mul((**b).clone(), da), (**a).clone()),
                        ),
                    )
                }
            }
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Fun(f, a) => {
                let da = a.diff(var);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Log => Expr::div(Expr::Num(1.0), inner),
                    Func::Exp => Expr::fun(Func::Exp, inner),
                    Func::Sqrt => Expr::div(
                        Expr::Num(1.0),
                        Expr::mul(Expr::Num(2.0), Expr::fun(Func::Sqrt, inner)),
                    ),
                    Func::Sin => Expr::fun(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::fun(Func::Sin, inner)),
                    Func::Tanh => Expr::sub(
                        Expr::Num(1.0),
                        Expr::pow(Expr::fun(Func::Tanh, inner), Expr::Num(2.0)),
                    ),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Largest coordinate index mentioned, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Param(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                match (a.max_coord(), b.max_coord()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, None) => x,
                    (None, y) => y,
                }
            }
            Expr::Neg(a) | Expr::Fun(_, a) => a.max_coord(),
        }
    }

    pub fn mentions_param(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) | Expr::Coord(_) => false,
            Expr::Param(p) => &**p == name,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.mentions_param(name) || b.mentions_param(name)
            }
            Expr::Neg(a) | Expr::Fun(_, a) => a.mentions_param(name),
        }
    }

    /// Evaluate to a jet of the requested order at `point`.
    pub fn eval_jet<T: Real>(&self, point: &[T], order: usize, params: &Params<T>) -> Result<Jet<T>> {
        let n = point.len();
        match self {
            Expr::Num(x) => Ok(Jet::constant(n, order, T::from_f64_lossy(*x))),
            Expr::Coord(i) => Ok(Jet::coordinate(n, order, *i, point[*i])),
            Expr::Param(p) => {
                let v = params.get(p).ok_or_else(|| {
                    Error::Domain(format!("parameter `{p}` has no bound value"))
                })?;
                Ok(Jet::constant(n, order, v))
            }
            Expr::Add(a, b) => Ok(a.eval_jet(point, order, params)? + b.eval_jet(point, order, params)?),
            Expr::Sub(a, b) => Ok(a.eval_jet(point, order, params)? - b.eval_jet(point, order, params)?),
            Expr::Mul(a, b) => Ok(&a.eval_jet(point, order, params)? * &b.eval_jet(point, order, params)?),
            Expr::Div(a, b) => {
                let num = a.eval_jet(point, order, params)?;
                let den = b.eval_jet(point, order, params)?;
                if den.value() == T::zero() {
                    return Err(Error::Domain("division by zero".into()));
                }
                Ok(&num * &den.recip()?)
            }
            Expr::Pow(a, b) => {
                let base = a.eval_jet(point, order, params)?;
                match b.const_value(params) {
                    Some(c) => {
                        let cf = c.to_f64_lossy();
                        if cf.fract() == 0.0 && cf.abs() <= 64.0 {
                            base.powi(cf as i64)
                        } else {
                            base.powf(c)
                        }
                    }
                    None => {
                        // general case: a^b = exp(b log a)
                        let expo = b.eval_jet(point, order, params)?;
                        Ok((&expo * &base.ln()?).exp())
                    }
                }
            }
            Expr::Neg(a) => Ok(-a.eval_jet(point, order, params)?),
            Expr::Fun(f, a) => {
                let inner = a.eval_jet(point, order, params)?;
                match f {
                    Func::Log => inner.ln(),
                    Func::Exp => Ok(inner.exp()),
                    Func::Sqrt => inner.sqrt(),
                    Func::Sin => Ok(inner.sin()),
                    Func::Cos => Ok(inner.cos()),
                    Func::Tanh => Ok(inner.tanh()),
                }
            }
        }
    }

    /// Value of a coordinate-free expression, if it is coordinate-free.
    pub fn const_value<T: Real>(&self, params: &Params<T>) -> Option<T> {
        match self {
            Expr::Num(x) => Some(T::from_f64_lossy(*x)),
            Expr::Coord(_) => None,
            Expr::Param(p) => params.get(p),
            Expr::Add(a, b) => Some(a.const_value(params)? + b.const_value(params)?),
            Expr::Sub(a, b) => Some(a.const_value(params)? - b.const_value(params)?),
            Expr::Mul(a, b) => Some(a.const_value(params)? * b.const_value(params)?),
            Expr::Div(a, b) => Some(a.const_value(params)? / b.const_value(params)?),
            Expr::Pow(a, b) => Some(a.const_value(params)?.powf(b.const_value(params)?)),
            Expr::Neg(a) => Some(-a.const_value(params)?),
            Expr::Fun(f, a) => {
                let v = a.const_value(params)?;
                Some(match f {
                    Func::Log => v.ln(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tanh => v.tanh(),
                })
            }
        }
    }
}

/// Bound parameter values, shared by all fields of a model.
#[derive(Debug, Clone, Default)]
pub struct Params<T> {
    entries: std::collections::BTreeMap<String, T>,
}

impl<T: Real> Params<T> {
    pub fn new() -> Self {
        Params {
            entries: Default::default(),
        }
    }

    pub fn from_iter<I: IntoIterator<Item = (String, T)>>(it: I) -> Self {
        Params {
            entries: it.into_iter().collect(),
        }
    }

    pub fn set(&mut self, name: &str, value: T) {
        self.entries.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.entries.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(x) if *x < 0.0 => 3, // prints with a leading minus
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, need: u8) -> fmt::Result {
    if prec(e) < need {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Coord(i) => write!(f, "u{}", i + 1),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Pow(a, b) => {
                write_child(f, a, 5)?;
                write!(f, "^")?;
                write_child(f, b, 4)
            }
            Expr::Fun(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse context: chart dimension plus the names of bound parameters.
#[derive(Debug, Clone)]
pub struct ParseCtx {
    pub dim: usize,
    pub params: Vec<String>,
}

impl ParseCtx {
    pub fn new(dim: usize, params: &[&str]) -> Self {
        ParseCtx {
            dim,
            params: params.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Parameter names may not shadow coordinates (`u3`, `t1`, ...) or
    /// function names.
    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            if Func::from_name(p).is_some() {
                return Err(Error::Schema(format!(
                    "parameter name `{p}` collides with a function name"
                )));
            }
            if coord_index(p).is_some() {
                return Err(Error::Schema(format!(
                    "parameter name `{p}` collides with a coordinate symbol"
                )));
            }
        }
        Ok(())
    }
}

fn coord_index(ident: &str) -> Option<usize> {
    let mut chars = ident.chars();
    let head = chars.next()?;
    if head != 'u' && head != 't' {
        return None;
    }
    let rest: String = chars.collect();
    if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    rest.parse::<usize>().ok()
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
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // optional exponent
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
                    pos: start,
                    msg: format!("malformed number `{text}`"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            other => {
                return Err(Error::Parse {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'a ParseCtx,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                pos: self.here(),
                msg: format!("expected {what}"),
            })
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.product()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.product()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let expo = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(expo)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.sum()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if let Some(f) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(Error::Parse {
                            pos,
                            msg: format!("function `{name}` requires an argument list"),
                        });
                    }
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.expect(Tok::RParen, "closing `)` of function argument")?;
                    return Ok(Expr::Fun(f, Box::new(arg)));
                }
                if let Some(k) = coord_index(&name) {
                    if k == 0 || k > self.ctx.dim {
                        return Err(Error::Parse {
                            pos,
                            msg: format!(
                                "coordinate `{name}` out of range for dimension {}",
                                self.ctx.dim
                            ),
                        });
                    }
                    return Ok(Expr::Coord(k - 1));
                }
                if self.ctx.params.iter().any(|p| p == &name) {
                    return Ok(Expr::Param(name.into()));
                }
                Err(Error::Parse {
                    pos,
                    msg: format!("unknown symbol `{name}`"),
                })
            }
            Some(_) => Err(Error::Parse {
                pos,
                msg: "expected a number, symbol, or `(`".into(),
            }),
            None => Err(Error::Parse {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parse `text` against a chart of dimension `n` with the given parameters.
pub fn parse_expr(text: &str, n: usize, params: &[&str]) -> Result<Expr> {
    let ctx = ParseCtx::new(n, params);
    parse_expr_ctx(text, &ctx)
}

pub fn parse_expr_ctx(text: &str, ctx: &ParseCtx) -> Result<Expr> {
    ctx.validate()?;
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        ctx,
        src_len: text.len(),
    };
    let e = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse {
            pos: p.here(),
            msg: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s, 3, &["k"]).unwrap()
    }

    #[test]
    fn grammar_smoke() {
        let e = parse_expr("u1*u2 + log(u2)", 2, &[]).unwrap();
        assert_eq!(
            e,
            Expr::Add(
                Box::new(Expr::Mul(Box::new(Expr::Coord(0)), Box::new(Expr::Coord(1)))),
                Box::new(Expr::Fun(Func::Log, Box::new(Expr::Coord(1))))
            )
        );
    }

    #[test]
    fn coordinate_out_of_range_rejected() {
        let err = parse_expr("u3", 2, &[]).unwrap_err();
        match err {
            Error::Parse { pos, msg } => {
                assert_eq!(pos, 0);
                assert!(msg.contains("out of range"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn kappa_prepotential_parses_with_parameter() {
        let e = parse_expr(
            "(1/2)*t1^2*t2 + (1/4)*t2^2*log(t2^2) - (k/6)*t1^3",
            2,
            &["k"],
        )
        .unwrap();
        assert!(e.mentions_param("k"));
        assert_eq!(e.max_coord(), Some(1));
    }

    #[test]
    fn unknown_symbol_and_arity_errors() {
        assert!(matches!(
            parse_expr("q + 1", 2, &[]),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_expr("log", 2, &[]),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_expr("u1 + ", 2, &[]),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_expr("(u1", 2, &[]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn aliases_and_precedence() {
        assert_eq!(p("t2"), Expr::Coord(1));
        // unary minus binds tighter than `*`: -u1*u2 = (-u1)*u2
        assert_eq!(
            p("-u1*u2"),
            Expr::Mul(
                Box::new(Expr::Neg(Box::new(Expr::Coord(0)))),
                Box::new(Expr::Coord(1))
            )
        );
        // right-associative power
        assert_eq!(
            p("u1^u2^2"),
            Expr::Pow(
                Box::new(Expr::Coord(0)),
                Box::new(Expr::Pow(Box::new(Expr::Coord(1)), Box::new(Expr::Num(2.0))))
            )
        );
    }

    #[test]
    fn print_parse_roundtrip_on_samples() {
        for s in [
            "u1*u2 + log(u2)",
            "(1/2)*t1^2*t2 + (1/4)*t2^2*log(t2^2) - (k/6)*t1^3",
            "u1 - (u2 - u3)",
            "u1/(u2*u3)",
            "(u1^2)^3",
            "u1^-2",
            "-(u1 + u2)",
            "2.5e-3*u1 + tanh(sin(cos(u2)))",
        ] {
            let e = p(s);
            let printed = e.to_string();
            let e2 = p(&printed);
            assert_eq!(e, e2, "round-trip failed for `{s}` -> `{printed}`");
        }
    }

    #[test]
    fn derivative_is_expression_and_correct() {
        let e = p("u1^2*sin(u2)");
        let d = e.diff(0);
        let params = Params::<f64>::new();
        let at = [1.5f64, 0.7, 0.0];
        let v = d.eval_jet(&at, 0, &params).unwrap().value();
        assert!((v - 2.0 * 1.5 * 0.7f64.sin()).abs() < 1e-14);
    }
}
