//! Polynomial vector fields given as text.
//!
//! A field file holds one assignment per line. The three component lines are
//! `xdot = ...`, `ydot = ...` and `zdot = ...`; any other `name = ...` line
//! defines a named parameter whose right-hand side must be constant. `#`
//! starts a comment.
//!
//! ```text
//! T = 27
//! R = 100
//! xdot = y
//! ydot = z
//! zdot = -z - (T - R + R*x^2)*y - T*x
//! ```
//!
//! Expressions use `+ - * /`, unary minus, parentheses and `^` with a
//! nonnegative integer literal exponent. Division is only allowed by
//! constant subexpressions so every component stays a polynomial in
//! `x, y, z`, which keeps the Jacobian exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {message} (at `{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub token: String,
    pub message: String,
}

impl ParseError {
    fn at(pos: Pos, token: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            column: pos.column,
            token: token.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
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
    Eq,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::Slash => f.write_str("/"),
            Tok::Caret => f.write_str("^"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Eq => f.write_str("="),
            Tok::End => f.write_str("end of line"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    pos: Pos,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos {
            line: line_no,
            column: i + 1,
        };
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' | '\u{2212}' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token {
                tok,
                text: c.to_string(),
                pos,
            });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
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
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::at(pos, text.clone(), "malformed number"))?;
            out.push(Token {
                tok: Tok::Num(value),
                text,
                pos,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(text.clone()),
                text,
                pos,
            });
            continue;
        }
        return Err(ParseError::at(pos, c.to_string(), "unexpected character"));
    }
    out.push(Token {
        tok: Tok::End,
        text: String::new(),
        pos: Pos {
            line: line_no,
            column: chars.len() + 1,
        },
    });
    Ok(out)
}

/// Expression tree over the state variables. Named parameters are already
/// substituted by their values.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// State coordinate: 0 = x, 1 = y, 2 = z.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl fmt::Display for Expr {
    /// Fully parenthesized form that parses back to an equivalent expression.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => f.write_str(["x", "y", "z"][*i]),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
        }
    }
}

impl Expr {
    pub fn eval(&self, s: &[f64; 3]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => s[*i],
            Expr::Neg(a) => -a.eval(s),
            Expr::Add(a, b) => a.eval(s) + b.eval(s),
            Expr::Sub(a, b) => a.eval(s) - b.eval(s),
            Expr::Mul(a, b) => a.eval(s) * b.eval(s),
            Expr::Div(a, b) => a.eval(s) / b.eval(s),
            Expr::Pow(a, n) => a.eval(s).powi(*n as i32),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Partial derivative with respect to state coordinate `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)),
            Expr::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            // denominators are constant
            Expr::Div(a, b) => div(a.derivative(var), (**b).clone()),
            Expr::Pow(a, n) => match n {
                0 => Expr::Const(0.0),
                1 => a.derivative(var),
                _ => mul(
                    mul(Expr::Const(*n as f64), pow((**a).clone(), n - 1)),
                    a.derivative(var),
                ),
            },
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a.as_const() {
        Some(c) => Expr::Const(-c),
        None => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), None) if x == 0.0 => b,
        (None, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), None) if x == 0.0 => neg(b),
        (None, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), None) if x == 1.0 => b,
        (None, Some(y)) if y == 1.0 => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (None, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, n: u32) -> Expr {
    match (a.as_const(), n) {
        (Some(c), _) => Expr::Const(c.powi(n as i32)),
        (_, 0) => Expr::Const(1.0),
        (_, 1) => a,
        _ => Expr::Pow(Box::new(a), n),
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    idx: usize,
    params: &'a BTreeMap<String, f64>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.idx]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    let op = self.next();
                    let rhs = self.unary()?;
                    if !rhs.is_constant() {
                        return Err(ParseError::at(
                            op.pos,
                            op.text,
                            "division by a state-dependent expression makes the field non-polynomial",
                        ));
                    }
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().tok {
            Tok::Minus => {
                self.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let exp = self.next();
        match exp.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                if self.peek().tok == Tok::Caret {
                    let t = self.peek().clone();
                    return Err(ParseError::at(
                        t.pos,
                        t.text,
                        "chained exponents are not supported; use parentheses",
                    ));
                }
                Ok(Expr::Pow(Box::new(base), v as u32))
            }
            _ => Err(ParseError::at(
                exp.pos,
                exp.tok.to_string(),
                "exponent must be a nonnegative integer literal",
            )),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Ident(ref name) => match name.as_str() {
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "z" => Ok(Expr::Var(2)),
                _ => match self.params.get(name) {
                    Some(v) => Ok(Expr::Const(*v)),
                    None => Err(ParseError::at(t.pos, t.text, "unknown identifier")),
                },
            },
            Tok::LParen => {
                let e = self.expr()?;
                let close = self.next();
                if close.tok != Tok::RParen {
                    return Err(ParseError::at(
                        close.pos,
                        close.tok.to_string(),
                        "expected `)`",
                    ));
                }
                Ok(e)
            }
            other => Err(ParseError::at(
                t.pos,
                other.to_string(),
                "expected a number, identifier or `(`",
            )),
        }
    }
}

/// A parsed three-component polynomial field with its symbolic Jacobian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CustomFieldSource", into = "CustomFieldSource")]
pub struct CustomField {
    source: String,
    overrides: BTreeMap<String, f64>,
    params: BTreeMap<String, f64>,
    components: [Expr; 3],
    jacobian: [[Expr; 3]; 3],
}

/// Serialized form: the original text plus externally supplied parameter
/// values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomFieldSource {
    pub source: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl TryFrom<CustomFieldSource> for CustomField {
    type Error = ParseError;
    fn try_from(src: CustomFieldSource) -> Result<Self, ParseError> {
        CustomField::parse_with(&src.source, &src.overrides)
    }
}

impl From<CustomField> for CustomFieldSource {
    fn from(f: CustomField) -> Self {
        Self {
            source: f.source,
            overrides: f.overrides,
        }
    }
}

impl PartialEq for CustomField {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.overrides == other.overrides
    }
}

const COMPONENT_NAMES: [&str; 3] = ["xdot", "ydot", "zdot"];

impl CustomField {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Self::parse_with(source, &BTreeMap::new())
    }

    /// Parses `source`; values in `overrides` take precedence over parameter
    /// definitions in the file.
    pub fn parse_with(source: &str, overrides: &BTreeMap<String, f64>) -> Result<Self, ParseError> {
        let mut params = overrides.clone();
        let mut components: [Option<Expr>; 3] = [None, None, None];
        let mut last = Pos { line: 1, column: 1 };

        for (idx, line) in source.lines().enumerate() {
            let toks = tokenize(line, idx + 1)?;
            last = toks.last().map(|t| t.pos).unwrap_or(last);
            if toks.len() == 1 {
                continue;
            }
            let name_tok = &toks[0];
            let name = match &name_tok.tok {
                Tok::Ident(n) => n.clone(),
                other => {
                    return Err(ParseError::at(
                        name_tok.pos,
                        other.to_string(),
                        "expected an assignment `name = expression`",
                    ))
                }
            };
            if toks[1].tok != Tok::Eq {
                return Err(ParseError::at(toks[1].pos, toks[1].tok.to_string(), "expected `=`"));
            }
            let mut parser = Parser {
                toks: &toks[2..],
                idx: 0,
                params: &params,
            };
            let expr = parser.expr()?;
            let trailing = parser.peek();
            if trailing.tok != Tok::End {
                return Err(ParseError::at(
                    trailing.pos,
                    trailing.tok.to_string(),
                    "unexpected token after expression",
                ));
            }

            if let Some(k) = COMPONENT_NAMES.iter().position(|c| *c == name) {
                if components[k].is_some() {
                    return Err(ParseError::at(name_tok.pos, name, "component defined twice"));
                }
                components[k] = Some(expr);
            } else {
                if matches!(name.as_str(), "x" | "y" | "z") {
                    return Err(ParseError::at(
                        name_tok.pos,
                        name,
                        "state variables cannot be assigned",
                    ));
                }
                if !expr.is_constant() {
                    return Err(ParseError::at(
                        toks[2].pos,
                        toks[2].text.clone(),
                        "parameter definitions must not depend on x, y or z",
                    ));
                }
                let value = expr.eval(&[0.0; 3]);
                if !overrides.contains_key(&name) {
                    params.insert(name, value);
                }
            }
        }

        let mut out = Vec::with_capacity(3);
        for (k, c) in components.into_iter().enumerate() {
            match c {
                Some(e) => out.push(e),
                None => {
                    return Err(ParseError::at(
                        last,
                        "",
                        format!("missing component `{}`", COMPONENT_NAMES[k]),
                    ))
                }
            }
        }
        let components: [Expr; 3] = out.try_into().expect("three components");
        let jacobian =
            std::array::from_fn(|i| std::array::from_fn(|j| components[i].derivative(j)));
        Ok(Self {
            source: source.to_string(),
            overrides: overrides.clone(),
            params,
            components,
            jacobian,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.components
    }

    pub fn eval(&self, s: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.components[i].eval(s))
    }

    pub fn jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.jacobian[i][j].eval(s)))
    }
}
