//! Scalar expressions in the chart coordinates `(x, y, t)`.
//!
//! Expressions are parsed from an infix text syntax, evaluated with explicit
//! domain checks and differentiated symbolically. Exponents must fold to a
//! constant so that every derivative rule stays closed-form. The only
//! rewriting ever applied is constant folding together with the identities
//! `a + 0`, `a * 1`, `a * 0` and `a ^ 1`; there is no general simplifier.
//!
//! Grammar (standard precedence, `^` binds tighter than unary minus and is
//! right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'y' | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp' | 'log' | 'sqrt'
//! ```

use std::fmt;

use thiserror::Error;

use crate::Vec3;

/// Chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    pub const ALL: [Var; 3] = [Var::X, Var::Y, Var::T];

    pub fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::T => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedEnd,
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnknownIdentifier(String),
    BadNumber(String),
    NonConstantExponent,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedToken(s) => write!(f, "unexpected token '{s}'"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier '{s}'"),
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number '{s}'"),
            ParseErrorKind::NonConstantExponent => write!(f, "exponent must be a constant"),
        }
    }
}

/// Syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at ({x}, {y}, {t})")]
    DivisionByZero { x: f64, y: f64, t: f64 },
    #[error("log of non-positive value {value} at ({x}, {y}, {t})")]
    LogDomain { value: f64, x: f64, y: f64, t: f64 },
    #[error("sqrt of negative value {value} at ({x}, {y}, {t})")]
    SqrtDomain { value: f64, x: f64, y: f64, t: f64 },
    #[error("power {base}^{exponent} undefined at ({x}, {y}, {t})")]
    PowDomain {
        base: f64,
        exponent: f64,
        x: f64,
        y: f64,
        t: f64,
    },
    #[error("non-finite value at ({x}, {y}, {t})")]
    NonFinite { x: f64, y: f64, t: f64 },
}

// ---------------------------------------------------------------------------
// Folding constructors

pub fn constant(c: f64) -> Expr {
    Expr::Const(c)
}

pub fn var(v: Var) -> Expr {
    Expr::Var(v)
}

fn finite_const(c: f64) -> Option<Expr> {
    c.is_finite().then_some(Expr::Const(c))
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        a => Expr::Unary(UnaryOp::Neg, Box::new(a)),
    }
}

pub fn unary(op: UnaryOp, a: Expr) -> Expr {
    if op == UnaryOp::Neg {
        return neg(a);
    }
    if let Expr::Const(c) = a {
        let folded = match op {
            UnaryOp::Sin => Some(c.sin()),
            UnaryOp::Cos => Some(c.cos()),
            UnaryOp::Exp => Some(c.exp()),
            UnaryOp::Log if c > 0.0 => Some(c.ln()),
            UnaryOp::Sqrt if c >= 0.0 => Some(c.sqrt()),
            _ => None,
        };
        if let Some(e) = folded.and_then(finite_const) {
            return e;
        }
    }
    Expr::Unary(op, Box::new(a))
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) => finite_const(p + q).unwrap_or_else(|| binary_raw(BinaryOp::Add, a, b)),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => binary_raw(BinaryOp::Add, a, b),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) => finite_const(p - q).unwrap_or_else(|| binary_raw(BinaryOp::Sub, a, b)),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => binary_raw(BinaryOp::Sub, a, b),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) => finite_const(p * q).unwrap_or_else(|| binary_raw(BinaryOp::Mul, a, b)),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => Expr::Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => binary_raw(BinaryOp::Mul, a, b),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) if *q != 0.0 => {
            finite_const(p / q).unwrap_or_else(|| binary_raw(BinaryOp::Div, a, b))
        }
        _ if is_const(&b, 1.0) => a,
        _ => binary_raw(BinaryOp::Div, a, b),
    }
}

pub fn pow(a: Expr, c: f64) -> Expr {
    if c == 1.0 {
        return a;
    }
    if c == 0.0 {
        return Expr::Const(1.0);
    }
    if let Expr::Const(b) = a {
        if let Ok(v) = checked_pow(b, c) {
            if let Some(e) = finite_const(v) {
                return e;
            }
        }
    }
    Expr::Pow(Box::new(a), c)
}

pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    match op {
        BinaryOp::Add => add(a, b),
        BinaryOp::Sub => sub(a, b),
        BinaryOp::Mul => mul(a, b),
        BinaryOp::Div => div(a, b),
    }
}

fn binary_raw(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn checked_pow(base: f64, exponent: f64) -> Result<f64, ()> {
    let integral = exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64;
    if base == 0.0 && exponent < 0.0 {
        return Err(());
    }
    if base < 0.0 && !integral {
        return Err(());
    }
    Ok(if integral {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    })
}

// ---------------------------------------------------------------------------
// Evaluation and differentiation

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse(text)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, p: &Vec3) -> Result<f64, EvalError> {
        let v = self.eval_inner(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                x: p[0],
                y: p[1],
                t: p[2],
            })
        }
    }

    fn eval_inner(&self, p: &Vec3) -> Result<f64, EvalError> {
        let (x, y, t) = (p[0], p[1], p[2]);
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => p[v.index()],
            Expr::Unary(op, a) => {
                let a = a.eval_inner(p)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::LogDomain { value: a, x, y, t });
                        }
                        a.ln()
                    }
                    UnaryOp::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::SqrtDomain { value: a, x, y, t });
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval_inner(p)?;
                let b = b.eval_inner(p)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { x, y, t });
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, c) => {
                let base = a.eval_inner(p)?;
                checked_pow(base, *c).map_err(|_| EvalError::PowDomain {
                    base,
                    exponent: *c,
                    x,
                    y,
                    t,
                })?
            }
        })
    }

    /// Exact partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => constant(0.0),
            Expr::Var(w) => constant(if *w == v { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.diff(v);
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => neg(da),
                    UnaryOp::Sin => mul(unary(UnaryOp::Cos, a), da),
                    UnaryOp::Cos => neg(mul(unary(UnaryOp::Sin, a), da)),
                    UnaryOp::Exp => mul(unary(UnaryOp::Exp, a), da),
                    UnaryOp::Log => div(da, a),
                    UnaryOp::Sqrt => div(da, mul(constant(2.0), unary(UnaryOp::Sqrt, a))),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                let a = (**a).clone();
                let b = (**b).clone();
                match op {
                    BinaryOp::Add => add(da, db),
                    BinaryOp::Sub => sub(da, db),
                    BinaryOp::Mul => add(mul(da, b), mul(a, db)),
                    BinaryOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2.0)),
                }
            }
            Expr::Pow(a, c) => {
                let da = a.diff(v);
                mul(mul(constant(*c), pow((**a).clone(), c - 1.0)), da)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Expr::Const(_) | Expr::Var(_) => 5,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Unary(_, _) => 5,
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 2,
            Expr::Pow(_, _) => 4,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                a.fmt_child(f, a.precedence() < 3)
            }
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => {
                let p = self.precedence();
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                };
                a.fmt_child(f, a.precedence() < p)?;
                write!(f, " {sym} ")?;
                b.fmt_child(f, b.precedence() <= p)
            }
            Expr::Pow(a, c) => {
                a.fmt_child(f, a.precedence() <= 4)?;
                if *c < 0.0 {
                    write!(f, "^({c})")
                } else {
                    write!(f, "^{c}")
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Token)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(tok) = lx.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(usize, Token)>, ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = bytes[start];
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Token::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut k = end + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        end = k;
                    }
                }
                let text = &self.src[start..end];
                self.pos = end;
                let value = text.parse::<f64>().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                })?;
                Token::Num(value)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                Token::Ident(self.src[start..end].to_string())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        Ok(Some((start, tok)))
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.idx).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            None => self.error(ParseErrorKind::UnexpectedEnd),
            Some(tok) => self.error(ParseErrorKind::UnexpectedToken(token_text(tok))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let c = *c;
            self.idx += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { add(lhs, rhs) } else { sub(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let c = *c;
            self.idx += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' { mul(lhs, rhs) } else { div(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.idx += 1;
                Ok(neg(self.unary()?))
            }
            Some(Token::Op('+')) => {
                self.idx += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.idx += 1;
            let at = self.offset();
            let exponent = self.unary()?;
            let c = exponent.as_const().ok_or(ParseError {
                offset: at,
                kind: ParseErrorKind::NonConstantExponent,
            })?;
            return Ok(pow(base, c));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        let tok = self.peek().cloned().ok_or_else(|| self.unexpected())?;
        match tok {
            Token::Num(v) => {
                self.idx += 1;
                Ok(constant(v))
            }
            Token::LParen => {
                self.idx += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.idx += 1;
                match name.as_str() {
                    "x" => Ok(var(Var::X)),
                    "y" => Ok(var(Var::Y)),
                    "t" => Ok(var(Var::T)),
                    "pi" => Ok(constant(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" | "log" | "sqrt" => {
                        let op = match name.as_str() {
                            "sin" => UnaryOp::Sin,
                            "cos" => UnaryOp::Cos,
                            "exp" => UnaryOp::Exp,
                            "log" => UnaryOp::Log,
                            _ => UnaryOp::Sqrt,
                        };
                        match self.peek() {
                            Some(Token::LParen) => self.idx += 1,
                            _ => return Err(self.unexpected()),
                        }
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Ok(unary(op, arg))
                    }
                    _ => Err(ParseError {
                        offset: at,
                        kind: ParseErrorKind::UnknownIdentifier(name),
                    }),
                }
            }
            Token::Op(_) | Token::RParen => Err(self.unexpected()),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.idx += 1;
                Ok(())
            }
            _ => Err(self.unexpected()),
        }
    }
}

fn token_text(tok: &Token) -> String {
    match tok {
        Token::Num(v) => v.to_string(),
        Token::Ident(s) => s.clone(),
        Token::Op(c) => c.to_string(),
        Token::LParen => "(".into(),
        Token::RParen => ")".into(),
    }
}

/// Parse an expression, folding constant sub-expressions.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = Lexer::tokens(text)?;
    if tokens.is_empty() {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut parser = Parser {
        tokens,
        idx: 0,
        end: text.len(),
    };
    let e = parser.expr()?;
    if parser.idx < parser.tokens.len() {
        return Err(parser.unexpected());
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Scalar fields

/// An expression together with its three symbolic partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Expr,
    grad: [Expr; 3],
}

impl ScalarField {
    pub fn new(expr: Expr) -> Self {
        let grad = Var::ALL.map(|v| expr.diff(v));
        ScalarField { expr, grad }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Ok(ScalarField::new(parse(text)?))
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::new(constant(c))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn partial(&self, v: Var) -> &Expr {
        &self.grad[v.index()]
    }

    pub fn as_const(&self) -> Option<f64> {
        self.expr.as_const()
    }

    pub fn value(&self, p: &Vec3) -> Result<f64, EvalError> {
        self.expr.eval(p)
    }

    pub fn gradient(&self, p: &Vec3) -> Result<Vec3, EvalError> {
        Ok(Vec3::new(
            self.grad[0].eval(p)?,
            self.grad[1].eval(p)?,
            self.grad[2].eval(p)?,
        ))
    }

    pub fn value_and_gradient(&self, p: &Vec3) -> Result<(f64, Vec3), EvalError> {
        Ok((self.value(p)?, self.gradient(p)?))
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(x: f64, y: f64, t: f64) -> Vec3 {
        Vec3::new(x, y, t)
    }

    #[test]
    fn parse_constant() {
        assert_eq!(parse("1").unwrap(), Expr::Const(1.0));
        assert_eq!(parse("2*3 + 1").unwrap(), Expr::Const(7.0));
        assert_eq!(parse("-2.5e-1").unwrap(), Expr::Const(-0.25));
    }

    #[test]
    fn evaluate_product() {
        let e = parse("x*y").unwrap();
        assert_eq!(e.eval(&at(2.0, 3.0, 0.0)).unwrap(), 6.0);
    }

    #[test]
    fn incomplete_input_reports_offset() {
        let err = parse("x +").unwrap_err();
        assert_eq!(err.offset, 3);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);
        assert!(err.to_string().contains("offset 3"));
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(parse("").unwrap_err().kind, ParseErrorKind::Empty);
        let e = parse("x + z").unwrap_err();
        assert_eq!(e.offset, 4);
        assert_eq!(e.kind, ParseErrorKind::UnknownIdentifier("z".into()));
        assert_eq!(parse("x^y").unwrap_err().kind, ParseErrorKind::NonConstantExponent);
        assert_eq!(parse("(x").unwrap_err().offset, 2);
        assert_eq!(parse("x )").unwrap_err().offset, 2);
        assert!(matches!(
            parse("x # 2").unwrap_err().kind,
            ParseErrorKind::UnexpectedChar('#')
        ));
        assert!(parse("sin x").is_err());
    }

    #[test]
    fn evaluation_examples() {
        let p = |s: &str, x: f64| parse(s).unwrap().eval(&at(x, 0.0, 0.0));
        assert_eq!(p("sin(x)", 0.0).unwrap(), 0.0);
        assert_eq!(p("x^2", 3.0).unwrap(), 9.0);
        assert!(matches!(p("1/x", 0.0), Err(EvalError::DivisionByZero { .. })));
        assert!(matches!(p("log(x)", 0.0), Err(EvalError::LogDomain { .. })));
        assert!(matches!(p("sqrt(x)", -1.0), Err(EvalError::SqrtDomain { .. })));
        assert!(matches!(p("x^0.5", -1.0), Err(EvalError::PowDomain { .. })));
        assert!(matches!(p("exp(x)", 1000.0), Err(EvalError::NonFinite { .. })));
        assert_eq!(p("x^(-1)", 4.0).unwrap(), 0.25);
        assert_eq!(p("-x^2", 3.0).unwrap(), -9.0);
        assert_eq!(p("2^3^2", 0.0).unwrap(), 512.0);
        assert_eq!(p("8 / 4 / 2", 0.0).unwrap(), 1.0);
        assert_eq!(p("1 - 2 - 3", 0.0).unwrap(), -4.0);
    }

    #[test]
    fn derivative_examples() {
        let d = parse("x^2").unwrap().diff(Var::X);
        assert_eq!(d.eval(&at(3.0, 0.0, 0.0)).unwrap(), 6.0);
        assert_eq!(parse("x*y").unwrap().diff(Var::T), Expr::Const(0.0));

        // finite-difference oracle for d/dx sin(x t) at (1, ., 2)
        let e = parse("sin(x*t)").unwrap();
        let h = 1e-6;
        let fd = (e.eval(&at(1.0 + h, 0.0, 2.0)).unwrap() - e.eval(&at(1.0 - h, 0.0, 2.0)).unwrap()) / (2.0 * h);
        let sym = e.diff(Var::X).eval(&at(1.0, 0.0, 2.0)).unwrap();
        assert!((sym - 2.0 * 2.0f64.cos()).abs() < 1e-14);
        assert!((sym - fd).abs() < 1e-8);
    }

    #[test]
    fn derivative_rules_against_fd() {
        let cases = [
            "exp(x*y) / (1 + t^2)",
            "log(2 + x^2) * sqrt(1 + y^2)",
            "cos(x - t) - (x*y*t)^3",
            "(1 + x)^(-0.5) + sin(y)^2",
        ];
        let p = at(0.3, -0.7, 0.45);
        for s in cases {
            let f = ScalarField::parse(s).unwrap();
            let g = f.gradient(&p).unwrap();
            for v in Var::ALL {
                let mut a = p;
                let mut b = p;
                a[v.index()] += 1e-5;
                b[v.index()] -= 1e-5;
                let fd = (f.value(&a).unwrap() - f.value(&b).unwrap()) / 2e-5;
                assert!((g[v.index()] - fd).abs() <= 1e-7 * (1.0 + fd.abs()), "{s} d{v:?}");
            }
        }
    }

    #[test]
    fn printing_is_readable() {
        let e = parse("x*y + 2*(t - x)^2 - sin(-x)").unwrap();
        assert_eq!(e.to_string(), "x * y + 2 * (t - x)^2 - sin(-x)");
        assert_eq!(parse("x - (y - t)").unwrap().to_string(), "x - (y - t)");
        assert_eq!(parse("x^(-2)").unwrap().to_string(), "x^(-2)");
        assert_eq!(parse("(-x)^2").unwrap().to_string(), "(-x)^2");
    }

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (-5.0f64..5.0).prop_map(constant),
            prop_oneof![Just(Var::X), Just(Var::Y), Just(Var::T)].prop_map(var),
        ]
    }

    fn tree() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                (inner.clone(), 0usize..6).prop_map(|(a, k)| {
                    let op = [
                        UnaryOp::Neg,
                        UnaryOp::Sin,
                        UnaryOp::Cos,
                        UnaryOp::Exp,
                        UnaryOp::Log,
                        UnaryOp::Sqrt,
                    ][k];
                    unary(op, a)
                }),
                (inner.clone(), inner.clone(), 0usize..4).prop_map(|(a, b, k)| {
                    let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div][k];
                    binary(op, a, b)
                }),
                (inner, -3i32..4).prop_map(|(a, c)| pow(a, c as f64 * 0.5)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in tree()) {
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
