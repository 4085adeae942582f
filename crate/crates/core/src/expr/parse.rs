use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{Expr, Symbol};
use crate::error::{ParseError, ParseErrorKind};

/// Declarations used to validate identifiers while parsing.
///
/// With no declared names every identifier is accepted as a parameter.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    names: Option<BTreeSet<String>>,
    dim: Option<usize>,
}

impl Scope {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restrict named symbols to `names`.
    pub fn names<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.names.get_or_insert_with(BTreeSet::new).extend(names.into_iter().map(Into::into));
        self
    }

    /// Restrict coordinates to `q_1..q_dim`, `p_1..p_dim`.
    pub fn dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }
}

/// Parse with every identifier accepted as a named parameter.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_in(text, &Scope::default())
}

/// Parse, rejecting undeclared names and out-of-range coordinates.
pub fn parse_in(text: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, scope, end: text.len() };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(p.err_at(t.offset, ParseErrorKind::Syntax(format!("unexpected {}", t.tok)))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_part = &text[start..i];
            let mut value = BigRational::from_integer(int_part.parse::<BigInt>().expect("digits"));
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let frac_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == frac_start {
                    return Err(ParseError {
                        offset: i,
                        kind: ParseErrorKind::Syntax("digits expected after `.`".into()),
                    });
                }
                let frac: BigInt = text[frac_start..i].parse().expect("digits");
                let scale = num_traits::pow(BigInt::from(10), i - frac_start);
                value += BigRational::new(frac, scale);
            }
            out.push(Token { tok: Tok::Num(value), offset: start });
        } else if c.is_ascii_lowercase() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_lowercase() || bytes[i].is_ascii_digit()) {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), offset: start });
        } else if b"+-*/^()".contains(&c) {
            out.push(Token { tok: Tok::Op(c as char), offset: i });
            i += 1;
        } else {
            let ch = text[i..].chars().next().expect("non-empty");
            return Err(ParseError {
                offset: i,
                kind: ParseErrorKind::Syntax(format!("unexpected character `{ch}`")),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    scope: &'a Scope,
    end: usize,
}

const FUNCTIONS: [&str; 2] = ["sqrt", "exp"];

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self, op: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Op(c), .. }) if *c == op)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn err_at(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }

    fn syntax(&self, msg: &str) -> ParseError {
        self.err_at(self.offset(), ParseErrorKind::Syntax(msg.to_string()))
    }

    fn expect_op(&mut self, op: char) -> Result<(), ParseError> {
        if self.peek_op(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = lhs + self.term()?;
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                lhs = lhs * self.unary()?;
            } else if self.peek_op('/') {
                self.pos += 1;
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op('-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.peek_op('^') {
            return Ok(base);
        }
        self.pos += 1;
        let negative = if self.peek_op('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let offset = self.offset();
        let n = match self.peek() {
            Some(Token { tok: Tok::Num(n), .. }) if n.is_integer() => n.to_integer(),
            _ => return Err(self.syntax("integer exponent expected")),
        };
        self.pos += 1;
        let n: i64 = i64::try_from(n)
            .map_err(|_| self.err_at(offset, ParseErrorKind::Syntax("exponent too large".into())))?;
        if self.peek_op('^') {
            return Err(self.syntax("chained `^` needs parentheses"));
        }
        Ok(base.powi(if negative { -n } else { n }))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.syntax("unexpected end of input"));
        };
        self.pos += 1;
        match tok.tok {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(self.err_at(tok.offset, ParseErrorKind::Syntax(format!("unexpected `{c}`")))),
            Tok::Ident(name) => {
                if self.peek_op('(') {
                    if !FUNCTIONS.contains(&name.as_str()) {
                        return Err(self.err_at(tok.offset, ParseErrorKind::UnknownFunction(name)));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_op(')')?;
                    return Ok(if name == "sqrt" { arg.sqrt() } else { arg.exp() });
                }
                if FUNCTIONS.contains(&name.as_str()) {
                    return Err(self.err_at(tok.offset, ParseErrorKind::Syntax(format!("`{name}` needs an argument"))));
                }
                self.symbol(name, tok.offset)
            }
        }
    }

    fn symbol(&self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if let Some(sym) = coordinate(&name) {
            let idx = match sym {
                Symbol::Q(i) | Symbol::P(i) => i,
                Symbol::Named(_) => unreachable!(),
            };
            let in_range = idx >= 1 && self.scope.dim.is_none_or(|d| idx <= d);
            if !in_range {
                return Err(self.err_at(offset, ParseErrorKind::VariableIndex(name)));
            }
            return Ok(Expr::Sym(sym));
        }
        if let Some(names) = &self.scope.names {
            if !names.contains(&name) {
                return Err(self.err_at(offset, ParseErrorKind::UnknownSymbol(name)));
            }
        }
        Ok(Expr::Sym(Symbol::Named(name)))
    }
}

fn coordinate(name: &str) -> Option<Symbol> {
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    match head {
        "q" => Some(Symbol::Q(idx)),
        "p" => Some(Symbol::P(idx)),
        _ => None,
    }
}

/// Exact rational from a decimal literal such as `-0.125` or `3`.
pub(crate) fn decimal_to_rational(text: &str) -> Option<BigRational> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value = BigRational::from_integer(int.parse::<BigInt>().ok()?);
    if !frac.is_empty() {
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        value += BigRational::new(frac.parse::<BigInt>().ok()?, scale);
    }
    Some(if neg && !value.is_zero() { -value } else { value })
}

/// Exact rational equal to the shortest decimal representation of `v`.
///
/// `0.1_f64` maps to `1/10`, not to the binary fraction stored in the double.
pub fn rational_from_f64(v: f64) -> Option<BigRational> {
    if !v.is_finite() {
        return None;
    }
    if v == v.trunc() && v.abs() < 1e15 {
        return Some(BigRational::from_integer(BigInt::from(v as i64)));
    }
    let text = format!("{v}");
    decimal_to_rational(&text)
}
