use thiserror::Error;

use super::{BinOp, Builtin, Expr};

const MAX_NESTING: usize = 200;

/// Parse failure at a byte offset, with the set of tokens that would have
/// been accepted there.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {position}: expected {}, found {}", expected.join(" or "), found.as_deref().unwrap_or("end of input"))]
pub struct SyntaxError {
    pub position: usize,
    pub expected: Vec<String>,
    pub found: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
        }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn err(position: usize, expected: &[&str], found: Option<String>) -> SyntaxError {
    SyntaxError {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

/// Scans a decimal literal starting at `start`; returns the value and the
/// end offset. Shared with the model-file lexer.
pub(crate) fn scan_number(bytes: &[u8], start: usize) -> Result<(f64, usize), SyntaxError> {
    let mut i = start;
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - s
    };
    if digits(&mut i) == 0 {
        return Err(err(i, &["digit"], None));
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        if digits(&mut i) == 0 {
            return Err(err(i, &["digit after `.`"], found_at(bytes, i)));
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        if digits(&mut i) == 0 {
            return Err(err(i, &["exponent digit"], found_at(bytes, i)));
        }
    }
    // the scanned range is pure ASCII
    let text = std::str::from_utf8(&bytes[start..i]).expect("ascii literal");
    let value: f64 = text
        .parse()
        .map_err(|_| err(start, &["number"], Some(text.to_string())))?;
    if !value.is_finite() {
        return Err(err(start, &["finite number"], Some(text.to_string())));
    }
    Ok((value, i))
}

fn found_at(bytes: &[u8], i: usize) -> Option<String> {
    if i >= bytes.len() {
        return None;
    }
    let rest = String::from_utf8_lossy(&bytes[i..]);
    rest.chars().next().map(|c| format!("`{c}`"))
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let tok = match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' => {
                let (value, end) = scan_number(bytes, i)?;
                out.push((start, Tok::Num(value)));
                i = end;
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(err(
                    i,
                    &["number", "identifier", "operator", "`(`"],
                    found_at(bytes, i),
                ))
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn unexpected(&self, expected: &[&str]) -> SyntaxError {
        err(self.offset(), expected, self.peek().map(Tok::describe))
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(err(self.offset(), &["shallower nesting"], None));
        }
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        const START: &[&str] = &["number", "identifier", "`-`", "`(`"];
        let start = self.offset();
        match self.peek().cloned() {
            Some(Tok::Minus) => {
                self.pos += 1;
                self.depth += 1;
                if self.depth > MAX_NESTING {
                    return Err(err(start, &["shallower nesting"], None));
                }
                let inner = self.factor()?;
                self.depth -= 1;
                Ok(Expr::Neg(Box::new(inner)))
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Expr::Var(name));
                }
                let Some(func) = Builtin::from_name(&name) else {
                    return Err(err(
                        start,
                        &["min", "max", "ceil", "floor", "abs"],
                        Some(format!("function `{name}`")),
                    ));
                };
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if args.len() != func.arity() {
                    return Err(err(
                        start,
                        &[&format!("{} argument(s) to {}", func.arity(), func.name())],
                        Some(format!("{} argument(s)", args.len())),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected(START)),
        }
    }
}

/// Parses expression text. Whitespace is insignificant.
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end: text.len(),
        depth: 0,
    };
    let expr = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.unexpected(&["operator", "end of input"]));
    }
    Ok(expr)
}
