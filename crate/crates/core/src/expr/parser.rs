//! Recursive-descent parser for the coefficient-expression grammar.
//!
//! Precedence (tightest first): `^` (right-associative), unary `-`,
//! `* /`, `+ -`. So `-t^2` parses as `-(t^2)` and `2^t^2` as `2^(t^2)`.

use std::fmt;

use thiserror::Error;

use super::{BinOp, Expr, Func};

/// Syntax error with the byte offset of the offending token and the set of
/// token kinds that would have been accepted there.
#[derive(Debug, Error, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub found: String,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {}: found {}, expected one of [{}]",
            self.offset,
            self.found,
            self.expected.join(", ")
        )
    }
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
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            b'-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            b'*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            b'/' => {
                toks.push((i, Tok::Slash));
                i += 1;
            }
            b'^' => {
                toks.push((i, Tok::Caret));
                i += 1;
            }
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // exponent part only if digits follow (otherwise `e` is the constant)
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
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    found: format!("`{text}`"),
                    expected: vec!["number"],
                })?;
                toks.push((start, Tok::Num(v)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: i,
                    found: format!("`{ch}`"),
                    expected: vec!["number", "identifier", "operator", "`(`", "`)`"],
                });
            }
        }
    }
    toks.push((src.len(), Tok::Eof));
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

const PRIMARY_EXPECTED: &[&str] = &[
    "number",
    "`t`",
    "`pi`",
    "`e`",
    "function name",
    "`(`",
    "`-`",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            found: self.peek().describe(),
            expected: expected.to_vec(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if matches!(self.peek(), Tok::Caret) {
            self.bump();
            // right-associative; the exponent may carry a unary minus
            let exp = self.unary()?;
            return Ok(base.pow(exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(self.error(&["`)`", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "t" => {
                        self.bump();
                        return Ok(Expr::Time);
                    }
                    "pi" => {
                        self.bump();
                        return Ok(Expr::Pi);
                    }
                    "e" => {
                        self.bump();
                        return Ok(Expr::E);
                    }
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "tan" => Func::Tan,
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    "tanh" => Func::Tanh,
                    "atan" => Func::Atan,
                    _ => return Err(self.error(PRIMARY_EXPECTED)),
                };
                self.bump();
                if !matches!(self.peek(), Tok::LParen) {
                    return Err(self.error(&["`(`"]));
                }
                self.bump();
                let arg = self.expr()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(self.error(&["`)`", "operator"]));
                }
                self.bump();
                Ok(Expr::call(func, arg))
            }
            _ => Err(self.error(PRIMARY_EXPECTED)),
        }
    }
}

/// Parses a coefficient expression, returning the AST or a syntax error
/// with byte offset and expected-token set.
///
/// ```
/// use qriccati::expr::parse_expr;
///
/// let e = parse_expr("2*t + sin(t)").unwrap();
/// assert_eq!(e.eval(0.0).unwrap(), 0.0);
/// assert!((e.diff().eval(0.0).unwrap() - 3.0).abs() < 1e-15);
/// ```
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(
            parse_expr("2*t + sin(t)").unwrap(),
            Expr::Num(2.0)
                .mul(Expr::Time)
                .add(Expr::call(Func::Sin, Expr::Time))
        );
        // ^ binds tighter than unary minus
        assert_eq!(
            parse_expr("-t^2").unwrap(),
            Expr::Time.pow(Expr::Num(2.0)).neg()
        );
    }

    #[test]
    fn double_star_is_an_error_at_the_second_star() {
        let err = parse_expr("2 ** t").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(err.expected.contains(&"number"));
    }

    #[test]
    fn error_reports_offset_and_expectations() {
        let err = parse_expr("sin 3").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(err.expected, vec!["`(`"]);

        let err = parse_expr("(1 + t").unwrap_err();
        assert_eq!(err.offset, 6);

        let err = parse_expr("foo(t)").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(parse_expr("2.5e-3").unwrap(), Expr::Num(2.5e-3));
        assert_eq!(parse_expr("1E2").unwrap(), Expr::Num(100.0));
        // `e` directly after digits without exponent digits is the constant
        assert_eq!(parse_expr("2 * e").unwrap(), Expr::Num(2.0).mul(Expr::E));
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(
            parse_expr("2 ^ t ^ 2").unwrap(),
            Expr::Num(2.0).pow(Expr::Time.pow(Expr::Num(2.0)))
        );
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(parse_expr("1 + 2 )").is_err());
        assert!(parse_expr("").is_err());
    }
}
