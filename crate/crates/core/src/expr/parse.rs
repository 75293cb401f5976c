use std::collections::BTreeSet;
use std::fmt;

use super::{BinaryOp, Coord, Expression, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
    CoordinateOutOfRange { name: String, dim: usize },
}

/// Parse failure annotated with a 1-based column.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error at column {}: {msg}", self.column),
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(f, "unknown identifier {name} at column {}", self.column)
            }
            ParseErrorKind::CoordinateOutOfRange { name, dim } => write!(
                f,
                "coordinate {name} at column {} is out of range for dimension {dim}",
                self.column
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let tok = lx.next()?;
            let done = tok.0 == Tok::End;
            out.push(tok);
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let column = self.src[..start].chars().count() + 1;
        let Some(c) = self.peek() else {
            return Ok((Tok::End, column));
        };
        if c.is_ascii_digit() || c == '.' {
            self.eat_while(|c| c.is_ascii_digit());
            if self.peek() == Some('.') {
                self.pos += 1;
                self.eat_while(|c| c.is_ascii_digit());
            }
            if matches!(self.peek(), Some('e' | 'E')) {
                let mark = self.pos;
                self.pos += 1;
                if matches!(self.peek(), Some('+' | '-')) {
                    self.pos += 1;
                }
                let digits = self.eat_while(|c| c.is_ascii_digit());
                if digits == 0 {
                    self.pos = mark;
                }
            }
            let text = &self.src[start..self.pos];
            return text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| (Tok::Num(v), column))
                .ok_or_else(|| ParseError {
                    column,
                    kind: ParseErrorKind::Syntax(format!("malformed number '{text}'")),
                });
        }
        if c.is_ascii_alphabetic() || c == '_' {
            self.eat_while(|c| c.is_ascii_alphanumeric() || c == '_');
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), column));
        }
        if "+-*/^()".contains(c) {
            self.pos += 1;
            return Ok((Tok::Op(c), column));
        }
        Err(ParseError {
            column,
            kind: ParseErrorKind::Syntax(format!("unexpected character '{c}'")),
        })
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) -> usize {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if pred(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        self.pos - start
    }
}

// binding powers: add/sub < mul/div < unary minus < pow
const BP_NEG: u8 = 5;

fn infix_binding(op: char) -> Option<(BinaryOp, u8, u8)> {
    match op {
        '+' => Some((BinaryOp::Add, 1, 2)),
        '-' => Some((BinaryOp::Sub, 1, 2)),
        '*' => Some((BinaryOp::Mul, 3, 4)),
        '/' => Some((BinaryOp::Div, 3, 4)),
        '^' => Some((BinaryOp::Pow, 7, 6)),
        _ => None,
    }
}

/// Splits `x12` / `y3` into a coordinate, if the identifier has that shape.
pub(crate) fn coordinate_name(name: &str) -> Option<Coord> {
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let index = digits.parse::<usize>().ok()?;
    match head {
        "x" => Some(Coord::X(index)),
        "y" => Some(Coord::Y(index)),
        _ => None,
    }
}

/// True if `name` may be used as a parameter name.
pub fn is_valid_param_name(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && coordinate_name(name).is_none()
        && UnaryOp::from_function_name(name).is_none()
        && name != "pi"
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    dim: usize,
    params: &'a BTreeSet<String>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn column(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if t.0 != Tok::End {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { column: self.column(), kind: ParseErrorKind::Syntax(msg.into()) })
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Op(')') => {
                self.bump();
                Ok(())
            }
            _ => self.syntax("expected ')'"),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expression, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let Tok::Op(c) = *self.peek() else { break };
            let Some((op, lbp, rbp)) = infix_binding(c) else { break };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = Expression::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expression, ParseError> {
        let (tok, column) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expression::Const(v)),
            Tok::Op('-') => Ok(Expression::unary(UnaryOp::Neg, self.expr(BP_NEG)?)),
            Tok::Op('(') => {
                let inner = self.expr(0)?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, column),
            Tok::End => Err(ParseError {
                column,
                kind: ParseErrorKind::Syntax("unexpected end of input".into()),
            }),
            Tok::Op(c) => Err(ParseError {
                column,
                kind: ParseErrorKind::Syntax(format!("unexpected '{c}'")),
            }),
        }
    }

    fn identifier(&mut self, name: String, column: usize) -> Result<Expression, ParseError> {
        if let Some(op) = UnaryOp::from_function_name(&name) {
            if *self.peek() != Tok::Op('(') {
                return self.syntax(format!("expected '(' after {name}"));
            }
            self.bump();
            let arg = self.expr(0)?;
            self.expect_close()?;
            return Ok(Expression::unary(op, arg));
        }
        if name == "pi" {
            return Ok(Expression::Const(std::f64::consts::PI));
        }
        if let Some(coord) = coordinate_name(&name) {
            if coord.index() == 0 || coord.index() > self.dim {
                return Err(ParseError {
                    column,
                    kind: ParseErrorKind::CoordinateOutOfRange { name, dim: self.dim },
                });
            }
            return Ok(Expression::Coord(coord));
        }
        if self.params.contains(&name) {
            return Ok(Expression::Param(name));
        }
        Err(ParseError { column, kind: ParseErrorKind::UnknownIdentifier(name) })
    }
}

/// Parses `text` as an expression over `x1..xn, y1..yn` and the given
/// parameter names.
pub fn parse<S: AsRef<str>>(text: &str, dim: usize, params: &[S]) -> Result<Expression, ParseError> {
    assert!(dim >= 1, "dimension must be at least 1");
    let params: BTreeSet<String> = params.iter().map(|s| s.as_ref().to_string()).collect();
    let toks = Lexer::tokenize(text)?;
    let mut p = Parser { toks, at: 0, dim, params: &params };
    if *p.peek() == Tok::End {
        return p.syntax("empty expression");
    }
    let e = p.expr(0)?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::Op(')') => p.syntax("unbalanced ')'"),
        _ => p.syntax("expected an operator"),
    }
}
