//! Arithmetic expressions over bundle coordinates.
//!
//! Scalar fields (the Lagrangian, the Hamiltonian) and every entry of a
//! nonlinear connection are written in a small infix language:
//!
//! ```text
//! 0.5*(y1^2 + y2^2) - k*cos(x1)
//! ```
//!
//! Identifiers `x1..xn` and `y1..yn` name base and fiber coordinates, `pi` is
//! the usual constant, `sin cos exp log sqrt` are the available functions and
//! every other identifier must be a declared parameter. Expressions are
//! evaluated together with their first and second natural partial
//! derivatives by forward propagation of [`Jet2`] values.

mod jet;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

pub use jet::{eval_jet, eval_value, EvalError, Jet2};
pub use parse::{is_valid_param_name, parse, ParseError, ParseErrorKind};

/// Named real parameters referenced by expressions.
pub type Params = BTreeMap<String, f64>;

/// A coordinate reference. Indices are 1-based, as written in the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    /// Base coordinate `x_i`.
    X(usize),
    /// Fiber coordinate `y_i` (velocity on TM, momentum on T*M).
    Y(usize),
}

impl Coord {
    /// Position of this coordinate in the natural ordering `x1..xn, y1..yn`.
    pub fn slot(self, n: usize) -> usize {
        match self {
            Coord::X(i) => i - 1,
            Coord::Y(i) => n + i - 1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Coord::X(i) | Coord::Y(i) => i,
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::X(i) => write!(f, "x{i}"),
            Coord::Y(i) => write!(f, "y{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }

    pub(crate) fn from_function_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            "sqrt" => Some(UnaryOp::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => " + ",
            BinaryOp::Sub => " - ",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// Expression AST.
///
/// `Const` holds finite non-negative values; a negative literal is the
/// negation of a positive one, which is also what the parser produces.
/// Use [`Expression::constant`] to build constants from arbitrary reals.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Const(f64),
    Coord(Coord),
    Param(String),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
}

impl Expression {
    pub fn constant(value: f64) -> Self {
        assert!(value.is_finite(), "expression constants must be finite");
        if value < 0.0 {
            Expression::Unary(UnaryOp::Neg, Box::new(Expression::Const(-value)))
        } else {
            // folds -0.0 into 0.0
            Expression::Const(value.abs())
        }
    }

    pub fn x(i: usize) -> Self {
        Expression::Coord(Coord::X(i))
    }

    pub fn y(i: usize) -> Self {
        Expression::Coord(Coord::Y(i))
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expression::Param(name.into())
    }

    pub fn unary(op: UnaryOp, arg: Expression) -> Self {
        Expression::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Expression, rhs: Expression) -> Self {
        Expression::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn pow(self, exponent: Expression) -> Self {
        Self::binary(BinaryOp::Pow, self, exponent)
    }

    pub fn sin(self) -> Self {
        Self::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Self {
        Self::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Self {
        Self::unary(UnaryOp::Exp, self)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expression::Const(c) if *c == 0.0)
    }

    /// Visits every coordinate reference.
    pub fn coords(&self) -> Vec<Coord> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expression::Coord(c) = e {
                out.push(*c);
            }
        });
        out
    }

    /// Names of all referenced parameters, sorted and deduplicated.
    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expression::Param(p) = e {
                out.push(p.clone());
            }
        });
        out.sort();
        out.dedup();
        out
    }

    /// Largest coordinate index referenced (0 if none).
    pub fn max_index(&self) -> usize {
        self.coords().into_iter().map(Coord::index).max().unwrap_or(0)
    }

    fn walk(&self, f: &mut impl FnMut(&Expression)) {
        f(self);
        match self {
            Expression::Unary(_, a) => a.walk(f),
            Expression::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expression::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expression::Unary(UnaryOp::Neg, _) => 3,
            Expression::Binary(BinaryOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Precedence-minimal printing; `parse(print(e))` reproduces `e` exactly.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Const(c) if *c < 0.0 => write!(f, "({c})"),
            Expression::Const(c) => write!(f, "{c}"),
            Expression::Coord(c) => write!(f, "{c}"),
            Expression::Param(p) => f.write_str(p),
            Expression::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                a.write_child(f, a.precedence() < 3)
            }
            Expression::Unary(op, a) => {
                write!(f, "{}(", op.function_name().unwrap_or_default())?;
                write!(f, "{a})")
            }
            Expression::Binary(op, a, b) => {
                let prec = self.precedence();
                let (left_parens, right_parens) = match op {
                    // right-associative; a negated exponent needs no parens
                    BinaryOp::Pow => (a.precedence() <= prec, b.precedence() < 3),
                    _ => (a.precedence() < prec, b.precedence() <= prec),
                };
                a.write_child(f, left_parens)?;
                f.write_str(op.symbol())?;
                b.write_child(f, right_parens)
            }
        }
    }
}

impl std::ops::Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Add, self, rhs)
    }
}

impl std::ops::Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Sub, self, rhs)
    }
}

impl std::ops::Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Mul, self, rhs)
    }
}

impl std::ops::Div for Expression {
    type Output = Expression;
    fn div(self, rhs: Expression) -> Expression {
        Expression::binary(BinaryOp::Div, self, rhs)
    }
}

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::unary(UnaryOp::Neg, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_minimal_parentheses() {
        let e = Expression::constant(0.5) * Expression::y(1).pow(Expression::constant(2.0));
        assert_eq!(e.to_string(), "0.5*y1^2");
        assert_eq!(Expression::constant(3.0).to_string(), "3");
        assert_eq!((-Expression::x(1)).to_string(), "-x1");
        let e = Expression::x(1) - (-Expression::x(1));
        assert_eq!(e.to_string(), "x1 - -x1");
    }

    #[test]
    fn keeps_structure_in_parentheses() {
        let a = Expression::x(1);
        let b = Expression::x(2);
        let c = Expression::y(1);
        assert_eq!((a.clone() - (b.clone() - c.clone())).to_string(), "x1 - (x2 - y1)");
        assert_eq!((a.clone() - b.clone() - c.clone()).to_string(), "x1 - x2 - y1");
        assert_eq!(a.clone().pow(b.clone()).pow(c.clone()).to_string(), "(x1^x2)^y1");
        assert_eq!(a.clone().pow(b.clone().pow(c.clone())).to_string(), "x1^x2^y1");
        assert_eq!((-a.clone()).pow(b.clone()).to_string(), "(-x1)^x2");
        assert_eq!((-(a.clone() + b.clone())).to_string(), "-(x1 + x2)");
        assert_eq!((a / (b * c)).to_string(), "x1/(x2*y1)");
    }

    #[test]
    fn constant_normalizes_sign() {
        assert_eq!(Expression::constant(-2.0), -Expression::Const(2.0));
        assert_eq!(Expression::constant(-0.0), Expression::Const(0.0));
    }

    #[test]
    fn collects_params_and_indices() {
        let e = Expression::param("k") * Expression::x(3) + Expression::param("a") * Expression::y(1);
        assert_eq!(e.params(), vec!["a".to_string(), "k".to_string()]);
        assert_eq!(e.max_index(), 3);
    }
}
