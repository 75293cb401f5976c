use nalgebra::{DMatrix, DVector};

use super::{BinaryOp, Expression, Params, UnaryOp};
use crate::point::BundlePoint;

/// Value, natural gradient and natural Hessian of a scalar at a point.
///
/// Gradient and Hessian are ordered `x1..xn, y1..yn`. The Hessian is only
/// ever assembled from its upper triangle and mirrored, so it is exactly
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error: {message} in `{subexpr}`")]
    Domain { message: String, subexpr: String },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("point has dimension {point} but expression references coordinate index {index}")]
    DimensionMismatch { point: usize, index: usize },
}

fn symmetric(m: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = f(i, j);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

impl Jet2 {
    pub fn constant(m: usize, value: f64) -> Self {
        Self { value, grad: DVector::zeros(m), hess: DMatrix::zeros(m, m) }
    }

    pub fn variable(m: usize, slot: usize, value: f64) -> Self {
        let mut grad = DVector::zeros(m);
        grad[slot] = 1.0;
        Self { value, grad, hess: DMatrix::zeros(m, m) }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    fn is_locally_constant(&self) -> bool {
        self.grad.iter().chain(self.hess.iter()).all(|v| *v == 0.0)
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let g = &self.grad;
        let h = &self.hess;
        Self {
            value: f,
            grad: g * df,
            hess: symmetric(self.dim(), |i, j| d2f * g[i] * g[j] + df * h[(i, j)]),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            value: self.value + o.value,
            grad: &self.grad + &o.grad,
            hess: symmetric(self.dim(), |i, j| self.hess[(i, j)] + o.hess[(i, j)]),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            value: self.value - o.value,
            grad: &self.grad - &o.grad,
            hess: symmetric(self.dim(), |i, j| self.hess[(i, j)] - o.hess[(i, j)]),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = (self.value, o.value);
        let (ga, gb) = (&self.grad, &o.grad);
        Self {
            value: a * b,
            grad: gb * a + ga * b,
            hess: symmetric(self.dim(), |i, j| {
                a * o.hess[(i, j)] + b * self.hess[(i, j)] + (ga[i] * gb[j] + gb[i] * ga[j])
            }),
        }
    }

    pub fn neg(&self) -> Self {
        Self { value: -self.value, grad: -&self.grad, hess: -&self.hess }
    }

    pub fn powi(&self, k: i32) -> Self {
        let u = self.value;
        match k {
            0 => Self::constant(self.dim(), 1.0),
            1 => self.clone(),
            _ => self.chain(
                u.powi(k),
                k as f64 * u.powi(k - 1),
                (k as f64) * (k as f64 - 1.0) * u.powi(k - 2),
            ),
        }
    }
}

fn domain(message: impl Into<String>, e: &Expression) -> EvalError {
    EvalError::Domain { message: message.into(), subexpr: e.to_string() }
}

fn check_finite(j: Jet2, e: &Expression) -> Result<Jet2, EvalError> {
    if j.value.is_finite() && j.grad.iter().all(|v| v.is_finite()) && j.hess.iter().all(|v| v.is_finite()) {
        Ok(j)
    } else {
        Err(domain("non-finite result", e))
    }
}

/// Exponents within this range that are exact integers use the integer
/// power rule instead of `exp(b·log a)`.
const MAX_UNROLLED_EXPONENT: f64 = 64.0;

fn as_integer_exponent(j: &Jet2) -> Option<i32> {
    let v = j.value;
    (j.is_locally_constant() && v.fract() == 0.0 && v.abs() <= MAX_UNROLLED_EXPONENT).then_some(v as i32)
}

/// Evaluates `e` at `p` with exact first and second derivatives.
pub fn eval_jet(e: &Expression, p: &BundlePoint, params: &Params) -> Result<Jet2, EvalError> {
    let n = p.dim();
    let m = 2 * n;
    let j = match e {
        Expression::Const(c) => Jet2::constant(m, *c),
        Expression::Coord(c) => {
            if c.index() == 0 || c.index() > n {
                return Err(EvalError::DimensionMismatch { point: n, index: c.index() });
            }
            let slot = c.slot(n);
            Jet2::variable(m, slot, p.slot(slot))
        }
        Expression::Param(name) => {
            let v = params.get(name).ok_or_else(|| EvalError::UnboundParameter(name.clone()))?;
            Jet2::constant(m, *v)
        }
        Expression::Unary(op, a) => {
            let u = eval_jet(a, p, params)?;
            let x = u.value;
            match op {
                UnaryOp::Neg => u.neg(),
                UnaryOp::Sin => u.chain(x.sin(), x.cos(), -x.sin()),
                UnaryOp::Cos => u.chain(x.cos(), -x.sin(), -x.cos()),
                UnaryOp::Exp => {
                    let ex = x.exp();
                    u.chain(ex, ex, ex)
                }
                UnaryOp::Log => {
                    if x <= 0.0 {
                        return Err(domain(format!("log of non-positive value {x}"), e));
                    }
                    u.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
                }
                UnaryOp::Sqrt => {
                    if x <= 0.0 {
                        return Err(domain(format!("sqrt of non-positive value {x}"), e));
                    }
                    let s = x.sqrt();
                    u.chain(s, 0.5 / s, -0.25 / (s * x))
                }
            }
        }
        Expression::Binary(op, a, b) => {
            let u = eval_jet(a, p, params)?;
            let v = eval_jet(b, p, params)?;
            match op {
                BinaryOp::Add => u.add(&v),
                BinaryOp::Sub => u.sub(&v),
                BinaryOp::Mul => u.mul(&v),
                BinaryOp::Div => {
                    let d = v.value;
                    if d == 0.0 {
                        return Err(domain("division by zero", e));
                    }
                    u.mul(&v.chain(1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d)))
                }
                BinaryOp::Pow => match as_integer_exponent(&v) {
                    Some(k) => {
                        if k < 0 && u.value == 0.0 {
                            return Err(domain("zero raised to a negative power", e));
                        }
                        u.powi(k)
                    }
                    None => {
                        if u.value <= 0.0 {
                            return Err(domain(
                                format!("non-integer power of non-positive base {}", u.value),
                                e,
                            ));
                        }
                        let l = u.value.ln();
                        let log_u = u.chain(l, 1.0 / u.value, -1.0 / (u.value * u.value));
                        let ex = v.mul(&log_u);
                        let r = ex.value.exp();
                        ex.chain(r, r, r)
                    }
                },
            }
        }
    };
    check_finite(j, e)
}

/// Value-only evaluation, with the same domain rules as [`eval_jet`].
pub fn eval_value(e: &Expression, p: &BundlePoint, params: &Params) -> Result<f64, EvalError> {
    let v = match e {
        Expression::Const(c) => *c,
        Expression::Coord(c) => {
            let n = p.dim();
            if c.index() == 0 || c.index() > n {
                return Err(EvalError::DimensionMismatch { point: n, index: c.index() });
            }
            p.slot(c.slot(n))
        }
        Expression::Param(name) => {
            *params.get(name).ok_or_else(|| EvalError::UnboundParameter(name.clone()))?
        }
        Expression::Unary(op, a) => {
            let x = eval_value(a, p, params)?;
            match op {
                UnaryOp::Neg => -x,
                UnaryOp::Sin => x.sin(),
                UnaryOp::Cos => x.cos(),
                UnaryOp::Exp => x.exp(),
                UnaryOp::Log if x <= 0.0 => {
                    return Err(domain(format!("log of non-positive value {x}"), e))
                }
                UnaryOp::Log => x.ln(),
                UnaryOp::Sqrt if x <= 0.0 => {
                    return Err(domain(format!("sqrt of non-positive value {x}"), e))
                }
                UnaryOp::Sqrt => x.sqrt(),
            }
        }
        Expression::Binary(op, a, b) => {
            let u = eval_value(a, p, params)?;
            match op {
                BinaryOp::Pow => {
                    // exponent may depend on coordinates; defer to the jet rule
                    let j = eval_jet(e, p, params)?;
                    return Ok(j.value);
                }
                _ => {
                    let v = eval_value(b, p, params)?;
                    match op {
                        BinaryOp::Add => u + v,
                        BinaryOp::Sub => u - v,
                        BinaryOp::Mul => u * v,
                        BinaryOp::Div if v == 0.0 => return Err(domain("division by zero", e)),
                        BinaryOp::Div => u / v,
                        BinaryOp::Pow => unreachable!(),
                    }
                }
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain("non-finite result", e))
    }
}
