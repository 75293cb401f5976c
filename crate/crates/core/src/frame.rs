//! Nonlinear connection, adapted frame and the structure operators.
//!
//! A connection `N[i][j]` fixes the adapted frame and coframe
//!
//! ```text
//! δ/δx^i = ∂/∂x^i − Σ_j N[i][j] ∂/∂y^j        δy^i = dy^i + Σ_j N[j][i] dx^j
//! ```
//!
//! which are dual to each other at every point. All maps here act on
//! component vectors of length 2n in natural order `x1..xn, y1..yn`; the
//! operators h, v, P, J and the duals P*, J* are realized as dense 2n×2n
//! matrices at a point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{eval_jet, parse, Expression, Jet2, Params};
use crate::point::BundlePoint;

/// The n×n matrix of connection coefficients, as expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    n: usize,
    entries: Vec<Expression>,
}

impl Connection {
    pub fn zero(n: usize) -> Self {
        Self { n, entries: vec![Expression::Const(0.0); n * n] }
    }

    /// Builds a connection from row-major entries.
    pub fn new(n: usize, entries: Vec<Expression>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Invalid(format!("connection must be {n}x{n}")));
        }
        if let Some(bad) = entries.iter().find(|e| e.max_index() > n) {
            return Err(Error::Invalid(format!("connection entry `{bad}` exceeds dimension {n}")));
        }
        Ok(Self { n, entries })
    }

    /// Parses a square table of expression texts.
    pub fn parse<S: AsRef<str>, P: AsRef<str>>(rows: &[Vec<S>], params: &[P]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(format!("connection must be {n}x{n}")));
        }
        let entries = rows
            .iter()
            .flatten()
            .map(|s| parse(s.as_ref(), n, params))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, entries)
    }

    /// A connection with constant coefficients.
    pub fn constant(values: &DMatrix<f64>) -> Self {
        assert!(values.is_square());
        let n = values.nrows();
        let entries = (0..n * n).map(|k| Expression::constant(values[(k / n, k % n)])).collect();
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `N[i][j]`, 0-based.
    pub fn entry(&self, i: usize, j: usize) -> &Expression {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Expression] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Expression::is_zero)
    }

    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.iter().flat_map(Expression::params).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn eval(&self, p: &BundlePoint, params: &Params) -> Result<FrameEval> {
        eval_frame(self, p, params)
    }
}

/// Connection data at a point: values and first natural partials.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEval {
    pub point: BundlePoint,
    pub nval: DMatrix<f64>,
    // n×n×n, index (i, j, k) -> (i*n + j)*n + k
    nx: Vec<f64>,
    ny: Vec<f64>,
}

/// Evaluates the connection and its partials at `p`.
pub fn eval_frame(conn: &Connection, p: &BundlePoint, params: &Params) -> Result<FrameEval> {
    let n = conn.dim();
    if p.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
    }
    let mut nval = DMatrix::zeros(n, n);
    let mut nx = vec![0.0; n * n * n];
    let mut ny = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let e = conn.entry(i, j);
            if e.is_zero() {
                continue;
            }
            let jet = eval_jet(e, p, params)?;
            nval[(i, j)] = jet.value;
            for k in 0..n {
                nx[(i * n + j) * n + k] = jet.grad[k];
                ny[(i * n + j) * n + k] = jet.grad[n + k];
            }
        }
    }
    Ok(FrameEval { point: p.clone(), nval, nx, ny })
}

/// Structure operators on vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    /// h: projector onto the horizontal distribution.
    Horizontal,
    /// v: projector onto the vertical distribution.
    Vertical,
    /// P = h − v, the almost product structure.
    Product,
    /// J, the almost tangent structure: δ/δx^i ↦ ∂/∂y^i, ∂/∂y^i ↦ 0.
    Tangent,
}

/// Structure operators on covectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DualOperator {
    /// P*: dx^i ↦ dx^i, δy^i ↦ −δy^i.
    Product,
    /// J*: dx^i ↦ δy^i, δy^i ↦ 0 (dx^i ↦ dy^i when N = 0).
    Tangent,
}

fn block_diag(n: usize, top: f64, bottom: f64) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| match (r == c, r < n) {
        (true, true) => top,
        (true, false) => bottom,
        _ => 0.0,
    })
}

fn lower_shift(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| if r >= n && r - n == c { 1.0 } else { 0.0 })
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Horizontal, Operator::Vertical, Operator::Product, Operator::Tangent];

    /// Matrix acting on adapted components `(a on δ/δx, b on ∂/∂y)`.
    pub fn adapted_matrix(self, n: usize) -> DMatrix<f64> {
        match self {
            Operator::Horizontal => block_diag(n, 1.0, 0.0),
            Operator::Vertical => block_diag(n, 0.0, 1.0),
            Operator::Product => block_diag(n, 1.0, -1.0),
            Operator::Tangent => lower_shift(n),
        }
    }
}

impl DualOperator {
    /// Matrix acting on adapted coframe components `(on dx, on δy)`.
    pub fn adapted_matrix(self, n: usize) -> DMatrix<f64> {
        match self {
            DualOperator::Product => block_diag(n, 1.0, -1.0),
            DualOperator::Tangent => lower_shift(n),
        }
    }
}

/// Second adapted derivatives of a scalar field at a point.
///
/// Index convention: `dd[(j, i)] = δ_j δ_i f`, `dv[(j, i)] = δ_j ∂_{y^i} f`,
/// `vd[(j, i)] = ∂_{y^j} δ_i f`, `vv[(j, i)] = ∂_{y^j} ∂_{y^i} f`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedDerivatives {
    pub dx_adapted: DVector<f64>,
    pub dy: DVector<f64>,
    pub dd: DMatrix<f64>,
    pub dv: DMatrix<f64>,
    pub vd: DMatrix<f64>,
    pub vv: DMatrix<f64>,
}

impl FrameEval {
    pub fn dim(&self) -> usize {
        self.nval.nrows()
    }

    /// A frame with N ≡ 0 at `point`.
    pub fn flat(point: &BundlePoint) -> Self {
        let n = point.dim();
        Self {
            point: point.clone(),
            nval: DMatrix::zeros(n, n),
            nx: vec![0.0; n * n * n],
            ny: vec![0.0; n * n * n],
        }
    }

    /// ∂N[i][j]/∂x^k
    pub fn nx(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.nx[(i * n + j) * n + k]
    }

    /// ∂N[i][j]/∂y^k
    pub fn ny(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.ny[(i * n + j) * n + k]
    }

    /// δ_l N[i][j] = ∂_{x^l} N[i][j] − Σ_m N[l][m] ∂_{y^m} N[i][j]
    pub fn horizontal_nx(&self, i: usize, j: usize, l: usize) -> f64 {
        let n = self.dim();
        self.nx(i, j, l) - (0..n).map(|m| self.nval[(l, m)] * self.ny(i, j, m)).sum::<f64>()
    }

    /// Columns are the adapted frame `δ/δx^1..δ/δx^n, ∂/∂y^1..∂/∂y^n` in
    /// natural components.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut e = DMatrix::identity(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                e[(n + j, i)] = -self.nval[(i, j)];
            }
        }
        e
    }

    /// Rows are the adapted coframe `dx^1..dx^n, δy^1..δy^n` in natural
    /// components.
    pub fn cobasis_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut f = DMatrix::identity(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                f[(n + i, j)] = self.nval[(j, i)];
            }
        }
        f
    }

    pub fn vector_to_adapted(&self, v: &DVector<f64>) -> DVector<f64> {
        self.cobasis_matrix() * v
    }

    pub fn vector_to_natural(&self, a: &DVector<f64>) -> DVector<f64> {
        self.basis_matrix() * a
    }

    pub fn covector_to_adapted(&self, c: &DVector<f64>) -> DVector<f64> {
        self.basis_matrix().tr_mul(c)
    }

    pub fn covector_to_natural(&self, a: &DVector<f64>) -> DVector<f64> {
        self.cobasis_matrix().tr_mul(a)
    }

    /// Natural-component matrix of a structure operator on vectors.
    pub fn operator_matrix(&self, op: Operator) -> DMatrix<f64> {
        self.basis_matrix() * op.adapted_matrix(self.dim()) * self.cobasis_matrix()
    }

    /// Natural-component matrix of a structure operator on covectors.
    pub fn dual_operator_matrix(&self, op: DualOperator) -> DMatrix<f64> {
        self.cobasis_matrix().transpose() * op.adapted_matrix(self.dim()) * self.basis_matrix().transpose()
    }

    /// δf/δx^i from a jet of f.
    pub fn horizontal_gradient(&self, jet: &Jet2) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| {
            jet.grad[i] - (0..n).map(|k| self.nval[(i, k)] * jet.grad[n + k]).sum::<f64>()
        })
    }

    /// Assembles the adapted second derivatives from the jet of f and the
    /// connection partials.
    pub fn adapted_derivatives(&self, jet: &Jet2) -> AdaptedDerivatives {
        let n = self.dim();
        assert_eq!(jet.dim(), 2 * n, "jet dimension does not match frame");
        let g = &jet.grad;
        let h = &jet.hess;
        let nv = &self.nval;
        let fy = |k: usize| g[n + k];
        let fxx = |a: usize, b: usize| h[(a, b)];
        let fxy = |a: usize, b: usize| h[(a, n + b)];
        let fyy = |a: usize, b: usize| h[(n + a, n + b)];

        let dx_adapted = self.horizontal_gradient(jet);
        let dy = DVector::from_fn(n, |i, _| fy(i));
        let vv = DMatrix::from_fn(n, n, fyy);
        let dv = DMatrix::from_fn(n, n, |j, i| {
            fxy(j, i) - (0..n).map(|k| nv[(j, k)] * fyy(k, i)).sum::<f64>()
        });
        let vd = DMatrix::from_fn(n, n, |j, i| {
            fxy(i, j)
                - (0..n).map(|k| self.ny(i, k, j) * fy(k)).sum::<f64>()
                - (0..n).map(|k| nv[(i, k)] * fyy(j, k)).sum::<f64>()
        });
        let dd = DMatrix::from_fn(n, n, |j, i| {
            let natural_x = fxx(j, i)
                - (0..n).map(|k| self.nx(i, k, j) * fy(k)).sum::<f64>()
                - (0..n).map(|k| nv[(i, k)] * fxy(j, k)).sum::<f64>();
            natural_x - (0..n).map(|l| nv[(j, l)] * vd[(l, i)]).sum::<f64>()
        });
        AdaptedDerivatives { dx_adapted, dy, dd, dv, vd, vv }
    }
}

/// Adapted first and second derivatives of `f` at `p`.
pub fn adapted_derivatives(
    f: &Expression,
    conn: &Connection,
    p: &BundlePoint,
    params: &Params,
) -> Result<AdaptedDerivatives> {
    let frame = eval_frame(conn, p, params)?;
    let jet = eval_jet(f, p, params)?;
    Ok(frame.adapted_derivatives(&jet))
}

/// Applies h, v, P or J to a vector given in natural components.
pub fn apply_operator(
    op: Operator,
    vec: &DVector<f64>,
    conn: &Connection,
    p: &BundlePoint,
    params: &Params,
) -> Result<DVector<f64>> {
    let frame = eval_frame(conn, p, params)?;
    check_len(vec, frame.dim())?;
    Ok(frame.operator_matrix(op) * vec)
}

/// Applies P* or J* to a covector given in natural components.
pub fn apply_dual_operator(
    op: DualOperator,
    cov: &DVector<f64>,
    conn: &Connection,
    p: &BundlePoint,
    params: &Params,
) -> Result<DVector<f64>> {
    let frame = eval_frame(conn, p, params)?;
    check_len(cov, frame.dim())?;
    Ok(frame.dual_operator_matrix(op) * cov)
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() == 2 * n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: 2 * n, got: v.len() })
    }
}
