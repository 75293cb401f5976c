//! Pointwise exterior calculus on the 2n-dimensional chart.
//!
//! One- and two-forms carry a basis tag: natural `(dx, dy)` or adapted
//! `(dx, δy)`. A two-form is stored as the antisymmetric matrix `W` with
//! `ω(X, Y) = Xᵀ W Y`, so `a ∧ b` has components `a_r b_s − a_s b_r`.
//!
//! Exterior derivatives are always taken on natural components. The adapted
//! coframe is anholonomic (`d(δy^i) ≠ 0` once N depends on the point), so
//! adapted components are converted to natural ones before differentiating.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{eval_jet, eval_value, Expression, Params};
use crate::frame::{Connection, FrameEval};
use crate::point::BundlePoint;

/// Central-difference step for derivatives of jet-evaluated fields.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// `(dx^i, dy^i)`
    Natural,
    /// `(dx^i, δy^i)`
    Adapted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneFormValue {
    comps: DVector<f64>,
    basis: Basis,
    frame: Arc<FrameEval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormValue {
    comps: DMatrix<f64>,
    basis: Basis,
    frame: Arc<FrameEval>,
}

impl OneFormValue {
    pub fn new(comps: DVector<f64>, basis: Basis, frame: Arc<FrameEval>) -> Self {
        assert_eq!(comps.len(), 2 * frame.dim(), "one-form length must be 2n");
        Self { comps, basis, frame }
    }

    pub fn comps(&self) -> &DVector<f64> {
        &self.comps
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn frame(&self) -> &Arc<FrameEval> {
        &self.frame
    }

    pub fn in_basis(&self, basis: Basis) -> Self {
        let comps = match (self.basis, basis) {
            (Basis::Natural, Basis::Adapted) => self.frame.covector_to_adapted(&self.comps),
            (Basis::Adapted, Basis::Natural) => self.frame.covector_to_natural(&self.comps),
            _ => self.comps.clone(),
        };
        Self { comps, basis, frame: self.frame.clone() }
    }

    pub fn to_natural(&self) -> Self {
        self.in_basis(Basis::Natural)
    }

    pub fn to_adapted(&self) -> Self {
        self.in_basis(Basis::Adapted)
    }

    /// Pairing with a vector whose components are in the matching frame.
    pub fn apply(&self, vec: &DVector<f64>) -> f64 {
        self.comps.dot(vec)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.amax()
    }

    /// `self − other`, expressed in `self`'s basis.
    pub fn difference(&self, other: &OneFormValue) -> OneFormValue {
        let other = other.in_basis(self.basis);
        Self { comps: &self.comps - other.comps, basis: self.basis, frame: self.frame.clone() }
    }
}

impl TwoFormValue {
    /// Builds `Σ c[r][s] θ^r ∧ θ^s`, i.e. the matrix `C − Cᵀ`.
    pub fn from_coefficients(c: &DMatrix<f64>, basis: Basis, frame: Arc<FrameEval>) -> Self {
        Self::from_upper(c.nrows(), |r, s| c[(r, s)] - c[(s, r)], basis, frame)
    }

    /// Takes the strict upper triangle of `w` and mirrors it with a sign flip.
    pub fn antisymmetric(w: &DMatrix<f64>, basis: Basis, frame: Arc<FrameEval>) -> Self {
        Self::from_upper(w.nrows(), |r, s| w[(r, s)], basis, frame)
    }

    fn from_upper(m: usize, f: impl Fn(usize, usize) -> f64, basis: Basis, frame: Arc<FrameEval>) -> Self {
        assert_eq!(m, 2 * frame.dim(), "two-form size must be 2n");
        let mut comps = DMatrix::zeros(m, m);
        for r in 0..m {
            for s in r + 1..m {
                let v = f(r, s);
                comps[(r, s)] = v;
                comps[(s, r)] = -v;
            }
        }
        Self { comps, basis, frame }
    }

    pub fn comps(&self) -> &DMatrix<f64> {
        &self.comps
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn frame(&self) -> &Arc<FrameEval> {
        &self.frame
    }

    pub fn in_basis(&self, basis: Basis) -> Self {
        let w = match (self.basis, basis) {
            (Basis::Natural, Basis::Adapted) => {
                let e = self.frame.basis_matrix();
                e.transpose() * &self.comps * e
            }
            (Basis::Adapted, Basis::Natural) => {
                let f = self.frame.cobasis_matrix();
                f.transpose() * &self.comps * f
            }
            _ => return self.clone(),
        };
        Self::antisymmetric(&w, basis, self.frame.clone())
    }

    pub fn to_natural(&self) -> Self {
        self.in_basis(Basis::Natural)
    }

    pub fn to_adapted(&self) -> Self {
        self.in_basis(Basis::Adapted)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.amax()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { comps: &self.comps * k, basis: self.basis, frame: self.frame.clone() }
    }

    /// `self − other`, expressed in `self`'s basis.
    pub fn difference(&self, other: &TwoFormValue) -> TwoFormValue {
        let other = other.in_basis(self.basis);
        Self { comps: &self.comps - other.comps, basis: self.basis, frame: self.frame.clone() }
    }
}

pub fn wedge(a: &OneFormValue, b: &OneFormValue) -> Result<TwoFormValue> {
    if a.basis != b.basis {
        return Err(Error::BasisMismatch(a.basis, b.basis));
    }
    if a.comps.len() != b.comps.len() {
        return Err(Error::DimensionMismatch { expected: a.comps.len(), got: b.comps.len() });
    }
    let (u, v) = (&a.comps, &b.comps);
    Ok(TwoFormValue::from_upper(u.len(), |r, s| u[r] * v[s] - u[s] * v[r], a.basis, a.frame.clone()))
}

/// `i_X w`, with `vec` given in `w`'s basis.
pub fn interior(vec: &DVector<f64>, w: &TwoFormValue) -> Result<OneFormValue> {
    if vec.len() != w.comps.nrows() {
        return Err(Error::DimensionMismatch { expected: w.comps.nrows(), got: vec.len() });
    }
    Ok(OneFormValue::new(w.comps.tr_mul(vec), w.basis, w.frame.clone()))
}

/// `(i_P w)(X) = w(PX)`
pub fn i_p_oneform(w: &OneFormValue) -> OneFormValue {
    let n = w.frame.dim();
    let mut a = w.to_adapted();
    for k in n..2 * n {
        a.comps[k] = -a.comps[k];
    }
    a.in_basis(w.basis)
}

/// `(i_P w)(X₁, X₂) = w(PX₁, X₂) + w(X₁, PX₂)`
pub fn i_p_twoform(w: &TwoFormValue) -> TwoFormValue {
    let n = w.frame.dim();
    let a = w.to_adapted();
    let sign = |k: usize| if k < n { 1.0 } else { -1.0 };
    let out = TwoFormValue::from_upper(2 * n, |r, s| (sign(r) + sign(s)) * a.comps[(r, s)], Basis::Adapted, a.frame.clone());
    out.in_basis(w.basis)
}

/// A scalar field with a natural gradient.
pub trait ScalarField: Sync {
    fn value(&self, p: &BundlePoint) -> Result<f64>;
    fn gradient(&self, p: &BundlePoint) -> Result<DVector<f64>>;
}

/// An expression with bound parameters, viewed as a scalar field.
#[derive(Debug, Clone, Copy)]
pub struct ExprField<'a> {
    pub expr: &'a Expression,
    pub params: &'a Params,
}

impl<'a> ExprField<'a> {
    pub fn new(expr: &'a Expression, params: &'a Params) -> Self {
        Self { expr, params }
    }
}

impl ScalarField for ExprField<'_> {
    fn value(&self, p: &BundlePoint) -> Result<f64> {
        Ok(eval_value(self.expr, p, self.params)?)
    }

    fn gradient(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        Ok(eval_jet(self.expr, p, self.params)?.grad)
    }
}

/// A one-form field in natural components.
pub trait OneFormField: Sync {
    fn components(&self, p: &BundlePoint) -> Result<DVector<f64>>;

    /// `J[(s, r)] = ∂_r w_s`. Defaults to central differences with
    /// [`FD_STEP`].
    fn jacobian(&self, p: &BundlePoint) -> Result<DMatrix<f64>> {
        central_jacobian(|q| self.components(q), p)
    }
}

/// Central-difference Jacobian of a vector-valued map of the point.
pub fn central_jacobian(
    f: impl Fn(&BundlePoint) -> Result<DVector<f64>>,
    p: &BundlePoint,
) -> Result<DMatrix<f64>> {
    let m = 2 * p.dim();
    let mut jac = DMatrix::zeros(m, m);
    for r in 0..m {
        let plus = f(&p.shifted(r, FD_STEP))?;
        let minus = f(&p.shifted(r, -FD_STEP))?;
        if plus.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: plus.len() });
        }
        jac.set_column(r, &((plus - minus) / (2.0 * FD_STEP)));
    }
    Ok(jac)
}

/// `df` as a one-form field.
pub struct Differential<F>(pub F);

impl<F: ScalarField> OneFormField for Differential<F> {
    fn components(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        self.0.gradient(p)
    }
}

/// `d_P f` for an expression `f`, as a one-form field in natural components.
pub struct VerticalDifferential<'a> {
    pub expr: &'a Expression,
    pub connection: &'a Connection,
    pub params: &'a Params,
}

impl OneFormField for VerticalDifferential<'_> {
    fn components(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        let frame = self.connection.eval(p, self.params)?;
        let jet = eval_jet(self.expr, p, self.params)?;
        let adapted = d_p_components(&frame, &jet.grad);
        Ok(frame.covector_to_natural(&adapted))
    }
}

/// A one-form field given by a closure.
pub struct FnOneForm<F>(pub F);

impl<F> OneFormField for FnOneForm<F>
where
    F: Fn(&BundlePoint) -> Result<DVector<f64>> + Sync,
{
    fn components(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        (self.0)(p)
    }
}

/// `df` at the frame's point, natural basis.
pub fn d_scalar(f: &dyn ScalarField, frame: &Arc<FrameEval>) -> Result<OneFormValue> {
    let g = f.gradient(&frame.point)?;
    if g.len() != 2 * frame.dim() {
        return Err(Error::DimensionMismatch { expected: 2 * frame.dim(), got: g.len() });
    }
    Ok(OneFormValue::new(g, Basis::Natural, frame.clone()))
}

/// `dw` at the frame's point, natural basis: `W[r][s] = ∂_r w_s − ∂_s w_r`.
pub fn d_oneform(w: &dyn OneFormField, frame: &Arc<FrameEval>) -> Result<TwoFormValue> {
    let jac = w.jacobian(&frame.point)?;
    if jac.nrows() != 2 * frame.dim() {
        return Err(Error::DimensionMismatch { expected: 2 * frame.dim(), got: jac.nrows() });
    }
    Ok(TwoFormValue::from_upper(jac.nrows(), |r, s| jac[(s, r)] - jac[(r, s)], Basis::Natural, frame.clone()))
}

/// `max |∂_a W_bc + ∂_b W_ca + ∂_c W_ab|` at `p`, the largest component of
/// `dω` for a two-form field given by its natural components. Central
/// differences with [`FD_STEP`].
pub fn d_twoform_max_abs(
    w: impl Fn(&BundlePoint) -> Result<DMatrix<f64>>,
    p: &BundlePoint,
) -> Result<f64> {
    let m = 2 * p.dim();
    let mut partials = Vec::with_capacity(m);
    for r in 0..m {
        let plus = w(&p.shifted(r, FD_STEP))?;
        let minus = w(&p.shifted(r, -FD_STEP))?;
        if plus.nrows() != m {
            return Err(Error::DimensionMismatch { expected: m, got: plus.nrows() });
        }
        partials.push((plus - minus) / (2.0 * FD_STEP));
    }
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let v = partials[a][(b, c)] + partials[b][(c, a)] + partials[c][(a, b)];
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

fn d_p_components(frame: &FrameEval, grad: &DVector<f64>) -> DVector<f64> {
    let n = frame.dim();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = grad[i] - (0..n).map(|k| frame.nval[(i, k)] * grad[n + k]).sum::<f64>();
        out[n + i] = -grad[n + i];
    }
    out
}

/// `d_P f = i_P df`, adapted basis: `(δf/δx^i, −∂f/∂y^i)`.
pub fn d_p_scalar(f: &dyn ScalarField, frame: &Arc<FrameEval>) -> Result<OneFormValue> {
    let g = f.gradient(&frame.point)?;
    Ok(OneFormValue::new(d_p_components(frame, &g), Basis::Adapted, frame.clone()))
}
