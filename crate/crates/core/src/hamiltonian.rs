//! Hamiltonian dynamics on T*M with the adapted coframe `(dx^i, δy^i)`.
//!
//! The canonical two-form is `φ_H = −δy^i ∧ dx^i` and the Hamiltonian field
//! solves `i_{X_H} φ_H = dH`, which in adapted components reads
//!
//! ```text
//! X_H = ∂H/∂y^i δ/δx^i − δH/δx^i ∂/∂y^i
//! ```
//!
//! Hamilton's equations come in two readings, see [`HamiltonianMode`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{eval_jet, eval_value, Expression, Jet2, Params};
use crate::forms::{d_twoform_max_abs, interior, Basis, OneFormField, OneFormValue, TwoFormValue};
use crate::frame::{Connection, DualOperator, FrameEval};
use crate::integrate::VectorField;
use crate::point::BundlePoint;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianMode {
    /// `ẋ = ∂H/∂y`, `ẏ = −δH/δx`: the adapted coefficients of `X_H` taken as
    /// coordinate velocities.
    #[default]
    Paper,
    /// Natural-coordinate expansion of `X_H`:
    /// `ẏ^j = −δH/δx^j − Σ_i N[i][j] ∂H/∂y^i`.
    FrameConsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSystem {
    pub n: usize,
    pub hamiltonian: Expression,
    pub connection: Connection,
    pub params: Params,
    pub mode: HamiltonianMode,
}

impl HamiltonianSystem {
    pub fn new(hamiltonian: Expression, connection: Connection, params: Params, mode: HamiltonianMode) -> Result<Self> {
        let n = connection.dim();
        if hamiltonian.max_index() > n {
            return Err(Error::Invalid(format!("hamiltonian references a coordinate beyond dimension {n}")));
        }
        let unbound: Vec<String> = hamiltonian
            .params()
            .into_iter()
            .chain(connection.params())
            .filter(|p| !params.contains_key(p))
            .collect();
        if !unbound.is_empty() {
            return Err(Error::Invalid(format!("unbound parameters: {}", unbound.join(", "))));
        }
        Ok(Self { n, hamiltonian, connection, params, mode })
    }

    pub fn with_mode(&self, mode: HamiltonianMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn with_params(&self, params: Params) -> Self {
        Self { params, ..self.clone() }
    }

    fn frame(&self, p: &BundlePoint) -> Result<Arc<FrameEval>> {
        if p.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.dim() });
        }
        Ok(Arc::new(self.connection.eval(p, &self.params)?))
    }

    fn local(&self, p: &BundlePoint) -> Result<(Arc<FrameEval>, Jet2)> {
        let frame = self.frame(p)?;
        let jet = eval_jet(&self.hamiltonian, p, &self.params)?;
        Ok((frame, jet))
    }

    pub fn energy(&self, p: &BundlePoint) -> Result<f64> {
        Ok(eval_value(&self.hamiltonian, p, &self.params)?)
    }

    /// `(ω, λ)` in the adapted coframe: `ω = ½(y^i dx^i + x^i δy^i)`,
    /// `λ = P*(ω)`.
    pub fn liouville_forms(&self, p: &BundlePoint) -> Result<(OneFormValue, OneFormValue)> {
        let frame = self.frame(p)?;
        let n = self.n;
        let omega = DVector::from_fn(2 * n, |k, _| if k < n { 0.5 * p.y[k] } else { 0.5 * p.x[k - n] });
        let lambda = frame.dual_operator_matrix(DualOperator::Product);
        let lambda = frame.covector_to_adapted(&(lambda * frame.covector_to_natural(&omega)));
        Ok((
            OneFormValue::new(omega, Basis::Adapted, frame.clone()),
            OneFormValue::new(lambda, Basis::Adapted, frame),
        ))
    }

    /// `φ_H = −Σ δy^i ∧ dx^i`, adapted basis.
    pub fn canonical_twoform(&self, p: &BundlePoint) -> Result<TwoFormValue> {
        let frame = self.frame(p)?;
        Ok(canonical_twoform(frame))
    }

    /// `dH` in the adapted coframe: `(δH/δx^i, ∂H/∂y^i)`.
    pub fn differential(&self, p: &BundlePoint) -> Result<OneFormValue> {
        let (frame, jet) = self.local(p)?;
        let n = self.n;
        let dx = frame.horizontal_gradient(&jet);
        let comps = DVector::from_fn(2 * n, |k, _| if k < n { dx[k] } else { jet.grad[k] });
        Ok(OneFormValue::new(comps, Basis::Adapted, frame))
    }

    /// `X_H` in adapted components: `(∂H/∂y, −δH/δx)`.
    pub fn hamiltonian_vector_field(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        let (frame, jet) = self.local(p)?;
        let n = self.n;
        let dx = frame.horizontal_gradient(&jet);
        Ok(DVector::from_fn(2 * n, |k, _| if k < n { jet.grad[n + k] } else { -dx[k - n] }))
    }

    /// `‖i_{X_H} φ_H − dH‖∞` in the adapted coframe.
    pub fn form_residual(&self, p: &BundlePoint) -> Result<f64> {
        let x = self.hamiltonian_vector_field(p)?;
        let phi = self.canonical_twoform(p)?;
        let ix = interior(&x, &phi)?;
        Ok(ix.difference(&self.differential(p)?).max_abs())
    }

    /// `(ẋ, ẏ)` for the system's mode.
    pub fn rhs(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        let (frame, jet) = self.local(p)?;
        let n = self.n;
        let dx = frame.horizontal_gradient(&jet);
        let hy = jet.grad.rows(n, n);
        let mut out = DVector::zeros(2 * n);
        for j in 0..n {
            out[j] = hy[j];
            out[n + j] = -dx[j];
            if self.mode == HamiltonianMode::FrameConsistent {
                out[n + j] -= (0..n).map(|i| frame.nval[(i, j)] * hy[i]).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Analytic `dH/dt` along the flow: `H_yᵀ M H_y` with `M = N` in paper
    /// mode and `M = N − Nᵀ` (hence zero) in frame-consistent mode.
    pub fn energy_drift_rate(&self, p: &BundlePoint) -> Result<f64> {
        let (frame, jet) = self.local(p)?;
        let n = self.n;
        let hy = jet.grad.rows(n, n).into_owned();
        let m: DMatrix<f64> = match self.mode {
            HamiltonianMode::Paper => frame.nval.clone(),
            HamiltonianMode::FrameConsistent => &frame.nval - frame.nval.transpose(),
        };
        Ok(hy.dot(&(m * &hy)))
    }

    /// `‖dφ_H‖∞` at `p`, from central differences of the natural components.
    pub fn canonical_form_closedness(&self, p: &BundlePoint) -> Result<f64> {
        d_twoform_max_abs(|q| Ok(self.canonical_twoform(q)?.to_natural().comps().clone()), p)
    }

    pub fn flow(&self) -> HamiltonianFlow {
        HamiltonianFlow { system: self.clone() }
    }
}

fn canonical_twoform(frame: Arc<FrameEval>) -> TwoFormValue {
    let n = frame.dim();
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        c[(n + i, i)] = -1.0;
    }
    TwoFormValue::from_coefficients(&c, Basis::Adapted, frame)
}

/// `λ` as a field in natural components, for differentiating.
pub struct LiouvilleFormField<'a>(pub &'a HamiltonianSystem);

impl OneFormField for LiouvilleFormField<'_> {
    fn components(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        Ok(self.0.liouville_forms(p)?.1.to_natural().comps().clone())
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianFlow {
    pub system: HamiltonianSystem,
}

impl VectorField for HamiltonianFlow {
    fn dim(&self) -> usize {
        2 * self.system.n
    }

    fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        let p = BundlePoint::from_state(state);
        Ok(self.system.rhs(&p)?.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::forms::d_oneform;
    use approx::assert_abs_diff_eq;

    const NONE: &[&str] = &[];

    fn oscillator(conn: Connection, mode: HamiltonianMode) -> HamiltonianSystem {
        let n = conn.dim();
        let text = (1..=n).map(|i| format!("x{i}^2 + y{i}^2")).collect::<Vec<_>>().join(" + ");
        let h = parse(&format!("0.5*({text})"), n, NONE).unwrap();
        HamiltonianSystem::new(h, conn, Params::new(), mode).unwrap()
    }

    fn constant(c: f64) -> Connection {
        Connection::constant(&DMatrix::from_element(1, 1, c))
    }

    fn pt(x: f64, y: f64) -> BundlePoint {
        BundlePoint::new(vec![x], vec![y])
    }

    #[test]
    fn liouville_forms_at_point() {
        let sys = oscillator(Connection::zero(1), HamiltonianMode::Paper);
        let (w, l) = sys.liouville_forms(&pt(2.0, 3.0)).unwrap();
        assert_eq!(w.comps().as_slice(), &[1.5, 1.0]);
        assert_eq!(l.comps().as_slice(), &[1.5, -1.0]);
        let (w, l) = sys.liouville_forms(&pt(0.0, 0.0)).unwrap();
        assert_eq!(w.max_abs() + l.max_abs(), 0.0);
    }

    #[test]
    fn liouville_round_trip_with_connection() {
        let conn = Connection::parse(&[vec!["x1*y2", "0.3"], vec!["y1^2", "x2"]], NONE).unwrap();
        let sys = oscillator(conn, HamiltonianMode::Paper);
        let p = BundlePoint::new(vec![0.3, -1.1], vec![0.8, 0.4]);
        let (w, l) = sys.liouville_forms(&p).unwrap();
        let f = l.frame().clone();
        let back = f.covector_to_adapted(&(f.dual_operator_matrix(DualOperator::Product) * l.to_natural().comps()));
        assert_abs_diff_eq!(&back, w.comps(), epsilon = 1e-14);
    }

    #[test]
    fn canonical_form_examples() {
        let phi = oscillator(Connection::zero(1), HamiltonianMode::Paper).canonical_twoform(&pt(0.2, 0.1)).unwrap();
        assert_eq!(phi.to_natural().comps(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));

        let phi = oscillator(constant(0.7), HamiltonianMode::Paper).canonical_twoform(&pt(0.2, 0.1)).unwrap();
        assert_eq!(phi.to_natural().comps(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));

        let a = 1.3;
        let conn = Connection::constant(&DMatrix::from_row_slice(2, 2, &[0.0, a, 0.0, 0.0]));
        let sys = oscillator(conn, HamiltonianMode::Paper);
        let w = sys.canonical_twoform(&BundlePoint::origin(2)).unwrap().to_natural();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, -a, 1.0, 0.0,
            a, 0.0, 0.0, 1.0,
            -1.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 0.0, 0.0,
        ]);
        assert_abs_diff_eq!(w.comps(), &expected, epsilon = 1e-15);
    }

    #[test]
    fn canonical_form_is_minus_d_lambda_without_connection() {
        let sys = oscillator(Connection::zero(2), HamiltonianMode::Paper);
        let p = BundlePoint::new(vec![0.4, -0.2], vec![1.0, 0.3]);
        let frame = Arc::new(FrameEval::flat(&p));
        let dl = d_oneform(&LiouvilleFormField(&sys), &frame).unwrap();
        let phi = sys.canonical_twoform(&p).unwrap();
        assert_abs_diff_eq!(dl.scaled(-1.0).comps(), phi.to_natural().comps(), epsilon = 1e-9);
        assert!(sys.canonical_form_closedness(&p).unwrap() < 1e-9);
    }

    #[test]
    fn hamiltonian_field_examples() {
        let x = oscillator(Connection::zero(1), HamiltonianMode::Paper).hamiltonian_vector_field(&pt(1.0, 0.0)).unwrap();
        assert_eq!(x.as_slice(), &[0.0, -1.0]);
        let x = oscillator(constant(0.5), HamiltonianMode::Paper).hamiltonian_vector_field(&pt(1.0, 2.0)).unwrap();
        assert_eq!(x.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn form_residual_is_exact() {
        let conn = Connection::parse(&[vec!["x1*y2", "0.3*y1"], vec!["y1^2 - x1", "x2*x1"]], NONE).unwrap();
        let h = parse("0.5*(y1^2 + 2*y2^2) + y1*y2*x1 - cos(x2)", 2, NONE).unwrap();
        let sys = HamiltonianSystem::new(h, conn, Params::new(), HamiltonianMode::Paper).unwrap();
        let r = sys.form_residual(&BundlePoint::new(vec![0.3, -1.1], vec![0.8, 0.4])).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn rhs_modes() {
        let p = pt(0.3, -0.8);
        for mode in [HamiltonianMode::Paper, HamiltonianMode::FrameConsistent] {
            let r = oscillator(Connection::zero(1), mode).rhs(&p).unwrap();
            assert_eq!(r.as_slice(), &[-0.8, -0.3]);
        }
        let c = 0.6;
        let r = oscillator(constant(c), HamiltonianMode::Paper).rhs(&p).unwrap();
        assert_abs_diff_eq!(r[1], -0.3 + c * -0.8, epsilon = 1e-15);
        let r = oscillator(constant(c), HamiltonianMode::FrameConsistent).rhs(&p).unwrap();
        assert_abs_diff_eq!(r[1], -0.3, epsilon = 1e-15);
    }

    #[test]
    fn drift_rate_examples() {
        let d = oscillator(constant(0.5), HamiltonianMode::Paper).energy_drift_rate(&pt(1.0, 2.0)).unwrap();
        assert_eq!(d, 2.0);
        let d = oscillator(constant(0.5), HamiltonianMode::FrameConsistent).energy_drift_rate(&pt(1.0, 2.0)).unwrap();
        assert_eq!(d, 0.0);
        let conn = Connection::constant(&DMatrix::from_row_slice(2, 2, &[0.0, 0.7, -0.7, 0.0]));
        let sys = oscillator(conn, HamiltonianMode::Paper);
        let d = sys.energy_drift_rate(&BundlePoint::new(vec![0.1, 0.2], vec![1.3, -0.4])).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
        assert_eq!(oscillator(Connection::zero(1), HamiltonianMode::Paper).energy_drift_rate(&pt(1.0, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn drift_rate_is_gradient_along_rhs() {
        let conn = Connection::parse(&[vec!["x1*y2", "0.3*y1"], vec!["y1^2 - x1", "x2*x1"]], NONE).unwrap();
        let sys = oscillator(conn, HamiltonianMode::Paper);
        let p = BundlePoint::new(vec![0.3, -1.1], vec![0.8, 0.4]);
        let grad = eval_jet(&sys.hamiltonian, &p, &sys.params).unwrap().grad;
        assert_abs_diff_eq!(grad.dot(&sys.rhs(&p).unwrap()), sys.energy_drift_rate(&p).unwrap(), epsilon = 1e-14);
        let fc = sys.with_mode(HamiltonianMode::FrameConsistent);
        assert_abs_diff_eq!(grad.dot(&fc.rhs(&p).unwrap()), 0.0, epsilon = 1e-14);
    }
}
