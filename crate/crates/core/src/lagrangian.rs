//! Lagrangian dynamics on the horizontal/vertical splitting of TM.
//!
//! A semispray `X = X^i δ/δx^i + Ẋ^i ∂/∂y^i` is obtained at each point by
//! matching the `dx^j` and `δy^j` coefficients of the dynamical equation,
//! which is a 2n×2n linear system in `(X, Ẋ)` built from the adapted second
//! derivatives of L. A second route reads the horizontal Euler-Lagrange
//! equations
//!
//! ```text
//! d/dt(δL/δx^i) − ∂L/∂y^i = 0        d/dt(∂L/∂y^i) + δL/δx^i = 0
//! ```
//!
//! as a linear system for the natural velocity `(ẋ, ẏ)` via the chain rule.
//! On simple systems the two routes give different vector fields; both are
//! available as [`LagrangianMode`]s.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{eval_jet, Expression, Jet2, Params};
use crate::forms::{interior, Basis, OneFormValue, TwoFormValue};
use crate::frame::{AdaptedDerivatives, Connection, FrameEval};
use crate::integrate::VectorField;
use crate::linalg::solve_checked;
use crate::point::BundlePoint;

/// Gravitational potential term `g · Σ m_i · h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gravity {
    pub g: f64,
    pub height: Expression,
}

/// Builds `L = T − P` with `T = ½ Σ m_i (y^i)²`.
///
/// `potential` and the gravity height may only reference base coordinates.
pub fn mechanical_lagrangian(
    masses: &[f64],
    potential: &Expression,
    gravity: Option<&Gravity>,
) -> Result<Expression> {
    if masses.is_empty() || masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::Invalid("masses must be positive".into()));
    }
    let position_only = |e: &Expression| e.coords().iter().all(|c| matches!(c, crate::expr::Coord::X(_)));
    if !position_only(potential) || gravity.is_some_and(|g| !position_only(&g.height)) {
        return Err(Error::Invalid("potential may only depend on x coordinates".into()));
    }
    let two = || Expression::Const(2.0);
    let kinetic = masses
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let c = 0.5 * m;
            let sq = Expression::y(i + 1).pow(two());
            if c == 1.0 {
                sq
            } else {
                Expression::constant(c) * sq
            }
        })
        .reduce(|a, b| a + b)
        .expect("at least one mass");
    let mut lagrangian = kinetic;
    if !potential.is_zero() {
        lagrangian = lagrangian - potential.clone();
    }
    if let Some(g) = gravity {
        let total: f64 = masses.iter().sum();
        let weight = g.g * total;
        let term = if weight == 1.0 { g.height.clone() } else { Expression::constant(weight) * g.height.clone() };
        lagrangian = lagrangian - term;
    }
    Ok(lagrangian)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LagrangianMode {
    /// Semispray from the `dx`/`δy` coefficient-matching system.
    CoefficientMatching,
    /// Horizontal Euler-Lagrange equations solved for `(ẋ, ẏ)`.
    EulerLagrange,
}

/// Semispray coefficients at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SemisprayValue {
    /// `X^i`, on `δ/δx^i`.
    pub horizontal: DVector<f64>,
    /// `Ẋ^i`, on `∂/∂y^i`.
    pub vertical: DVector<f64>,
    pub condition: f64,
}

impl SemisprayValue {
    /// `(X, Ẋ)` as adapted vector components.
    pub fn adapted(&self) -> DVector<f64> {
        let n = self.horizontal.len();
        DVector::from_fn(2 * n, |k, _| if k < n { self.horizontal[k] } else { self.vertical[k - n] })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSystem {
    pub n: usize,
    pub lagrangian: Expression,
    pub connection: Connection,
    pub params: Params,
    pub masses: Option<Vec<f64>>,
    pub gravity: Option<Gravity>,
}

struct Local {
    frame: Arc<FrameEval>,
    jet: Jet2,
    ad: AdaptedDerivatives,
}

impl LagrangianSystem {
    pub fn new(lagrangian: Expression, connection: Connection, params: Params) -> Result<Self> {
        let n = connection.dim();
        if lagrangian.max_index() > n {
            return Err(Error::Invalid(format!("lagrangian references a coordinate beyond dimension {n}")));
        }
        let unbound: Vec<String> = lagrangian
            .params()
            .into_iter()
            .chain(connection.params())
            .filter(|p| !params.contains_key(p))
            .collect();
        if !unbound.is_empty() {
            return Err(Error::Invalid(format!("unbound parameters: {}", unbound.join(", "))));
        }
        Ok(Self { n, lagrangian, connection, params, masses: None, gravity: None })
    }

    /// `L = ½ Σ m_i (y^i)² − V(x) − g Σ m_i h(x)`.
    pub fn mechanical(
        masses: Vec<f64>,
        potential: &Expression,
        gravity: Option<Gravity>,
        connection: Connection,
        params: Params,
    ) -> Result<Self> {
        if masses.len() != connection.dim() {
            return Err(Error::DimensionMismatch { expected: connection.dim(), got: masses.len() });
        }
        let lagrangian = mechanical_lagrangian(&masses, potential, gravity.as_ref())?;
        let mut sys = Self::new(lagrangian, connection, params)?;
        sys.masses = Some(masses);
        sys.gravity = gravity;
        Ok(sys)
    }

    pub fn with_params(&self, params: Params) -> Self {
        Self { params, ..self.clone() }
    }

    fn local(&self, p: &BundlePoint) -> Result<Local> {
        if p.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.dim() });
        }
        let frame = Arc::new(self.connection.eval(p, &self.params)?);
        let jet = eval_jet(&self.lagrangian, p, &self.params)?;
        let ad = frame.adapted_derivatives(&jet);
        Ok(Local { frame, jet, ad })
    }

    pub fn value(&self, p: &BundlePoint) -> Result<f64> {
        Ok(crate::expr::eval_value(&self.lagrangian, p, &self.params)?)
    }

    pub fn adapted_derivatives(&self, p: &BundlePoint) -> Result<AdaptedDerivatives> {
        Ok(self.local(p)?.ad)
    }

    /// The coefficient-matching system `A (X, Ẋ) = b`:
    /// rows `j`:   `Σ_i X^i dd[j][i] + Ẋ^i vd[j][i] = δL/δx^j`,
    /// rows `n+j`: `Σ_i X^i dv[j][i] + Ẋ^i vv[j][i] = −∂L/∂y^j`.
    pub fn semispray_system(&self, p: &BundlePoint) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let ad = self.local(p)?.ad;
        Ok(semispray_system(&ad))
    }

    pub fn semispray_solve(&self, p: &BundlePoint) -> Result<SemisprayValue> {
        let (a, b) = self.semispray_system(p)?;
        let (sol, condition) = solve_checked(&a, &b);
        let sol = sol.ok_or_else(|| Error::DegenerateLagrangian { point: p.clone(), condition })?;
        let n = self.n;
        Ok(SemisprayValue {
            horizontal: sol.rows(0, n).into_owned(),
            vertical: sol.rows(n, n).into_owned(),
            condition,
        })
    }

    /// `V = P(X) = X^i δ/δx^i − Ẋ^i ∂/∂y^i`, adapted components.
    pub fn liouville_field(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        let s = self.semispray_solve(p)?;
        let n = self.n;
        Ok(DVector::from_fn(2 * n, |k, _| if k < n { s.horizontal[k] } else { -s.vertical[k - n] }))
    }

    /// `E_L = V(L) − L = X^i δL/δx^i − Ẋ^i ∂L/∂y^i − L`.
    pub fn lagrangian_energy(&self, p: &BundlePoint) -> Result<f64> {
        let loc = self.local(p)?;
        let s = self.semispray_solve(p)?;
        Ok(s.horizontal.dot(&loc.ad.dx_adapted) - s.vertical.dot(&loc.ad.dy) - loc.jet.value)
    }

    /// `dE_L` assembled term by term with X held fixed, adapted basis:
    /// on `dx^j`: `X^i dd[j][i] − Ẋ^i dv[j][i] − δL/δx^j`,
    /// on `δy^j`: `X^i vd[j][i] − Ẋ^i vv[j][i] − ∂L/∂y^j`.
    pub fn denergy(&self, p: &BundlePoint) -> Result<OneFormValue> {
        let loc = self.local(p)?;
        let s = self.semispray_solve(p)?;
        let ad = &loc.ad;
        let (x, xd) = (&s.horizontal, &s.vertical);
        let on_dx = &ad.dd * x - &ad.dv * xd - &ad.dx_adapted;
        let on_dy = &ad.vd * x - &ad.vv * xd - &ad.dy;
        let n = self.n;
        let comps = DVector::from_fn(2 * n, |k, _| if k < n { on_dx[k] } else { on_dy[k - n] });
        Ok(OneFormValue::new(comps, Basis::Adapted, loc.frame))
    }

    /// The fundamental form as the term-by-term expansion
    /// `dd dx^j∧dx^i − dv dx^j∧δy^i − vd δy^j∧dx^i + vv δy^j∧δy^i`,
    /// adapted basis. Vanishes identically when N ≡ 0.
    ///
    /// This expansion is not `−d d_P L` in general; see
    /// [`fundamental_form_closed`](Self::fundamental_form_closed).
    pub fn fundamental_form(&self, p: &BundlePoint) -> Result<TwoFormValue> {
        let loc = self.local(p)?;
        let ad = &loc.ad;
        let n = self.n;
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        c.view_mut((0, 0), (n, n)).copy_from(&ad.dd);
        c.view_mut((0, n), (n, n)).copy_from(&(-&ad.dv));
        c.view_mut((n, 0), (n, n)).copy_from(&(-&ad.vd));
        c.view_mut((n, n), (n, n)).copy_from(&ad.vv);
        Ok(TwoFormValue::from_coefficients(&c, Basis::Adapted, loc.frame))
    }

    /// `Φ_L = −d(d_P L)` in the adapted coframe, including the
    /// `d(δy^i) = dN[k][i] ∧ dx^k` contribution. Closed by construction.
    pub fn fundamental_form_closed(&self, p: &BundlePoint) -> Result<TwoFormValue> {
        let loc = self.local(p)?;
        let (ad, fr) = (&loc.ad, &loc.frame);
        let n = self.n;
        // d_P L = a_i dx^i + b_i δy^i
        let b = -&ad.dy;
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for i in 0..n {
                c[(j, i)] += ad.dd[(j, i)];
                c[(n + j, i)] += ad.vd[(j, i)];
                c[(j, n + i)] -= ad.dv[(j, i)];
                c[(n + j, n + i)] -= ad.vv[(j, i)];
            }
        }
        // b_i d(δy^i) = b_i (δ_l N[k][i] dx^l + ∂_{y^l} N[k][i] δy^l) ∧ dx^k
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    c[(l, k)] += b[i] * fr.horizontal_nx(k, i, l);
                    c[(n + l, k)] += b[i] * fr.ny(k, i, l);
                }
            }
        }
        Ok(TwoFormValue::from_coefficients(&c, Basis::Adapted, loc.frame.clone()).scaled(-1.0))
    }

    /// `‖i_X Φ_L − dE_L‖∞` for the coefficient-matching semispray. Reported,
    /// never asserted.
    pub fn el_form_residual(&self, p: &BundlePoint) -> Result<f64> {
        Ok(self.el_form_residual_form(p)?.max_abs())
    }

    /// `i_X Φ_L − dE_L`, adapted basis.
    pub fn el_form_residual_form(&self, p: &BundlePoint) -> Result<OneFormValue> {
        let s = self.semispray_solve(p)?;
        let phi = self.fundamental_form(p)?;
        let ix = interior(&s.adapted(), &phi)?;
        let residual = ix.difference(&self.denergy(p)?);
        log::debug!("el_form_residual at {p}: {:.3e}", residual.max_abs());
        Ok(residual)
    }

    /// `(ẋ, ẏ) = (X, Ẋ)`.
    pub fn rhs_coefficient_matching(&self, p: &BundlePoint) -> Result<DVector<f64>> {
        Ok(self.semispray_solve(p)?.adapted())
    }

    /// Chain-rule matrix of the Euler-Lagrange route and its right side.
    pub fn euler_lagrange_system(&self, p: &BundlePoint) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let loc = self.local(p)?;
        let (fr, jet, ad) = (&loc.frame, &loc.jet, &loc.ad);
        let n = self.n;
        let g = &jet.grad;
        let h = &jet.hess;
        let nv = &fr.nval;
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for m in 0..n {
                // ∂_{x^m} δ_j L and ∂_{y^m} δ_j L
                a[(j, m)] = h[(j, m)]
                    - (0..n).map(|k| fr.nx(j, k, m) * g[n + k] + nv[(j, k)] * h[(n + k, m)]).sum::<f64>();
                a[(j, n + m)] = h[(j, n + m)]
                    - (0..n).map(|k| fr.ny(j, k, m) * g[n + k] + nv[(j, k)] * h[(n + k, n + m)]).sum::<f64>();
                a[(n + j, m)] = h[(n + j, m)];
                a[(n + j, n + m)] = h[(n + j, n + m)];
            }
        }
        let rhs = DVector::from_fn(2 * n, |k, _| if k < n { ad.dy[k] } else { -ad.dx_adapted[k - n] });
        Ok((a, rhs))
    }

    /// Solves the Euler-Lagrange system for `(ẋ, ẏ)`; also returns the
    /// condition number.
    pub fn rhs_euler_lagrange(&self, p: &BundlePoint) -> Result<(DVector<f64>, f64)> {
        let (a, b) = self.euler_lagrange_system(p)?;
        let (sol, condition) = solve_checked(&a, &b);
        let sol = sol.ok_or_else(|| Error::DegenerateEulerLagrange { point: p.clone(), condition })?;
        Ok((sol, condition))
    }

    pub fn rhs(&self, mode: LagrangianMode, p: &BundlePoint) -> Result<DVector<f64>> {
        match mode {
            LagrangianMode::CoefficientMatching => self.rhs_coefficient_matching(p),
            LagrangianMode::EulerLagrange => Ok(self.rhs_euler_lagrange(p)?.0),
        }
    }

    /// `‖rhs_cm − rhs_el‖∞`, reported only.
    pub fn mode_discrepancy(&self, p: &BundlePoint) -> Result<f64> {
        let cm = self.rhs_coefficient_matching(p)?;
        let (el, _) = self.rhs_euler_lagrange(p)?;
        Ok((cm - el).amax())
    }

    pub fn flow(&self, mode: LagrangianMode) -> LagrangianFlow {
        LagrangianFlow { system: self.clone(), mode }
    }
}

fn semispray_system(ad: &AdaptedDerivatives) -> (DMatrix<f64>, DVector<f64>) {
    let n = ad.dy.len();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&ad.dd);
    a.view_mut((0, n), (n, n)).copy_from(&ad.vd);
    a.view_mut((n, 0), (n, n)).copy_from(&ad.dv);
    a.view_mut((n, n), (n, n)).copy_from(&ad.vv);
    let b = DVector::from_fn(2 * n, |k, _| if k < n { ad.dx_adapted[k] } else { -ad.dy[k - n] });
    (a, b)
}

/// A Lagrangian system together with its dynamics mode.
#[derive(Debug, Clone)]
pub struct LagrangianFlow {
    pub system: LagrangianSystem,
    pub mode: LagrangianMode,
}

impl VectorField for LagrangianFlow {
    fn dim(&self) -> usize {
        2 * self.system.n
    }

    fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        let p = BundlePoint::from_state(state);
        Ok(self.system.rhs(self.mode, &p)?.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_abs_diff_eq;

    const NONE: &[&str] = &[];

    fn oscillator(k: f64) -> LagrangianSystem {
        let l = parse("0.5*y1^2 - 0.5*k*x1^2", 1, &["k"]).unwrap();
        LagrangianSystem::new(l, Connection::zero(1), Params::from([("k".into(), k)])).unwrap()
    }

    fn free_particle() -> LagrangianSystem {
        LagrangianSystem::new(parse("0.5*y1^2", 1, NONE).unwrap(), Connection::zero(1), Params::new()).unwrap()
    }

    fn pt(x: f64, y: f64) -> BundlePoint {
        BundlePoint::new(vec![x], vec![y])
    }

    #[test]
    fn mechanical_constructor() {
        let v = parse("0.5*x1^2", 1, NONE).unwrap();
        let l = mechanical_lagrangian(&[1.0], &v, None).unwrap();
        assert_eq!(l.to_string(), "0.5*y1^2 - 0.5*x1^2");

        let l = mechanical_lagrangian(&[2.0, 3.0], &Expression::Const(0.0), None).unwrap();
        assert_eq!(l.to_string(), "y1^2 + 1.5*y2^2");

        let g = Gravity { g: 9.8, height: Expression::x(1) };
        let l = mechanical_lagrangian(&[1.0], &Expression::Const(0.0), Some(&g)).unwrap();
        assert_eq!(l.to_string(), "0.5*y1^2 - 9.8*x1");

        let bad = parse("y1^2", 1, NONE).unwrap();
        assert!(mechanical_lagrangian(&[1.0], &bad, None).is_err());
        assert!(mechanical_lagrangian(&[0.0], &Expression::Const(0.0), None).is_err());
    }

    #[test]
    fn mechanical_system_keeps_masses() {
        let sys = LagrangianSystem::mechanical(
            vec![2.0],
            &parse("x1^2", 1, NONE).unwrap(),
            None,
            Connection::zero(1),
            Params::new(),
        )
        .unwrap();
        assert_eq!(sys.masses.as_deref(), Some(&[2.0][..]));
        assert_eq!(sys.value(&pt(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn unbound_parameters_are_rejected() {
        let l = parse("0.5*k*y1^2", 1, &["k"]).unwrap();
        assert!(LagrangianSystem::new(l, Connection::zero(1), Params::new()).is_err());
    }

    #[test]
    fn fundamental_form_vanishes_without_connection() {
        let l = parse("x1*y1 + sin(x1)*y1^2", 1, NONE).unwrap();
        let sys = LagrangianSystem::new(l, Connection::zero(1), Params::new()).unwrap();
        assert_eq!(sys.fundamental_form(&pt(0.3, 0.8)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fundamental_form_velocity_connection() {
        let conn = Connection::parse(&[vec!["y1"]], NONE).unwrap();
        let sys = LagrangianSystem::new(parse("0.5*y1^2", 1, NONE).unwrap(), conn, Params::new()).unwrap();
        let phi = sys.fundamental_form(&pt(0.5, 2.0)).unwrap();
        assert_eq!(phi.basis(), Basis::Adapted);
        assert_eq!(phi.comps()[(0, 1)], -2.0);
        assert_eq!(phi.comps()[(1, 0)], 2.0);

        // −d d_P L for the same data: d_P L = −2y² dx − y δy, so
        // d(d_P L) = 4y dx∧dy = 8 dx∧δy at y = 2
        let closed = sys.fundamental_form_closed(&pt(0.5, 2.0)).unwrap();
        assert_abs_diff_eq!(closed.comps()[(0, 1)], -8.0, epsilon = 1e-14);
    }

    #[test]
    fn fundamental_form_velocity_block_vanishes() {
        let conn = Connection::parse(&[vec!["x1*y2", "0.3"], vec!["y1^2", "x2"]], NONE).unwrap();
        let l = parse("0.5*(y1^2 + 2*y2^2) + y1*y2*x1 - cos(x2)", 2, NONE).unwrap();
        let sys = LagrangianSystem::new(l, conn, Params::new()).unwrap();
        let phi = sys.fundamental_form(&BundlePoint::new(vec![0.3, -0.4], vec![1.0, 0.7])).unwrap();
        let w = phi.comps();
        for r in 2..4 {
            for s in 2..4 {
                assert_eq!(w[(r, s)], 0.0);
            }
        }
    }

    #[test]
    fn semispray_for_oscillator() {
        let s = oscillator(1.0).semispray_solve(&pt(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(s.horizontal[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.vertical[0], -1.0, epsilon = 1e-15);

        let s = oscillator(1.0).semispray_solve(&pt(0.0, 0.0)).unwrap();
        assert_eq!((s.horizontal[0], s.vertical[0]), (0.0, 0.0));

        let s = oscillator(2.5).semispray_solve(&pt(0.7, -0.3)).unwrap();
        assert_abs_diff_eq!(s.horizontal[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(s.vertical[0], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn free_particle_is_degenerate() {
        let err = free_particle().semispray_solve(&pt(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateLagrangian { .. }));
        assert!(err.to_string().starts_with("DegenerateLagrangian"));
        let err = free_particle().rhs_euler_lagrange(&pt(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateEulerLagrange { .. }));
        assert!(err.is_degenerate());
        // constant L: every block vanishes
        let c = LagrangianSystem::new(Expression::Const(3.0), Connection::zero(1), Params::new()).unwrap();
        assert!(c.lagrangian_energy(&pt(1.0, 1.0)).unwrap_err().is_degenerate());
    }

    #[test]
    fn liouville_field_flips_vertical_part() {
        let v = oscillator(1.0).liouville_field(&pt(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v, DVector::from_row_slice(&[1.0, 1.0]), epsilon = 1e-15);
        assert_eq!(oscillator(1.0).liouville_field(&pt(0.0, 0.0)).unwrap().amax(), 0.0);
    }

    #[test]
    fn lagrangian_energy_values() {
        assert_abs_diff_eq!(oscillator(1.0).lagrangian_energy(&pt(1.0, 1.0)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(oscillator(1.0).lagrangian_energy(&pt(2.0, 1.0)).unwrap(), -1.5, epsilon = 1e-15);
    }

    #[test]
    fn denergy_values() {
        let de = oscillator(1.0).denergy(&pt(1.0, 1.0)).unwrap();
        assert_eq!(de.basis(), Basis::Adapted);
        assert_abs_diff_eq!(de.comps()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(de.comps()[1], 0.0, epsilon = 1e-15);
        assert_eq!(oscillator(1.0).denergy(&pt(0.0, 0.0)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rhs_modes_for_oscillator() {
        let sys = oscillator(1.0);
        let cm = sys.rhs_coefficient_matching(&pt(0.4, -1.2)).unwrap();
        assert_abs_diff_eq!(cm, DVector::from_row_slice(&[0.4, 1.2]), epsilon = 1e-15);
        let (el, cond) = sys.rhs_euler_lagrange(&pt(0.4, -1.2)).unwrap();
        assert_abs_diff_eq!(el, DVector::from_row_slice(&[1.2, 0.4]), epsilon = 1e-15);
        assert_eq!(cond, 1.0);
        assert_eq!(sys.rhs_coefficient_matching(&pt(0.0, 0.0)).unwrap().amax(), 0.0);

        let (el, _) = oscillator(2.0).rhs_euler_lagrange(&pt(0.5, 1.0)).unwrap();
        assert_abs_diff_eq!(el, DVector::from_row_slice(&[-0.5, 1.0]), epsilon = 1e-15);
        assert!(sys.mode_discrepancy(&pt(0.4, -1.2)).unwrap() > 0.0);
    }

    #[test]
    fn el_form_residual_at_rest_point() {
        assert_eq!(oscillator(1.0).el_form_residual(&pt(0.0, 0.0)).unwrap(), 0.0);
        let r = oscillator(1.0).el_form_residual(&pt(1.0, 1.0)).unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn el_form_residual_matches_dense_oracle() {
        // dense route: natural matrices throughout, converted at the end
        let conn = Connection::parse(&[vec!["0.2*x1 + 0.1*y1"]], NONE).unwrap();
        let l = parse("0.5*y1^2 - 0.5*x1^2 + 0.3*x1*y1^2", 1, NONE).unwrap();
        let sys = LagrangianSystem::new(l, conn, Params::new()).unwrap();
        let p = pt(0.4, 0.9);
        let adapted = sys.el_form_residual_form(&p).unwrap();

        let s = sys.semispray_solve(&p).unwrap();
        let phi = sys.fundamental_form(&p).unwrap().to_natural();
        let frame = phi.frame().clone();
        let x_nat = frame.vector_to_natural(&s.adapted());
        let ix = phi.comps().tr_mul(&x_nat);
        let de = sys.denergy(&p).unwrap().to_natural();
        let natural = ix - de.comps();
        let back = frame.covector_to_adapted(&natural);
        assert_abs_diff_eq!(&back, adapted.comps(), epsilon = 1e-12);
    }

    #[test]
    fn flow_evaluates_modes() {
        let f = oscillator(1.0).flow(LagrangianMode::EulerLagrange);
        assert_eq!(f.dim(), 2);
        assert_eq!(f.eval(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }
}
