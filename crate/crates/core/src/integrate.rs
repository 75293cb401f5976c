//! Explicit Runge-Kutta integration of autonomous vector fields.
//!
//! Two schemes: classical RK4 with a fixed step, and the Dormand-Prince 5(4)
//! pair with a PI step-size controller. A failing right-hand side or a
//! non-finite state ends the run early; the partial trajectory is returned
//! with an [`Termination::Aborted`] status instead of an error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::BundlePoint;

/// An autonomous right-hand side `ṡ = f(s)` on the flat state `(x, y)`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, state: &[f64]) -> Result<Vec<f64>>;
}

/// A vector field given by a closure.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        (self.f)(state)
    }
}

type ProbeFn = dyn Fn(&BundlePoint) -> Result<f64> + Send + Sync;

/// A named scalar evaluated at every retained sample. Errors record NaN.
pub struct Probe {
    pub name: String,
    f: Box<ProbeFn>,
}

impl Probe {
    pub fn new(name: impl Into<String>, f: impl Fn(&BundlePoint) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Box::new(f) }
    }

    pub fn eval(&self, p: &BundlePoint) -> f64 {
        (self.f)(p).unwrap_or(f64::NAN)
    }
}

impl std::fmt::Debug for Probe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Probe").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Rk4 { step: f64 },
    Rk45 { rtol: f64, atol: f64, initial_step: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t0: f64,
    pub t1: f64,
    /// Keep every `sample_stride`-th step; the endpoints are always kept.
    pub sample_stride: usize,
}

/// Smallest step the adaptive scheme may take before giving up.
pub const MIN_STEP: f64 = 1e-14;
/// Upper bound on accepted plus rejected adaptive steps.
pub const MAX_STEPS: usize = 10_000_000;

impl IntegratorConfig {
    pub fn rk4(t0: f64, t1: f64, step: f64) -> Self {
        Self { method: Method::Rk4 { step }, t0, t1, sample_stride: 1 }
    }

    pub fn rk45(t0: f64, t1: f64, rtol: f64, atol: f64) -> Self {
        Self { method: Method::Rk45 { rtol, atol, initial_step: None }, t0, t1, sample_stride: 1 }
    }

    pub fn with_stride(self, sample_stride: usize) -> Self {
        Self { sample_stride, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !self.t0.is_finite() || !self.t1.is_finite() {
            return bad("t0 and t1 must be finite");
        }
        if self.t1 < self.t0 {
            return bad("t1 must not precede t0");
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1");
        }
        match self.method {
            Method::Rk4 { step } if !(step > 0.0 && step.is_finite()) => bad("step must be positive"),
            Method::Rk45 { rtol, atol, initial_step } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    bad("rtol and atol must be positive")
                } else if initial_step.is_some_and(|h| !(h > 0.0)) {
                    bad("initial step must be positive")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Termination {
    Completed,
    Aborted { reason: String, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BundlePoint>,
    /// Probe name and one value per retained sample.
    pub diagnostics: Vec<(String, Vec<f64>)>,
    pub status: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn completed(&self) -> bool {
        self.status == Termination::Completed
    }

    pub fn last(&self) -> Option<&BundlePoint> {
        self.states.last()
    }

    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

struct Recorder<'a> {
    probes: &'a [Probe],
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(probes: &'a [Probe]) -> Self {
        let diagnostics = probes.iter().map(|p| (p.name.clone(), Vec::new())).collect();
        Self {
            probes,
            traj: Trajectory { times: Vec::new(), states: Vec::new(), diagnostics, status: Termination::Completed },
        }
    }

    fn push(&mut self, t: f64, state: &[f64]) {
        let p = BundlePoint::from_state(state);
        for (probe, (_, values)) in self.probes.iter().zip(self.traj.diagnostics.iter_mut()) {
            values.push(probe.eval(&p));
        }
        self.traj.times.push(t);
        self.traj.states.push(p);
    }

    fn abort(mut self, reason: impl Into<String>, t: f64) -> Trajectory {
        let reason = reason.into();
        log::warn!("integration aborted at t={t}: {reason}");
        self.traj.status = Termination::Aborted { reason, t };
        self.traj
    }

    fn finish(self) -> Trajectory {
        self.traj
    }
}

fn axpy(s: &[f64], h: f64, ks: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = s.to_vec();
    for (k, c) in ks {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

fn eval_checked(f: &dyn VectorField, s: &[f64]) -> std::result::Result<Vec<f64>, String> {
    let v = f.eval(s).map_err(|e| e.to_string())?;
    if v.len() != s.len() {
        return Err(format!("rhs returned {} components, expected {}", v.len(), s.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("non-finite rhs".into());
    }
    Ok(v)
}

/// Integrates `field` from `start` over `[cfg.t0, cfg.t1]`.
///
/// Errors only for an invalid configuration or a start point of the wrong
/// dimension; numerical failures end the trajectory with an aborted status.
pub fn integrate(field: &dyn VectorField, start: &BundlePoint, cfg: &IntegratorConfig, probes: &[Probe]) -> Result<Trajectory> {
    cfg.validate()?;
    let s0 = start.to_state();
    if s0.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: s0.len() });
    }
    let mut rec = Recorder::new(probes);
    if !start.is_finite() {
        return Ok(rec.abort("non-finite initial state", cfg.t0));
    }
    rec.push(cfg.t0, &s0);
    if cfg.t1 == cfg.t0 {
        return Ok(rec.finish());
    }
    Ok(match cfg.method {
        Method::Rk4 { step } => rk4(field, s0, cfg, step, rec),
        Method::Rk45 { rtol, atol, initial_step } => rk45(field, s0, cfg, rtol, atol, initial_step, rec),
    })
}

pub(crate) fn rk4_step(f: &dyn VectorField, s: &[f64], h: f64) -> std::result::Result<Vec<f64>, String> {
    let k1 = eval_checked(f, s)?;
    let k2 = eval_checked(f, &axpy(s, h, &[(&k1, 0.5)]))?;
    let k3 = eval_checked(f, &axpy(s, h, &[(&k2, 0.5)]))?;
    let k4 = eval_checked(f, &axpy(s, h, &[(&k3, 1.0)]))?;
    Ok(axpy(s, h, &[(&k1, 1.0 / 6.0), (&k2, 1.0 / 3.0), (&k3, 1.0 / 3.0), (&k4, 1.0 / 6.0)]))
}

fn rk4(f: &dyn VectorField, mut s: Vec<f64>, cfg: &IntegratorConfig, step: f64, mut rec: Recorder) -> Trajectory {
    let span = cfg.t1 - cfg.t0;
    // uniform steps no longer than `step`; the slack absorbs spans that are
    // an exact multiple up to rounding
    let steps = ((span / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    for i in 1..=steps {
        let t_prev = cfg.t0 + (i - 1) as f64 * h;
        match rk4_step(f, &s, h) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => s = next,
            Ok(_) => return rec.abort("non-finite state", t_prev + h),
            Err(e) => return rec.abort(e, t_prev),
        }
        if i % cfg.sample_stride == 0 || i == steps {
            let t = if i == steps { cfg.t1 } else { cfg.t0 + i as f64 * h };
            rec.push(t, &s);
        }
    }
    rec.finish()
}

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus the embedded fourth-order ones
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn error_norm(err: &[f64], s: &[f64], next: &[f64], rtol: f64, atol: f64) -> f64 {
    let m = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(s.iter().zip(next))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / m).sqrt()
}

fn initial_step(f: &dyn VectorField, s: &[f64], k1: &[f64], rtol: f64, atol: f64, span: f64) -> std::result::Result<f64, String> {
    let norm = |v: &[f64]| error_norm(v, s, s, rtol, atol);
    let d0 = norm(s);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let s1 = axpy(s, h0, &[(k1, 1.0)]);
    let k2 = eval_checked(f, &s1)?;
    let diff: Vec<f64> = k2.iter().zip(k1).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}

fn rk45(
    f: &dyn VectorField,
    mut s: Vec<f64>,
    cfg: &IntegratorConfig,
    rtol: f64,
    atol: f64,
    h_init: Option<f64>,
    mut rec: Recorder,
) -> Trajectory {
    const BETA: f64 = 0.04;
    const ALPHA: f64 = 0.2 - 0.75 * BETA;
    const SAFETY: f64 = 0.9;

    let mut t = cfg.t0;
    let mut k1 = match eval_checked(f, &s) {
        Ok(k) => k,
        Err(e) => return rec.abort(e, t),
    };
    let mut h = match h_init {
        Some(h) => h.min(cfg.t1 - cfg.t0),
        None => match initial_step(f, &s, &k1, rtol, atol, cfg.t1 - cfg.t0) {
            Ok(h) => h,
            Err(e) => return rec.abort(e, t),
        },
    };
    let mut err_prev: f64 = 1e-4;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut rejected_last = false;

    while t < cfg.t1 {
        attempts += 1;
        if attempts > MAX_STEPS {
            return rec.abort("step budget exhausted", t);
        }
        if h < MIN_STEP {
            return rec.abort(format!("step size underflow ({h:.3e})"), t);
        }
        let last = t + h >= cfg.t1;
        if last {
            h = cfg.t1 - t;
        }

        let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        let mut failure = None;
        for stage in 1..7 {
            let terms: Vec<(&[f64], f64)> = ks.iter().zip(A[stage].iter()).map(|(k, a)| (k.as_slice(), *a)).collect();
            match eval_checked(f, &axpy(&s, h, &terms)) {
                Ok(k) => ks.push(k),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failure {
            // a stage left the domain; retry smaller before giving up
            if h * 0.25 >= MIN_STEP {
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            return rec.abort(e, t);
        }
        // stage 7 is evaluated at the fifth-order solution (FSAL)
        let next: Vec<f64> = {
            let terms: Vec<(&[f64], f64)> = ks[..6].iter().zip(A[6].iter()).map(|(k, a)| (k.as_slice(), *a)).collect();
            axpy(&s, h, &terms)
        };
        let err_vec: Vec<f64> = (0..s.len()).map(|i| h * (0..7).map(|j| E[j] * ks[j][i]).sum::<f64>()).collect();
        let err = error_norm(&err_vec, &s, &next, rtol, atol);
        if !err.is_finite() || next.iter().any(|v| !v.is_finite()) {
            if h * 0.25 >= MIN_STEP {
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            return rec.abort("non-finite state", t);
        }

        if err <= 1.0 {
            t = if last { cfg.t1 } else { t + h };
            s = next;
            k1 = ks.swap_remove(6);
            accepted += 1;
            if accepted.is_multiple_of(cfg.sample_stride) || t >= cfg.t1 {
                rec.push(t, &s);
            }
            let mut fac = if err == 0.0 { 10.0 } else { SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA) };
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            err_prev = err.max(1e-4);
            rejected_last = false;
        } else {
            let fac = (SAFETY * err.powf(-ALPHA)).max(0.2);
            h *= fac;
            rejected_last = true;
        }
    }
    rec.finish()
}

/// One sweep entry: a field, its start point and probes.
pub struct SweepItem {
    pub field: Box<dyn VectorField>,
    pub start: BundlePoint,
    pub probes: Vec<Probe>,
}

/// Runs every item independently, possibly in parallel. Output order follows
/// input order.
pub fn sweep(items: &[SweepItem], cfg: &IntegratorConfig) -> Vec<Result<Trajectory>> {
    items.par_iter().map(|item| integrate(item.field.as_ref(), &item.start, cfg, &item.probes)).collect()
}
