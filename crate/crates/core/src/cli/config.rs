//! System definition files.
//!
//! ```toml
//! [system]
//! name = "oscillator"
//! dim = 1
//! kind = "hamiltonian"          # or "lagrangian"
//! scalar = "0.5*(x1^2 + y1^2)"
//!
//! [connection]
//! N = [["c"]]                   # row-major, N[i][j]; defaults to zero
//!
//! [params]
//! c = 0.5
//!
//! [dynamics]
//! mode = "paper"                # frame-consistent | coefficient-matching | euler-lagrange
//!
//! [integrate]
//! t0 = 0
//! t1 = "2*pi"
//! method = "rk4"                # or "rk45" with rtol/atol
//! step = 1e-3
//! x0 = [1.0]
//! y0 = [0.0]
//! sample_stride = 1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::expr::{eval_value, is_valid_param_name, parse, Expression, Params};
use crate::frame::Connection;
use crate::hamiltonian::{HamiltonianMode, HamiltonianSystem};
use crate::integrate::{IntegratorConfig, Method};
use crate::lagrangian::{LagrangianMode, LagrangianSystem};
use crate::point::BundlePoint;

/// A configuration problem, already annotated with its source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    system: SystemSection,
    connection: Option<ConnectionSection>,
    #[serde(default)]
    params: BTreeMap<String, Spanned<f64>>,
    dynamics: Option<DynamicsSection>,
    integrate: Option<IntegrateSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    name: String,
    dim: Spanned<i64>,
    kind: Spanned<String>,
    scalar: Spanned<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConnectionSection {
    #[serde(rename = "N")]
    n: Spanned<Vec<Spanned<Vec<Spanned<Scalar>>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsSection {
    mode: Spanned<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegrateSection {
    t0: Option<Spanned<Scalar>>,
    t1: Option<Spanned<Scalar>>,
    method: Option<Spanned<String>>,
    step: Option<Spanned<f64>>,
    rtol: Option<Spanned<f64>>,
    atol: Option<Spanned<f64>>,
    initial_step: Option<Spanned<f64>>,
    x0: Option<Spanned<Vec<f64>>>,
    y0: Option<Spanned<Vec<f64>>>,
    sample_stride: Option<Spanned<i64>>,
}

/// A number or an expression text.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Number(v) => Expression::constant(*v).to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Lagrangian { system: LagrangianSystem, mode: LagrangianMode },
    Hamiltonian(HamiltonianSystem),
}

/// Integration defaults from the `[integrate]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateSettings {
    pub config: IntegratorConfig,
    pub start: BundlePoint,
}

/// A validated system definition.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    pub name: String,
    pub n: usize,
    pub dynamics: Dynamics,
    pub integrate: Option<IntegrateSettings>,
}

struct Source<'a> {
    label: String,
    text: &'a str,
}

impl Source<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
        (line, col)
    }

    fn err(&self, span: Range<usize>, msg: impl fmt::Display) -> ConfigError {
        let (line, col) = self.position(span.start);
        ConfigError(format!("{}:{line}:{col}: {msg}", self.label))
    }

    /// An expression error inside a string literal: point at the offending
    /// character rather than the opening quote.
    fn expr_err(&self, span: Range<usize>, column: usize, msg: impl fmt::Display) -> ConfigError {
        let quoted = self.text.get(span.clone()).is_some_and(|s| s.starts_with('"') || s.starts_with('\''));
        let offset = span.start + usize::from(quoted) + column.saturating_sub(1);
        self.err(offset..offset, msg)
    }
}

pub fn load(path: &Path) -> Result<SystemDefinition, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_str(&text, &path.display().to_string())
}

pub fn parse_str(text: &str, label: &str) -> Result<SystemDefinition, ConfigError> {
    let src = Source { label: label.to_string(), text };
    let file: SystemFile = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => src.err(span, msg),
            None => ConfigError(format!("{label}: {msg}")),
        }
    })?;
    build(&src, file)
}

fn build(src: &Source, file: SystemFile) -> Result<SystemDefinition, ConfigError> {
    let sys = &file.system;
    let dim = *sys.dim.get_ref();
    if dim < 1 {
        return Err(src.err(sys.dim.span(), "dim must be at least 1"));
    }
    let n = dim as usize;

    let mut params = Params::new();
    for (name, value) in &file.params {
        if !is_valid_param_name(name) {
            return Err(src.err(value.span(), format!("invalid parameter name `{name}`")));
        }
        if !value.get_ref().is_finite() {
            return Err(src.err(value.span(), format!("parameter `{name}` must be finite")));
        }
        params.insert(name.clone(), *value.get_ref());
    }
    let names: Vec<&str> = params.keys().map(String::as_str).collect();

    let scalar = parse(sys.scalar.get_ref(), n, &names).map_err(|e| src.expr_err(sys.scalar.span(), e.column, format!("scalar: {e}")))?;

    let connection = match &file.connection {
        None => Connection::zero(n),
        Some(c) => {
            let rows = c.n.get_ref();
            if rows.len() != n || rows.iter().any(|r| r.get_ref().len() != n) {
                return Err(src.err(c.n.span(), format!("connection must be {n}x{n}")));
            }
            let mut entries = Vec::with_capacity(n * n);
            for (i, row) in rows.iter().enumerate() {
                for (j, cell) in row.get_ref().iter().enumerate() {
                    let e = parse(&cell.get_ref().text(), n, &names).map_err(|e| {
                        src.expr_err(cell.span(), e.column, format!("N[{}][{}]: {e}", i + 1, j + 1))
                    })?;
                    entries.push(e);
                }
            }
            Connection::new(n, entries).map_err(|e| src.err(c.n.span(), e))?
        }
    };

    let kind = sys.kind.get_ref().as_str();
    let mode = file.dynamics.as_ref().map(|d| (d.mode.get_ref().as_str(), d.mode.span()));
    let dynamics = match kind {
        "lagrangian" => {
            let mode = match mode {
                None | Some(("coefficient-matching", _)) => LagrangianMode::CoefficientMatching,
                Some(("euler-lagrange", _)) => LagrangianMode::EulerLagrange,
                Some((other, span)) => {
                    return Err(src.err(
                        span,
                        format!("unknown mode `{other}` for a lagrangian system (expected coefficient-matching or euler-lagrange)"),
                    ))
                }
            };
            let system = LagrangianSystem::new(scalar, connection, params.clone()).map_err(|e| src.err(sys.scalar.span(), e))?;
            Dynamics::Lagrangian { system, mode }
        }
        "hamiltonian" => {
            let mode = match mode {
                None | Some(("paper", _)) => HamiltonianMode::Paper,
                Some(("frame-consistent", _)) => HamiltonianMode::FrameConsistent,
                Some((other, span)) => {
                    return Err(src.err(
                        span,
                        format!("unknown mode `{other}` for a hamiltonian system (expected paper or frame-consistent)"),
                    ))
                }
            };
            let system = HamiltonianSystem::new(scalar, connection, params.clone(), mode).map_err(|e| src.err(sys.scalar.span(), e))?;
            Dynamics::Hamiltonian(system)
        }
        other => return Err(src.err(sys.kind.span(), format!("unknown kind `{other}` (expected lagrangian or hamiltonian)"))),
    };

    let integrate = file.integrate.as_ref().map(|s| build_integrate(src, s, n, &params)).transpose()?;
    Ok(SystemDefinition { name: sys.name.clone(), n, dynamics, integrate })
}

fn time_value(src: &Source, v: &Spanned<Scalar>, params: &Params) -> Result<f64, ConfigError> {
    let names: Vec<&str> = params.keys().map(String::as_str).collect();
    let value = match v.get_ref() {
        Scalar::Number(x) => *x,
        Scalar::Text(t) => {
            let e = parse(t, 1, &names).map_err(|e| src.expr_err(v.span(), e.column, e))?;
            if !e.coords().is_empty() {
                return Err(src.err(v.span(), "time may not reference coordinates"));
            }
            eval_value(&e, &BundlePoint::origin(1), params).map_err(|e| src.err(v.span(), e))?
        }
    };
    if !value.is_finite() {
        return Err(src.err(v.span(), "time must be finite"));
    }
    Ok(value)
}

fn build_integrate(src: &Source, s: &IntegrateSection, n: usize, params: &Params) -> Result<IntegrateSettings, ConfigError> {
    let t0 = s.t0.as_ref().map(|v| time_value(src, v, params)).transpose()?.unwrap_or(0.0);
    let t1 = match &s.t1 {
        Some(v) => time_value(src, v, params)?,
        None => return Err(ConfigError(format!("{}: [integrate] needs t1", src.label))),
    };
    if t1 < t0 {
        let span = s.t1.as_ref().map(Spanned::span).unwrap_or(0..0);
        return Err(src.err(span, "t1 must not precede t0"));
    }
    let positive = |v: &Option<Spanned<f64>>, what: &str, default: f64| -> Result<f64, ConfigError> {
        match v {
            None => Ok(default),
            Some(x) if *x.get_ref() > 0.0 && x.get_ref().is_finite() => Ok(*x.get_ref()),
            Some(x) => Err(src.err(x.span(), format!("{what} must be positive"))),
        }
    };
    let method = match s.method.as_ref().map(|m| (m.get_ref().as_str(), m.span())) {
        None | Some(("rk4", _)) => Method::Rk4 { step: positive(&s.step, "step", 1e-3)? },
        Some(("rk45", _)) => Method::Rk45 {
            rtol: positive(&s.rtol, "rtol", 1e-8)?,
            atol: positive(&s.atol, "atol", 1e-8)?,
            initial_step: s.initial_step.as_ref().map(|_| positive(&s.initial_step, "initial_step", 0.0)).transpose()?,
        },
        Some((other, span)) => return Err(src.err(span, format!("unknown method `{other}` (expected rk4 or rk45)"))),
    };
    let sample_stride = match &s.sample_stride {
        None => 1,
        Some(v) if *v.get_ref() >= 1 => *v.get_ref() as usize,
        Some(v) => return Err(src.err(v.span(), "sample_stride must be at least 1")),
    };
    let coords = |v: &Option<Spanned<Vec<f64>>>, what: &str| -> Result<Vec<f64>, ConfigError> {
        match v {
            None => Ok(vec![0.0; n]),
            Some(x) if x.get_ref().len() != n => Err(src.err(x.span(), format!("{what} must have length {n}"))),
            Some(x) if x.get_ref().iter().any(|c| !c.is_finite()) => Err(src.err(x.span(), format!("{what} must be finite"))),
            Some(x) => Ok(x.get_ref().clone()),
        }
    };
    let start = BundlePoint::new(coords(&s.x0, "x0")?, coords(&s.y0, "y0")?);
    Ok(IntegrateSettings { config: IntegratorConfig { method, t0, t1, sample_stride }, start })
}

impl SystemDefinition {
    pub fn kind(&self) -> &'static str {
        match self.dynamics {
            Dynamics::Lagrangian { .. } => "lagrangian",
            Dynamics::Hamiltonian(_) => "hamiltonian",
        }
    }

    pub fn mode(&self) -> &'static str {
        match &self.dynamics {
            Dynamics::Lagrangian { mode: LagrangianMode::CoefficientMatching, .. } => "coefficient-matching",
            Dynamics::Lagrangian { mode: LagrangianMode::EulerLagrange, .. } => "euler-lagrange",
            Dynamics::Hamiltonian(h) => match h.mode {
                HamiltonianMode::Paper => "paper",
                HamiltonianMode::FrameConsistent => "frame-consistent",
            },
        }
    }

    pub fn scalar(&self) -> &Expression {
        match &self.dynamics {
            Dynamics::Lagrangian { system, .. } => &system.lagrangian,
            Dynamics::Hamiltonian(h) => &h.hamiltonian,
        }
    }

    pub fn connection(&self) -> &Connection {
        match &self.dynamics {
            Dynamics::Lagrangian { system, .. } => &system.connection,
            Dynamics::Hamiltonian(h) => &h.connection,
        }
    }

    pub fn params(&self) -> &Params {
        match &self.dynamics {
            Dynamics::Lagrangian { system, .. } => &system.params,
            Dynamics::Hamiltonian(h) => &h.params,
        }
    }

    /// Sets a parameter or an initial-condition component.
    ///
    /// `x0`/`y0` address the single component of a one-dimensional system;
    /// `x0_i`/`y0_i` address component `i` (1-based) in any dimension. Any
    /// other name must be a declared parameter.
    pub fn with_override(&self, name: &str, value: f64) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        let initial = |prefix: &str| -> Option<Option<usize>> {
            let rest = name.strip_prefix(prefix)?;
            if rest.is_empty() {
                return Some((self.n == 1).then_some(0));
            }
            let i: usize = rest.strip_prefix('_')?.parse().ok()?;
            Some((1..=self.n).contains(&i).then(|| i - 1))
        };
        for (prefix, is_x) in [("x0", true), ("y0", false)] {
            if let Some(slot) = initial(prefix) {
                let slot = slot.ok_or_else(|| ConfigError(format!("`{name}` does not name a component of a {}-dimensional start", self.n)))?;
                let settings = out.integrate.as_mut().ok_or_else(|| ConfigError(format!("`{name}` needs an [integrate] table")))?;
                let target = if is_x { &mut settings.start.x } else { &mut settings.start.y };
                target[slot] = value;
                return Ok(out);
            }
        }
        if !self.params().contains_key(name) {
            return Err(ConfigError(format!("unknown grid variable `{name}` (not a declared parameter or x0/y0 component)")));
        }
        let mut params = self.params().clone();
        params.insert(name.to_string(), value);
        out.dynamics = match &self.dynamics {
            Dynamics::Lagrangian { system, mode } => Dynamics::Lagrangian { system: system.with_params(params), mode: *mode },
            Dynamics::Hamiltonian(h) => Dynamics::Hamiltonian(h.with_params(params)),
        };
        Ok(out)
    }

    /// The definition as a canonical TOML document that loads back to an
    /// equal definition.
    pub fn to_normalized_toml(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            system: Sys<'a>,
            connection: Conn,
            params: &'a Params,
            dynamics: Dyn,
            #[serde(skip_serializing_if = "Option::is_none")]
            integrate: Option<Integ>,
        }
        #[derive(Serialize)]
        struct Sys<'a> {
            name: &'a str,
            dim: usize,
            kind: &'a str,
            scalar: String,
        }
        #[derive(Serialize)]
        struct Conn {
            #[serde(rename = "N")]
            n: Vec<Vec<String>>,
        }
        #[derive(Serialize)]
        struct Dyn {
            mode: &'static str,
        }
        #[derive(Serialize)]
        struct Integ {
            t0: f64,
            t1: f64,
            method: &'static str,
            #[serde(skip_serializing_if = "Option::is_none")]
            step: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            rtol: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            atol: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            initial_step: Option<f64>,
            x0: Vec<f64>,
            y0: Vec<f64>,
            sample_stride: usize,
        }
        let conn = self.connection();
        let integrate = self.integrate.as_ref().map(|s| {
            let (method, step, rtol, atol, initial_step) = match s.config.method {
                Method::Rk4 { step } => ("rk4", Some(step), None, None, None),
                Method::Rk45 { rtol, atol, initial_step } => ("rk45", None, Some(rtol), Some(atol), initial_step),
            };
            Integ {
                t0: s.config.t0,
                t1: s.config.t1,
                method,
                step,
                rtol,
                atol,
                initial_step,
                x0: s.start.x.clone(),
                y0: s.start.y.clone(),
                sample_stride: s.config.sample_stride,
            }
        });
        let out = Out {
            system: Sys { name: &self.name, dim: self.n, kind: self.kind(), scalar: self.scalar().to_string() },
            connection: Conn {
                n: (0..self.n).map(|i| (0..self.n).map(|j| conn.entry(i, j).to_string()).collect()).collect(),
            },
            params: self.params(),
            dynamics: Dyn { mode: self.mode() },
            integrate,
        };
        toml::to_string(&out).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OSC: &str = r#"
[system]
name = "oscillator"
dim = 1
kind = "hamiltonian"
scalar = "0.5*(x1^2 + y1^2)"

[connection]
N = [["c"]]

[params]
c = 0.5

[integrate]
t1 = "2*pi"
step = 1e-3
x0 = [1.0]
y0 = [0.0]
"#;

    #[test]
    fn loads_a_hamiltonian_file() {
        let def = parse_str(OSC, "osc.toml").unwrap();
        assert_eq!(def.n, 1);
        assert_eq!(def.mode(), "paper");
        let s = def.integrate.as_ref().unwrap();
        assert_eq!(s.config.t1, 2.0 * std::f64::consts::PI);
        assert_eq!(s.config.method, Method::Rk4 { step: 1e-3 });
        assert_eq!(s.start, BundlePoint::new(vec![1.0], vec![0.0]));
    }

    #[test]
    fn normalized_form_round_trips() {
        let def = parse_str(OSC, "osc.toml").unwrap();
        let text = def.to_normalized_toml();
        let again = parse_str(&text, "normalized").unwrap();
        assert_eq!(again, def);
        assert_eq!(again.to_normalized_toml(), text);
    }

    #[test]
    fn wrong_connection_shape() {
        let text = OSC.replace(r#"N = [["c"]]"#, r#"N = [["c", "0"]]"#);
        let err = parse_str(&text, "osc.toml").unwrap_err();
        assert!(err.0.contains("connection must be 1x1"), "{err}");
        assert!(err.0.starts_with("osc.toml:9:"), "{err}");
    }

    #[test]
    fn unknown_mode_and_kind() {
        let text = format!("{OSC}\n[dynamics]\nmode = \"euler-lagrange\"\n");
        let err = parse_str(&text, "f").unwrap_err();
        assert!(err.0.contains("unknown mode"), "{err}");
        let err = parse_str(&OSC.replace("\"hamiltonian\"", "\"newtonian\""), "f").unwrap_err();
        assert!(err.0.contains("unknown kind") && err.0.starts_with("f:5:"), "{err}");
    }

    #[test]
    fn expression_errors_point_into_the_string() {
        let err = parse_str(&OSC.replace("0.5*(x1^2 + y1^2)", "0.5*(x1^2 + q)"), "f").unwrap_err();
        // `scalar = "` is 10 characters, then `0.5*(x1^2 + ` puts q at column 13
        assert!(err.0.starts_with("f:6:23:"), "{err}");
        let err = parse_str(&OSC.replace("x1^2 + y1^2", "x2^2"), "f").unwrap_err();
        assert!(err.0.contains("x2"), "{err}");
    }

    #[test]
    fn unknown_fields_and_syntax() {
        let err = parse_str(&OSC.replace("step = 1e-3", "stp = 1e-3"), "f").unwrap_err();
        assert!(err.0.starts_with("f:"), "{err}");
        assert!(parse_str("[system\n", "f").is_err());
        let err = parse_str(&OSC.replace("x0 = [1.0]", "x0 = [1.0, 2.0]"), "f").unwrap_err();
        assert!(err.0.contains("x0 must have length 1"), "{err}");
    }

    #[test]
    fn overrides() {
        let def = parse_str(OSC, "f").unwrap();
        let d = def.with_override("c", 2.0).unwrap();
        assert_eq!(d.params()["c"], 2.0);
        let d = def.with_override("x0", 0.25).unwrap().with_override("y0_1", -1.0).unwrap();
        assert_eq!(d.integrate.unwrap().start, BundlePoint::new(vec![0.25], vec![-1.0]));
        assert!(def.with_override("x0_2", 1.0).is_err());
        assert!(def.with_override("k", 1.0).is_err());
    }
}
