//! Command-line front end: `check`, `derive`, `integrate`, `verify`, `sweep`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or usage
//! error, 3 numerical failure.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::integrate::{integrate, Probe, Termination, Trajectory, VectorField};
use crate::lagrangian::{LagrangianMode, LagrangianSystem};
use crate::point::BundlePoint;
use crate::verify::{run_suite_with, SuiteOptions, DEFAULT_SEED};
use config::{ConfigError, Dynamics, SystemDefinition};

pub const SEED_ENV: &str = "ADAPTED_MECH_SEED";

#[derive(Debug, Parser)]
#[command(name = "adapted-mech", version, about = "Lagrangian and Hamiltonian dynamics with a nonlinear connection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a system file, then print it in normalized form.
    Check { file: PathBuf },
    /// Evaluate the dynamics and diagnostics at one point.
    Derive {
        file: PathBuf,
        /// Comma-separated `x1..xn,y1..yn`.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Integrate from the file's initial condition and write a CSV.
    Integrate {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a gnuplot script with the data inlined.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the randomized invariant suite.
    Verify {
        /// Defaults to $ADAPTED_MECH_SEED, then 42.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "1,2,3")]
        dims: String,
        /// JSON report path; the report goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        plant_fault: bool,
    },
    /// Integrate over a cartesian grid of parameters and initial conditions.
    Sweep {
        file: PathBuf,
        /// `name=a,b,c;name=start:stop:count`
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Verification(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Check { file } => cmd_check(&file),
        Command::Derive { file, at } => cmd_derive(&file, &at),
        Command::Integrate { file, out, plot } => cmd_integrate(&file, &out, plot.as_deref()),
        Command::Verify { seed, dims, out, plant_fault } => cmd_verify(seed, &dims, out.as_deref(), plant_fault),
        Command::Sweep { file, grid, out } => cmd_sweep(&file, &grid, &out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn cmd_check(file: &Path) -> Result<(), Failure> {
    let def = config::load(file)?;
    print!("{}", def.to_normalized_toml());
    Ok(())
}

fn parse_point(text: &str, n: usize) -> Result<BundlePoint, Failure> {
    let vals: Vec<f64> = text
        .split([',', ';'])
        .map(|s| s.trim().parse::<f64>().map_err(|_| Failure::Config(format!("--at: `{}` is not a number", s.trim()))))
        .collect::<Result<_, _>>()?;
    if vals.len() != 2 * n {
        return Err(Failure::Config(format!("--at needs {} values (x1..x{n}, y1..y{n}), got {}", 2 * n, vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Failure::Config("--at values must be finite".into()));
    }
    Ok(BundlePoint::from_state(&vals))
}

fn numerical(e: Error) -> Failure {
    Failure::Numerical(e.to_string())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_derive(file: &Path, at: &str) -> Result<(), Failure> {
    let def = config::load(file)?;
    let p = parse_point(at, def.n)?;
    println!("system: {} ({}, {}, n={})", def.name, def.kind(), def.mode(), def.n);
    println!("point: {p}");
    match &def.dynamics {
        Dynamics::Hamiltonian(h) => {
            println!("rhs: {}", fmt_vec(h.rhs(&p).map_err(numerical)?.as_slice()));
            println!("energy: {}", h.energy(&p).map_err(numerical)?);
            println!("drift_rate: {}", h.energy_drift_rate(&p).map_err(numerical)?);
            println!("residual: {}", h.form_residual(&p).map_err(numerical)?);
        }
        Dynamics::Lagrangian { system, mode } => {
            let rhs = system.rhs(*mode, &p).map_err(numerical)?;
            let semispray = system.semispray_solve(&p).map_err(numerical)?;
            println!("rhs: {}", fmt_vec(rhs.as_slice()));
            println!("energy: {}", system.lagrangian_energy(&p).map_err(numerical)?);
            println!("drift_rate: {}", lagrangian_drift(system, *mode, &p).map_err(numerical)?);
            println!("condition: {}", semispray.condition);
            if *mode == LagrangianMode::EulerLagrange {
                println!("euler_lagrange_condition: {}", system.rhs_euler_lagrange(&p).map_err(numerical)?.1);
            }
            println!("residual: {}", system.el_form_residual(&p).map_err(numerical)?);
        }
    }
    Ok(())
}

/// `dE_L/dt` along the selected flow, by a central difference.
fn lagrangian_drift(sys: &LagrangianSystem, mode: LagrangianMode, p: &BundlePoint) -> crate::Result<f64> {
    let f = sys.rhs(mode, p)?;
    let h = 1e-6 / f.amax().max(1.0);
    let s = p.to_state();
    let at = |k: f64| {
        let q: Vec<f64> = s.iter().zip(f.iter()).map(|(a, b)| a + k * h * b).collect();
        sys.lagrangian_energy(&BundlePoint::from_state(&q))
    };
    Ok((at(1.0)? - at(-1.0)?) / (2.0 * h))
}

fn field_and_probes(def: &SystemDefinition) -> (Box<dyn VectorField>, Vec<Probe>) {
    match &def.dynamics {
        Dynamics::Hamiltonian(h) => {
            let (a, b, c) = (h.clone(), h.clone(), h.clone());
            let probes = vec![
                Probe::new("energy", move |p: &BundlePoint| a.energy(p)),
                Probe::new("drift_rate", move |p: &BundlePoint| b.energy_drift_rate(p)),
                Probe::new("residual", move |p: &BundlePoint| c.form_residual(p)),
            ];
            (Box::new(h.flow()), probes)
        }
        Dynamics::Lagrangian { system, mode } => {
            let (a, b, c, mode) = (system.clone(), system.clone(), system.clone(), *mode);
            let probes = vec![
                Probe::new("energy", move |p: &BundlePoint| a.lagrangian_energy(p)),
                Probe::new("drift_rate", move |p: &BundlePoint| lagrangian_drift(&b, mode, p)),
                Probe::new("residual", move |p: &BundlePoint| c.el_form_residual(p)),
            ];
            (Box::new(system.flow(mode)), probes)
        }
    }
}

/// Integrates a definition. A start point where the dynamics cannot be
/// evaluated gives an empty trajectory with an aborted status.
fn simulate(def: &SystemDefinition) -> Result<Trajectory, Failure> {
    let settings = def.integrate.as_ref().ok_or_else(|| Failure::Config(format!("{}: missing [integrate] table", def.name)))?;
    let (field, probes) = field_and_probes(def);
    if let Err(e) = field.eval(&settings.start.to_state()) {
        return Ok(Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            diagnostics: probes.iter().map(|p| (p.name.clone(), Vec::new())).collect(),
            status: Termination::Aborted { reason: e.to_string(), t: settings.config.t0 },
        });
    }
    integrate(field.as_ref(), &settings.start, &settings.config, &probes).map_err(|e| Failure::Config(e.to_string()))
}

fn cmd_integrate(file: &Path, out: &Path, plot: Option<&Path>) -> Result<(), Failure> {
    let def = config::load(file)?;
    let traj = simulate(&def)?;
    output::write_csv_file(out, def.n, &traj).map_err(io_failure(out))?;
    if let Some(plot) = plot {
        std::fs::write(plot, output::plot_script(&def.name, def.n, &traj)).map_err(io_failure(plot))?;
    }
    eprintln!("wrote {} rows to {}", traj.len(), out.display());
    match traj.status {
        Termination::Completed => Ok(()),
        Termination::Aborted { reason, t } => Err(Failure::Numerical(format!("trajectory aborted at t={t}: {reason}"))),
    }
}

fn parse_dims(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::Config(format!("--dims: `{}` is not a positive integer", s.trim()))),
        })
        .collect()
}

fn cmd_verify(seed: Option<u64>, dims: &str, out: Option<&Path>, plant_fault: bool) -> Result<(), Failure> {
    let seed = match seed {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Failure::Config(format!("{SEED_ENV}: `{v}` is not a seed")))?,
            Err(_) => DEFAULT_SEED,
        },
    };
    let dims = parse_dims(dims)?;
    let report = run_suite_with(seed, &dims, true, SuiteOptions { plant_fault });
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => {
            std::fs::write(path, json + "\n").map_err(io_failure(path))?;
            for r in &report {
                let verdict = match r.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "info",
                };
                println!("{verdict} {} n={} max_error={:.3e}", r.name, r.n, r.max_error);
            }
        }
        None => println!("{json}"),
    }
    let failed: Vec<String> = report.iter().filter(|r| r.failed()).map(|r| format!("{} (n={})", r.name, r.n)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

/// Parses `name=a,b,c;name=start:stop:count` into named value lists.
pub fn parse_grid(text: &str) -> Result<Vec<(String, Vec<f64>)>, String> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, values) = part.split_once('=').ok_or_else(|| format!("grid entry `{part}` needs name=values"))?;
        let name = name.trim();
        if name.is_empty() || out.iter().any(|(n, _)| n == name) {
            return Err(format!("grid variable `{name}` is empty or repeated"));
        }
        let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("`{}` is not a number", s.trim()));
        let values: Vec<f64> = if values.contains(':') {
            let bits: Vec<&str> = values.split(':').collect();
            let [start, stop, count] = bits[..] else {
                return Err(format!("range `{values}` must be start:stop:count"));
            };
            let (start, stop) = (num(start)?, num(stop)?);
            let count: usize = count.trim().parse().ok().filter(|c| *c >= 1).ok_or_else(|| format!("`{count}` is not a positive count"))?;
            if count == 1 {
                vec![start]
            } else {
                (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect()
            }
        } else {
            values.split(',').map(num).collect::<Result<_, _>>()?
        };
        if values.is_empty() {
            return Err(format!("grid variable `{name}` has no values"));
        }
        out.push((name.to_string(), values));
    }
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(out)
}

/// Cartesian product; the first variable varies slowest.
fn grid_points(grid: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    grid.iter().fold(vec![Vec::new()], |acc, (name, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((name.clone(), *v));
                    p
                })
            })
            .collect()
    })
}

#[derive(Serialize)]
struct IndexEntry {
    index: usize,
    file: String,
    overrides: BTreeMap<String, f64>,
    rows: usize,
    #[serde(flatten)]
    status: Termination,
}

#[derive(Serialize)]
struct SweepIndex<'a> {
    system: &'a str,
    runs: Vec<IndexEntry>,
}

fn cmd_sweep(file: &Path, grid: &str, out: &Path) -> Result<(), Failure> {
    let def = config::load(file)?;
    let grid = parse_grid(grid).map_err(|e| Failure::Config(format!("--grid: {e}")))?;
    let points = grid_points(&grid);
    let defs: Vec<SystemDefinition> = points
        .iter()
        .map(|pt| pt.iter().try_fold(def.clone(), |d, (name, v)| d.with_override(name, *v)))
        .collect::<Result<_, _>>()?;
    if def.integrate.is_none() {
        return Err(Failure::Config(format!("{}: missing [integrate] table", file.display())));
    }
    std::fs::create_dir_all(out).map_err(io_failure(out))?;
    let width = (points.len().saturating_sub(1)).to_string().len().max(3);

    let results: Vec<Result<Trajectory, Failure>> = defs.par_iter().map(simulate).collect();
    let mut runs = Vec::with_capacity(points.len());
    for (index, (pt, result)) in points.iter().zip(results).enumerate() {
        let traj = result?;
        let name = format!("run_{index:0width$}.csv");
        let path = out.join(&name);
        output::write_csv_file(&path, def.n, &traj).map_err(io_failure(&path))?;
        runs.push(IndexEntry { index, file: name, overrides: pt.iter().cloned().collect(), rows: traj.len(), status: traj.status });
    }
    let completed = runs.iter().filter(|r| r.status == Termination::Completed).count();
    let index = SweepIndex { system: &def.name, runs };
    let index_path = out.join("index.json");
    std::fs::write(&index_path, serde_json::to_string_pretty(&index).expect("index serializes") + "\n").map_err(io_failure(&index_path))?;
    eprintln!("{completed} of {} runs completed; index at {}", index.runs.len(), index_path.display());
    if completed == 0 {
        Err(Failure::Numerical("no run completed".into()))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("x0=0.5,1,1.5;c=0:1:3").unwrap();
        assert_eq!(g[0], ("x0".to_string(), vec![0.5, 1.0, 1.5]));
        assert_eq!(g[1], ("c".to_string(), vec![0.0, 0.5, 1.0]));
        assert_eq!(grid_points(&g).len(), 9);
        assert_eq!(grid_points(&g)[1], vec![("x0".to_string(), 0.5), ("c".to_string(), 0.5)]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("c=1;c=2").is_err());
        assert!(parse_grid("c=0:1").is_err());
        assert!(parse_grid("c=a").is_err());
        assert_eq!(parse_grid("c=2:5:1").unwrap()[0].1, vec![2.0]);
    }

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("1,-2", 1).unwrap(), BundlePoint::new(vec![1.0], vec![-2.0]));
        assert_eq!(parse_point("1,2;3,4", 2).unwrap(), BundlePoint::new(vec![1.0, 2.0], vec![3.0, 4.0]));
        assert_eq!(parse_point("1", 1).unwrap_err().code(), 2);
        assert_eq!(parse_point("1,x", 1).unwrap_err().code(), 2);
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_dims("0").is_err());
        assert!(parse_dims("a").is_err());
    }
}
