//! Trajectory CSV and plot-script emission.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::integrate::{Termination, Trajectory};
use crate::point::BundlePoint;

/// Diagnostic columns after the state, in order.
pub const DIAGNOSTICS: [&str; 3] = ["energy", "drift_rate", "residual"];

pub fn header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("y{i}")));
    cols.extend(DIAGNOSTICS.iter().map(|s| s.to_string()));
    cols
}

/// Seventeen significant digits: reading the text back gives the same double.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn rows(traj: &Trajectory) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..traj.len()).map(move |k| {
        let mut row = vec![fmt_real(traj.times[k])];
        row.extend(traj.states[k].to_state().into_iter().map(fmt_real));
        for name in DIAGNOSTICS {
            let v = traj.diagnostic(name).map_or(f64::NAN, |d| d[k]);
            row.push(fmt_real(v));
        }
        row
    })
}

pub fn status_comment(status: &Termination) -> Option<String> {
    match status {
        Termination::Completed => None,
        Termination::Aborted { reason, t } => Some(format!("# status: aborted at t={}: {}", fmt_real(*t), reason.replace('\n', " "))),
    }
}

/// Writes the header, one row per sample and, for an aborted run, a trailing
/// `# status:` comment line.
pub fn write_csv(out: impl Write, n: usize, traj: &Trajectory) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n))?;
    for row in rows(traj) {
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut out = w.into_inner().map_err(|e| e.into_error())?;
    if let Some(line) = status_comment(&traj.status) {
        writeln!(out, "{line}")?;
    }
    out.flush()
}

pub fn write_csv_file(path: &Path, n: usize, traj: &Trajectory) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(io::BufWriter::new(file), n, traj)
}

/// A trajectory read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub header: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<BundlePoint>,
    /// `energy`, `drift_rate`, `residual` per row.
    pub diagnostics: Vec<[f64; 3]>,
    pub status: Option<String>,
}

pub fn read_csv(text: &str) -> Result<CsvTrajectory, String> {
    let mut status = None;
    let body: String = text
        .lines()
        .filter(|l| {
            if let Some(s) = l.strip_prefix("# status: ") {
                status = Some(s.to_string());
                false
            } else {
                true
            }
        })
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header.len() < 4 || !(header.len() - 4).is_multiple_of(2) {
        return Err(format!("unexpected header {header:?}"));
    }
    let n = (header.len() - 4) / 2;
    let mut out = CsvTrajectory { header, times: Vec::new(), states: Vec::new(), diagnostics: Vec::new(), status };
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let vals: Vec<f64> = rec.iter().map(|f| f.parse::<f64>().map_err(|e| format!("{f}: {e}"))).collect::<Result<_, _>>()?;
        out.times.push(vals[0]);
        out.states.push(BundlePoint::from_state(&vals[1..1 + 2 * n]));
        out.diagnostics.push([vals[1 + 2 * n], vals[2 + 2 * n], vals[3 + 2 * n]]);
    }
    Ok(out)
}

/// A self-contained gnuplot script: inline data, time series of every
/// coordinate and the `(x1, y1)` phase portrait.
pub fn plot_script(title: &str, n: usize, traj: &Trajectory) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script; run with: gnuplot -p <this file>");
    let _ = writeln!(s, "$traj << EOD");
    for row in rows(traj) {
        let _ = writeln!(s, "{}", row.join(" "));
    }
    let _ = writeln!(s, "EOD");
    let _ = writeln!(s, "set multiplot layout 1,2 title \"{}\"", title.replace('"', "'"));
    let _ = writeln!(s, "set xlabel \"t\"");
    let series: Vec<String> = (0..2 * n)
        .map(|k| {
            let name = if k < n { format!("x{}", k + 1) } else { format!("y{}", k - n + 1) };
            format!("$traj using 1:{} with lines title \"{name}\"", k + 2)
        })
        .collect();
    let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    let _ = writeln!(s, "set xlabel \"x1\"");
    let _ = writeln!(s, "set ylabel \"y1\"");
    let _ = writeln!(s, "plot $traj using 2:{} with lines title \"phase\"", n + 2);
    let _ = writeln!(s, "unset multiplot");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        Trajectory {
            times: vec![0.0, 0.1],
            states: vec![BundlePoint::new(vec![1.0], vec![0.0]), BundlePoint::new(vec![0.1 + 0.2], vec![-1.0 / 3.0])],
            diagnostics: vec![
                ("energy".into(), vec![0.5, 0.5]),
                ("drift_rate".into(), vec![0.0, 0.0]),
                ("residual".into(), vec![0.0, f64::NAN]),
            ],
            status: Termination::Aborted { reason: "boom".into(), t: 0.1 },
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let tr = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, 1, &tr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,y1,energy,drift_rate,residual\n"));
        let back = read_csv(&text).unwrap();
        assert_eq!(back.times, tr.times);
        assert_eq!(back.states, tr.states);
        assert!(back.diagnostics[1][2].is_nan());
        assert_eq!(back.status.as_deref(), Some("aborted at t=1.0000000000000001e-1: boom"));
    }

    #[test]
    fn plot_has_inline_data() {
        let s = plot_script("osc", 1, &sample());
        assert!(s.contains("$traj << EOD"));
        assert_eq!(s.matches('\n').count(), 13);
    }
}
