//! A parameter sweep: one oscillator per stiffness value, integrated in
//! parallel. A zero mass entry is degenerate and aborts alone.

use adapted_mech::expr::{parse, Params};
use adapted_mech::frame::Connection;
use adapted_mech::integrate::{sweep, IntegratorConfig, SweepItem, Termination};
use adapted_mech::lagrangian::{LagrangianMode, LagrangianSystem};
use adapted_mech::BundlePoint;

fn main() {
    let l = parse("0.5*m*y1^2 - 0.5*k*x1^2", 1, &["k", "m"]).unwrap();
    let grid = [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 0.0)];
    let start = BundlePoint::new(vec![1.0], vec![0.0]);

    let items: Vec<SweepItem> = grid
        .iter()
        .map(|&(k, m)| {
            let params = Params::from([("k".to_string(), k), ("m".to_string(), m)]);
            let sys = LagrangianSystem::new(l.clone(), Connection::zero(1), params).unwrap();
            SweepItem { field: Box::new(sys.flow(LagrangianMode::EulerLagrange)), start: start.clone(), probes: vec![] }
        })
        .collect();

    let cfg = IntegratorConfig::rk4(0.0, std::f64::consts::TAU, 1e-3);
    for ((k, m), result) in grid.iter().zip(sweep(&items, &cfg)) {
        match result {
            Ok(tr) => match &tr.status {
                Termination::Completed => println!("k={k} m={m}: {} rows, state at 2π {}", tr.len(), tr.last().unwrap()),
                Termination::Aborted { reason, t } => println!("k={k} m={m}: aborted at t={t}: {reason}"),
            },
            Err(e) => println!("k={k} m={m}: {e}"),
        }
    }
}
