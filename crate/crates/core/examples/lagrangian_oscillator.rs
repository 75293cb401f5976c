//! The oscillator L = ½y² − ½x² in both Lagrangian modes, with its energy,
//! the semispray solve and the integrated flow.

use adapted_mech::expr::{parse, Params};
use adapted_mech::frame::Connection;
use adapted_mech::integrate::{integrate, IntegratorConfig, Probe};
use adapted_mech::lagrangian::{mechanical_lagrangian, LagrangianMode, LagrangianSystem};
use adapted_mech::BundlePoint;

fn main() {
    let v = parse("0.5*x1^2", 1, &[] as &[&str]).unwrap();
    let l = mechanical_lagrangian(&[1.0], &v, None).unwrap();
    println!("L = {l}");
    let sys = LagrangianSystem::new(l, Connection::zero(1), Params::new()).unwrap();
    let p = BundlePoint::new(vec![1.0], vec![1.0]);

    let s = sys.semispray_solve(&p).unwrap();
    println!("semispray at {p}: horizontal {:?}, vertical {:?}, cond {:.1}", s.horizontal.as_slice(), s.vertical.as_slice(), s.condition);
    println!("E_L = {}", sys.lagrangian_energy(&p).unwrap());

    for mode in [LagrangianMode::CoefficientMatching, LagrangianMode::EulerLagrange] {
        println!("{mode:?}: rhs {:?}", sys.rhs(mode, &p).unwrap().as_slice());
    }
    println!("|rhs_cm − rhs_el| = {:.3}", sys.mode_discrepancy(&p).unwrap());

    let probes = [Probe::new("xy", |q: &BundlePoint| Ok(q.x[0] * q.y[0]))];
    let cfg = IntegratorConfig::rk4(0.0, 1.0, 1e-3).with_stride(250);
    let tr = integrate(&sys.flow(LagrangianMode::CoefficientMatching), &p, &cfg, &probes).unwrap();
    println!("coefficient-matching flow from {p}:");
    for (k, t) in tr.times.iter().enumerate() {
        println!("  t={t:.2}  {}  xy={:.12}", tr.states[k], tr.diagnostic("xy").unwrap()[k]);
    }
    println!("(e, 1/e) = ({}, {})", std::f64::consts::E, (-1.0f64).exp());
}
