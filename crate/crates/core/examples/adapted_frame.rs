//! The adapted frame of a coordinate-dependent connection and the structure
//! operators h, v, P, J acting on a tangent vector.

use adapted_mech::expr::Params;
use adapted_mech::frame::{eval_frame, Connection, Operator};
use adapted_mech::BundlePoint;
use nalgebra::DVector;

fn main() {
    let conn = Connection::parse(&[vec!["x1*y2", "0.5"], vec!["-y1", "x2^2"]], &[] as &[&str]).unwrap();
    let p = BundlePoint::new(vec![0.4, -1.0], vec![1.5, 0.2]);
    let frame = eval_frame(&conn, &p, &Params::new()).unwrap();

    println!("N at {p}:{}", frame.nval);
    println!("basis (columns δ/δx^i, ∂/∂y^i):{}", frame.basis_matrix());
    println!("cobasis · basis:{}", frame.cobasis_matrix() * frame.basis_matrix());

    let v = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
    println!("X = {:?}", v.as_slice());
    for op in Operator::ALL {
        let out = frame.operator_matrix(op) * &v;
        println!("{op:?}(X) = {:?}", out.as_slice());
    }
    let adapted = frame.vector_to_adapted(&v);
    println!("X in the adapted frame = {:?}", adapted.as_slice());
}
