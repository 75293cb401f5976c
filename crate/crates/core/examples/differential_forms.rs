//! Exterior calculus at a point: wedge and interior products, d of a
//! one-form and the vertical differential d_P of a scalar.

use std::sync::Arc;

use adapted_mech::expr::{parse, Params};
use adapted_mech::forms::{d_oneform, d_p_scalar, interior, wedge, Basis, Differential, ExprField, OneFormValue, VerticalDifferential};
use adapted_mech::frame::{eval_frame, Connection};
use adapted_mech::BundlePoint;
use nalgebra::DVector;

fn main() {
    let params = Params::new();
    let conn = Connection::parse(&[vec!["x1*y1"]], &[] as &[&str]).unwrap();
    let p = BundlePoint::new(vec![0.5], vec![-0.8]);
    let frame = Arc::new(eval_frame(&conn, &p, &params).unwrap());

    // dx and δy as forms, and their wedge in both bases
    let dx = OneFormValue::new(DVector::from_vec(vec![1.0, 0.0]), Basis::Adapted, frame.clone());
    let dy = OneFormValue::new(DVector::from_vec(vec![0.0, 1.0]), Basis::Adapted, frame.clone());
    let w = wedge(&dx, &dy).unwrap();
    println!("dx ∧ δy, adapted:{}", w.comps());
    println!("dx ∧ δy, natural:{}", w.to_natural().comps());

    let x = DVector::from_vec(vec![1.0, 2.0]);
    let ix = interior(&x, &w.to_natural()).unwrap();
    println!("i_X(dx ∧ δy) for X = (1, 2): {:?}", ix.comps().as_slice());

    let f = parse("x1^2*y1 + sin(y1)", 1, &[] as &[&str]).unwrap();
    let field = ExprField::new(&f, &params);
    println!("f = {f}");
    println!("d_P f, adapted: {:?}", d_p_scalar(&field, &frame).unwrap().comps().as_slice());

    let ddf = d_oneform(&Differential(field), &frame).unwrap();
    println!("max |d(df)| = {:.2e}", ddf.max_abs());
    let vd = VerticalDifferential { expr: &f, connection: &conn, params: &params };
    println!("d(d_P f), natural:{}", d_oneform(&vd, &frame).unwrap().comps());
}
