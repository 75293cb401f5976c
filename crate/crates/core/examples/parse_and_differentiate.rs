//! Parse an expression and read off its value, gradient and Hessian.
//!
//! `cargo run --example parse_and_differentiate -- "0.5*y1^2 - k*cos(x1)" 0.3,1.2`

use adapted_mech::expr::{eval_jet, parse, Params};
use adapted_mech::BundlePoint;

fn main() {
    let mut args = std::env::args().skip(1);
    let text = args.next().unwrap_or_else(|| "0.5*y1^2 - k*cos(x1)".into());
    let at: Vec<f64> = args
        .next()
        .map(|s| s.split(',').map(|v| v.trim().parse().expect("numeric coordinate")).collect())
        .unwrap_or_else(|| vec![0.3, 1.2]);
    let n = at.len() / 2;

    let params = Params::from([("k".to_string(), 9.81)]);
    let names: Vec<&str> = params.keys().map(String::as_str).collect();
    let expr = match parse(&text, n, &names) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let p = BundlePoint::from_state(&at);
    let jet = eval_jet(&expr, &p, &params).expect("expression evaluates");

    println!("f       = {expr}");
    println!("at        {p}");
    println!("value   = {}", jet.value);
    println!("grad    = {:?}", jet.grad.as_slice());
    print!("hessian = {}", jet.hess);
}
