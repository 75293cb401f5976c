use adapted_mech::expr::{eval_jet, eval_value, parse, Params};
use adapted_mech::forms::{interior, Basis, TwoFormValue};
use adapted_mech::frame::{eval_frame, DualOperator, Operator};
use adapted_mech::hamiltonian::{HamiltonianMode, HamiltonianSystem};
use adapted_mech::integrate::{integrate, FnField, IntegratorConfig};
use adapted_mech::verify::{random_connection, random_expression, random_point, random_polynomial};
use adapted_mech::BundlePoint;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dims() -> impl Strategy<Value = usize> {
    1usize..=3
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expression_reparses_to_same_values(seed in any::<u64>(), n in dims()) {
        let mut r = rng(seed);
        let e = random_expression(&mut r, n, 4);
        let text = e.to_string();
        let back = parse(&text, n, &[] as &[&str]).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        let p = random_point(&mut r, n, 1.5);
        let a = eval_value(&e, &p, &Params::new()).unwrap();
        let b = eval_value(&back, &p, &Params::new()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b} for {text}");
    }

    #[test]
    fn jet_gradient_matches_central_difference(seed in any::<u64>(), n in dims()) {
        let mut r = rng(seed);
        let e = random_expression(&mut r, n, 3);
        let p = random_point(&mut r, n, 1.0);
        let params = Params::new();
        let jet = eval_jet(&e, &p, &params).unwrap();
        let h = 1e-5;
        for k in 0..2 * n {
            let fd = (eval_value(&e, &p.shifted(k, h), &params).unwrap()
                - eval_value(&e, &p.shifted(k, -h), &params).unwrap()) / (2.0 * h);
            let err = (fd - jet.grad[k]).abs() / jet.grad[k].abs().max(1.0);
            prop_assert!(err < 1e-6, "slot {k}: jet {} fd {fd} for {e}", jet.grad[k]);
        }
        prop_assert!(close(&jet.hess, &jet.hess.transpose(), 0.0));
    }

    #[test]
    fn frame_and_coframe_are_dual(seed in any::<u64>(), n in dims()) {
        let mut r = rng(seed);
        let conn = random_connection(&mut r, n);
        let p = random_point(&mut r, n, 1.0);
        let f = eval_frame(&conn, &p, &Params::new()).unwrap();
        let id = DMatrix::identity(2 * n, 2 * n);
        prop_assert!(close(&(f.cobasis_matrix() * f.basis_matrix()), &id, 1e-12));
    }

    #[test]
    fn structure_operators_satisfy_their_algebra(seed in any::<u64>(), n in dims()) {
        let mut r = rng(seed);
        let conn = random_connection(&mut r, n);
        let p = random_point(&mut r, n, 1.0);
        let f = eval_frame(&conn, &p, &Params::new()).unwrap();
        let m = 2 * n;
        let id = DMatrix::identity(m, m);
        let h = f.operator_matrix(Operator::Horizontal);
        let v = f.operator_matrix(Operator::Vertical);
        let pm = f.operator_matrix(Operator::Product);
        let j = f.operator_matrix(Operator::Tangent);
        prop_assert!(close(&(&h * &h), &h, 1e-12));
        prop_assert!(close(&(&v * &v), &v, 1e-12));
        prop_assert!(close(&(&h + &v), &id, 1e-12));
        prop_assert!(close(&(&pm * &pm), &id, 1e-12));
        prop_assert!(close(&(&j * &j), &DMatrix::zeros(m, m), 1e-12));
        prop_assert!(close(&(&j * &v), &DMatrix::zeros(m, m), 1e-12));
        let ps = f.dual_operator_matrix(DualOperator::Product);
        prop_assert!(close(&(&ps * &ps), &id, 1e-12));
    }

    #[test]
    fn two_form_annihilates_its_own_argument(seed in any::<u64>(), n in dims()) {
        let mut r = rng(seed);
        let conn = random_connection(&mut r, n);
        let p = random_point(&mut r, n, 1.0);
        let frame = Arc::new(eval_frame(&conn, &p, &Params::new()).unwrap());
        let c = DMatrix::from_fn(2 * n, 2 * n, |a, b| ((a * 7 + b * 3 + seed as usize) % 11) as f64 - 5.0);
        let w = TwoFormValue::from_coefficients(&c, Basis::Natural, frame);
        let x = DVector::from_fn(2 * n, |k, _| p.slot(k) + 0.5);
        let ix = interior(&x, &w).unwrap();
        prop_assert!(ix.apply(&x).abs() < 1e-12);
        let adapted = w.to_adapted().to_natural();
        prop_assert!(close(adapted.comps(), w.comps(), 1e-12));
    }

    #[test]
    fn hamiltonian_equation_holds_for_random_connections(seed in any::<u64>(), n in dims()) {
        let mut r = rng(seed);
        let h = random_polynomial(&mut r, n, 0.4);
        let conn = random_connection(&mut r, n);
        let p = random_point(&mut r, n, 1.0);
        for mode in [HamiltonianMode::Paper, HamiltonianMode::FrameConsistent] {
            let sys = HamiltonianSystem::new(h.clone(), conn.clone(), Params::new(), mode).unwrap();
            prop_assert!(sys.form_residual(&p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rk4_tracks_a_linear_decay(rate in 0.1f64..2.0, x0 in -3.0f64..3.0) {
        let field = FnField::new(2, move |s: &[f64]| Ok(vec![-rate * s[0], rate * s[1]]));
        let cfg = IntegratorConfig::rk4(0.0, 1.0, 1e-3);
        let tr = integrate(&field, &BundlePoint::new(vec![x0], vec![1.0]), &cfg, &[]).unwrap();
        let end = tr.last().unwrap();
        prop_assert!((end.x[0] - x0 * (-rate).exp()).abs() < 1e-10);
        prop_assert!((end.y[0] - rate.exp()).abs() < 1e-9);
    }
}
