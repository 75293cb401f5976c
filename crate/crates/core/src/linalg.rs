use nalgebra::{DMatrix, DVector};

/// Systems with a 2-norm condition number above this are treated as
/// degenerate.
pub const MAX_CONDITION: f64 = 1e12;

pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b`, refusing ill-conditioned systems. Returns the solution
/// (if any) together with the condition number.
pub fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> (Option<DVector<f64>>, f64) {
    let cond = condition_number(a);
    if !(cond <= MAX_CONDITION) {
        return (None, cond);
    }
    let x = a.clone().lu().solve(b).filter(|x| x.iter().all(|v| v.is_finite()));
    (x, cond)
}

/// `‖a x − b‖∞ / max(1, ‖a‖∞‖x‖∞, ‖b‖∞)`
pub fn scaled_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = (a * x - b).amax();
    let a_norm = a.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    r / 1f64.max(a_norm * x.amax()).max(b.amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_system_is_refused() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let (x, cond) = solve_checked(&a, &DVector::from_row_slice(&[1.0, 1.0]));
        assert!(x.is_none());
        assert!(cond.is_infinite());
    }

    #[test]
    fn well_posed_system() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_row_slice(&[-1.0, -1.0]);
        let (x, cond) = solve_checked(&a, &b);
        let x = x.unwrap();
        assert_eq!(x.as_slice(), &[1.0, -1.0]);
        assert_eq!(cond, 1.0);
        assert_eq!(scaled_residual(&a, &x, &b), 0.0);
    }
}
