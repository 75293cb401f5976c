use std::fmt;

use serde::{Deserialize, Serialize};

/// A point `(x¹..xⁿ, y¹..yⁿ)` of the 2n-dimensional bundle chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundlePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BundlePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "base and fiber coordinates must have equal length");
        Self { x, y }
    }

    pub fn origin(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n])
    }

    /// Splits a flat state `[x.., y..]`.
    pub fn from_state(state: &[f64]) -> Self {
        assert!(state.len().is_multiple_of(2), "state length must be even");
        let n = state.len() / 2;
        Self::new(state[..n].to_vec(), state[n..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Flat state in natural order `x1..xn, y1..yn`.
    pub fn to_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(2 * self.dim());
        s.extend_from_slice(&self.x);
        s.extend_from_slice(&self.y);
        s
    }

    /// Value in natural slot `k` (0-based over all 2n coordinates).
    pub fn slot(&self, k: usize) -> f64 {
        let n = self.dim();
        if k < n {
            self.x[k]
        } else {
            self.y[k - n]
        }
    }

    /// Copy with natural slot `k` shifted by `h`.
    pub fn shifted(&self, k: usize, h: f64) -> Self {
        let mut p = self.clone();
        let n = p.dim();
        if k < n {
            p.x[k] += h;
        } else {
            p.y[k - n] += h;
        }
        p
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

impl fmt::Display for BundlePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={:?}, y={:?})", self.x, self.y)
    }
}
