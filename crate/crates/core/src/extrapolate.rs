//! Polynomial extrapolation to `x = 0` of matrix-valued samples.

use crate::linalg::{self, c, CMat};

/// Neville's scheme evaluated at zero.
pub fn neville_at_zero(xs: &[f64], ys: &[CMat]) -> CMat {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let mut p: Vec<CMat> = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            // P = (x_j P_i − x_i P_{i+1}) / (x_j − x_i) at x = 0
            let num = &p[i] * c(xj, 0.0) - &p[i + 1] * c(xi, 0.0);
            p[i] = num / c(xj - xi, 0.0);
        }
    }
    p.swap_remove(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolated {
    pub value: CMat,
    /// Distance between the extrapolants of the last two windows.
    pub residual: f64,
    pub order: usize,
}

/// Extrapolates the trailing `order + 1` samples (smallest `x` last) and
/// compares with the window shifted one sample back.
pub fn richardson(xs: &[f64], ys: &[CMat], max_order: usize) -> Extrapolated {
    let n = xs.len();
    assert!(n >= 1);
    let order = max_order.min(n.saturating_sub(2));
    let w = order + 1;
    let value = neville_at_zero(&xs[n - w..], &ys[n - w..]);
    let residual = if n > w {
        let prev = neville_at_zero(&xs[n - w - 1..n - 1], &ys[n - w - 1..n - 1]);
        linalg::fro(&(&value - &prev))
    } else {
        f64::INFINITY
    };
    Extrapolated { value, residual, order }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let xs: Vec<f64> = (0..6).map(|j| 0.1 * 0.5f64.powi(j)).collect();
        let ys: Vec<CMat> = xs.iter().map(|&x| CMat::from_element(1, 1, c(2.0 - 3.0 * x + x * x, x))).collect();
        let e = richardson(&xs, &ys, 3);
        assert!((e.value[(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
        assert!(e.residual < 1e-12);
    }
}
