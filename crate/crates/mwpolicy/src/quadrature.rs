//! Gauss-Legendre rules on `[-1, 1]`.

use crate::{lit, Scalar};

/// Nodes and weights of the `n`-point Gauss-Legendre rule, found by Newton
/// iteration on the Legendre polynomial from the Chebyshev initial guess.
pub fn gauss_legendre<T: Scalar>(n: usize) -> Vec<(T, T)> {
    assert!(n > 0, "quadrature order must be positive");
    let mut out = vec![(T::zero(), T::zero()); n];
    let pi = std::f64::consts::PI;
    for i in 0..n.div_ceil(2) {
        let mut z = (pi * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out[i] = (lit(-z), lit(w));
        out[n - 1 - i] = (lit(z), lit(w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = gauss_legendre::<f64>(5);
        let wsum: f64 = rule.iter().map(|r| r.1).sum();
        assert!((wsum - 2.0).abs() < 1e-14);
        // Degree 9 is exact for five points.
        let i9: f64 = rule.iter().map(|&(x, w)| w * x.powi(8)).sum();
        assert!((i9 - 2.0 / 9.0).abs() < 1e-14);
    }
}
