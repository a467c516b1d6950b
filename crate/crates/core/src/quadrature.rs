//! Gauss-Legendre rules on `[-1, 1]`.
//!
//! Nodes are found by Newton iteration on the unnormalized Legendre
//! polynomial, which keeps this rule independent of the moment recurrence in
//! [`crate::angular`] so it can serve as a check on it.

use nalgebra::DVector;

/// `(P_n(x), P_n'(x))` from the Bonnet recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes (ascending) and weights of the `n`-point rule.
pub fn gauss_legendre(n: usize) -> (DVector<f64>, DVector<f64>) {
    let mut x = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut root = theta.cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, root);
            let step = p / dp;
            root -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, root);
        let weight = 2.0 / ((1.0 - root * root) * dp * dp);
        x[n - 1 - i] = root;
        x[i] = -root;
        w[n - 1 - i] = weight;
        w[i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64, 128] {
            let (x, w) = gauss_legendre(n);
            assert!((w.sum() - 2.0).abs() < 1e-13);
            // Exact for degree 2n - 1.
            let deg = 2 * n - 2;
            let approx: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = 2.0 / (deg as f64 + 1.0);
            assert!((approx - exact).abs() < 1e-13, "n={n}");
            for i in 1..n {
                assert!(x[i] > x[i - 1]);
            }
        }
    }
}
