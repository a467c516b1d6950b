//! Normalized Legendre moment machinery.
//!
//! The angular variable is expanded in Legendre polynomials normalized so
//! that `<P_k, P_l> = delta_kl` on `[-1, 1]`. The flux matrix
//! `A_kl = <P_k, mu P_l>` is the symmetric Jacobi matrix of that family;
//! `|A|` and `|A|^(1/2)` come from its eigendecomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, DenseMatrix};

/// Off-diagonal entry `A_{l,l+1}` of the normalized three-term recurrence.
#[inline]
pub fn recurrence_coefficient(l: usize) -> f64 {
    let l = l as f64;
    (l + 1.0) / ((2.0 * l + 1.0) * (2.0 * l + 3.0)).sqrt()
}

pub fn build_flux_matrix(n_moments: usize) -> Result<DenseMatrix> {
    if n_moments == 0 {
        return Err(Error::InvalidParameter("n_moments must be at least 1".into()));
    }
    let mut a = DMatrix::zeros(n_moments, n_moments);
    for l in 0..n_moments - 1 {
        let c = recurrence_coefficient(l);
        a[(l, l + 1)] = c;
        a[(l + 1, l)] = c;
    }
    Ok(a)
}

/// Returns `(|A|, |A|^(1/2))`, both symmetric positive semidefinite.
pub fn build_abs_matrices(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (q, lambda) = symmetric_eig(a)?;
    let abs = lambda.map(f64::abs);
    let sqrt_abs = abs.map(f64::sqrt);
    let compose = |d: &DVector<f64>| {
        let mut qd = q.clone();
        for (j, s) in d.iter().enumerate() {
            qd.column_mut(j).scale_mut(*s);
        }
        let m = qd * q.transpose();
        // Symmetrize away rounding so downstream symmetry checks are exact.
        (&m + m.transpose()) * 0.5
    };
    Ok((compose(&abs), compose(&sqrt_abs)))
}

/// Evaluates normalized `P_0 .. P_{n-1}` at each point; row `i` holds the
/// values at `mu_points[i]`.
pub fn evaluate_legendre(n_moments: usize, mu_points: &[f64]) -> Result<DenseMatrix> {
    if n_moments == 0 {
        return Err(Error::InvalidParameter("n_moments must be at least 1".into()));
    }
    if let Some(bad) = mu_points.iter().find(|m| !(-1.0..=1.0).contains(*m)) {
        return Err(Error::InvalidParameter(format!(
            "direction {bad} lies outside [-1, 1]"
        )));
    }
    let mut p = DMatrix::zeros(mu_points.len(), n_moments);
    for (i, &mu) in mu_points.iter().enumerate() {
        let mut prev = 0.0;
        let mut cur = std::f64::consts::FRAC_1_SQRT_2;
        p[(i, 0)] = cur;
        for l in 0..n_moments - 1 {
            let below = if l == 0 { 0.0 } else { recurrence_coefficient(l - 1) };
            let next = (mu * cur - below * prev) / recurrence_coefficient(l);
            p[(i, l + 1)] = next;
            prev = cur;
            cur = next;
        }
    }
    Ok(p)
}

/// Flux matrix and its absolute value / square root, built once per run.
#[derive(Debug, Clone)]
pub struct AngularBasis {
    n_moments: usize,
    flux: DenseMatrix,
    flux_abs: DenseMatrix,
    flux_abs_sqrt: DenseMatrix,
}

impl AngularBasis {
    pub fn new(n_moments: usize) -> Result<Self> {
        let flux = build_flux_matrix(n_moments)?;
        let (flux_abs, flux_abs_sqrt) = build_abs_matrices(&flux)?;
        Ok(AngularBasis {
            n_moments,
            flux,
            flux_abs,
            flux_abs_sqrt,
        })
    }

    pub fn n_moments(&self) -> usize {
        self.n_moments
    }

    /// `A`
    pub fn flux(&self) -> &DenseMatrix {
        &self.flux
    }

    /// `|A|`
    pub fn flux_abs(&self) -> &DenseMatrix {
        &self.flux_abs
    }

    /// `|A|^(1/2)`
    pub fn flux_abs_sqrt(&self) -> &DenseMatrix {
        &self.flux_abs_sqrt
    }

    /// Computes `W A^T` using the tridiagonal structure of `A`.
    pub fn right_mul_flux_t(&self, w: &DenseMatrix) -> DenseMatrix {
        let n = self.n_moments;
        debug_assert_eq!(w.ncols(), n);
        let mut out = DMatrix::zeros(w.nrows(), n);
        // (W A^T)_{jk} = sum_l W_{jl} A_{kl}
        for k in 0..n {
            let mut col = out.column_mut(k);
            if k > 0 {
                col.axpy(self.flux[(k, k - 1)], &w.column(k - 1), 1.0);
            }
            if k + 1 < n {
                col.axpy(self.flux[(k, k + 1)], &w.column(k + 1), 1.0);
            }
        }
        out
    }

    /// Row `k` of `A` as a column vector.
    pub fn flux_row(&self, k: usize) -> DVector<f64> {
        self.flux.row(k).transpose()
    }

    /// Row `k` of `|A|` as a column vector.
    pub fn flux_abs_row(&self, k: usize) -> DVector<f64> {
        self.flux_abs.row(k).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::quadrature::gauss_legendre;

    /// Normalized Legendre values from the unnormalized Bonnet recurrence,
    /// independent of `recurrence_coefficient`.
    fn bonnet(n: usize, mu: f64) -> Vec<f64> {
        let mut raw = vec![1.0, mu];
        for l in 1..n {
            let lf = l as f64;
            let next = ((2.0 * lf + 1.0) * mu * raw[l] - lf * raw[l - 1]) / (lf + 1.0);
            raw.push(next);
        }
        (0..n)
            .map(|l| raw[l] * ((2.0 * l as f64 + 1.0) / 2.0).sqrt())
            .collect()
    }

    fn quadrature_flux_matrix(n: usize, nodes: usize) -> DenseMatrix {
        let (x, w) = gauss_legendre(nodes);
        let mut a = DMatrix::zeros(n, n);
        for (mu, wt) in x.iter().zip(w.iter()) {
            let p = bonnet(n, *mu);
            for k in 0..n {
                for l in 0..n {
                    a[(k, l)] += wt * p[k] * mu * p[l];
                }
            }
        }
        a
    }

    #[test]
    fn single_moment_has_zero_flux() {
        assert_eq!(build_flux_matrix(1).unwrap(), DMatrix::zeros(1, 1));
        assert!(build_flux_matrix(0).is_err());
    }

    #[test]
    fn two_moments_match_quadrature() {
        let a = build_flux_matrix(2).unwrap();
        let q = quadrature_flux_matrix(2, 8);
        assert!((a[(0, 1)] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((q[(0, 1)] - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn flux_matrix_matches_quadrature_oracle() {
        let a = build_flux_matrix(6).unwrap();
        let q = quadrature_flux_matrix(6, 64);
        assert!(max_abs(&(a - q)) < 1e-13);
    }

    #[test]
    fn abs_of_two_by_two() {
        let a = build_flux_matrix(2).unwrap();
        let (abs, sqrt) = build_abs_matrices(&a).unwrap();
        let expected = DMatrix::identity(2, 2) / 3f64.sqrt();
        assert!(max_abs(&(&abs - expected)) < 1e-15);
        assert!(max_abs(&(&sqrt * &sqrt - &abs)) < 1e-15);
        let (z, zs) = build_abs_matrices(&DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(z[(0, 0)], 0.0);
        assert_eq!(zs[(0, 0)], 0.0);
    }

    #[test]
    fn abs_squared_equals_square() {
        for n in [3, 8, 17, 40] {
            let basis = AngularBasis::new(n).unwrap();
            let a = basis.flux();
            let abs = basis.flux_abs();
            assert!(max_abs(&(abs * abs - a * a)) < 1e-12);
            assert!(max_abs(&(abs * a - a * abs)) < 1e-12);
            let s = basis.flux_abs_sqrt();
            assert!(max_abs(&(s * s - abs)) < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_are_legendre_roots() {
        // Roots of P_8 by bisection on a fine sign-change grid.
        let p8 = |x: f64| bonnet(9, x)[8];
        let mut roots = Vec::new();
        let grid = 4000;
        for i in 0..grid {
            let (mut lo, mut hi) = (
                -1.0 + 2.0 * i as f64 / grid as f64,
                -1.0 + 2.0 * (i + 1) as f64 / grid as f64,
            );
            if p8(lo) * p8(hi) < 0.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if p8(lo) * p8(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        assert_eq!(roots.len(), 8);
        let (_, lambda) = symmetric_eig(&build_flux_matrix(8).unwrap()).unwrap();
        for (l, r) in lambda.iter().zip(&roots) {
            assert!((l - r).abs() < 1e-13, "{l} vs {r}");
        }
        for k in 0..4 {
            assert!((lambda[k] + lambda[7 - k]).abs() < 1e-14);
        }
        assert!(lambda.iter().all(|l| l.abs() < 1.0));
    }

    #[test]
    fn legendre_values() {
        let p = evaluate_legendre(4, &[-1.0, 0.0, 0.3, 1.0]).unwrap();
        for i in 0..4 {
            assert!((p[(i, 0)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        }
        assert_eq!(p[(1, 1)], 0.0);
        for (i, mu) in [-1.0, 0.0, 0.3, 1.0].into_iter().enumerate() {
            let b = bonnet(4, mu);
            for l in 0..4 {
                assert!((p[(i, l)] - b[l]).abs() < 1e-14);
            }
        }
        assert!(evaluate_legendre(3, &[1.5]).is_err());
    }

    #[test]
    fn legendre_gram_is_identity() {
        let (x, w) = gauss_legendre(128);
        let p = evaluate_legendre(20, x.as_slice()).unwrap();
        let mut gram = DMatrix::zeros(20, 20);
        for i in 0..x.len() {
            let row = p.row(i);
            gram += row.transpose() * row * w[i];
        }
        assert!(max_abs(&(gram - DMatrix::identity(20, 20))) < 1e-12);
    }

    #[test]
    fn tridiagonal_product_matches_dense() {
        let basis = AngularBasis::new(7).unwrap();
        let w = DMatrix::from_fn(5, 7, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.11);
        let dense = &w * basis.flux().transpose();
        assert!(max_abs(&(basis.right_mul_flux_t(&w) - dense)) < 1e-15);
    }
}
