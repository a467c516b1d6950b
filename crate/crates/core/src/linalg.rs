//! Dense factorizations with fixed sign conventions.
//!
//! All matrices are `nalgebra::DMatrix<f64>`, stored column-major. The
//! factorizations wrap nalgebra's Householder QR, Golub-Kahan SVD and
//! symmetric QR-iteration eigensolver and normalize their output so that
//! repeated runs (and golden files) are stable:
//!
//! * QR: every diagonal entry of `R` is nonnegative.
//! * SVD: singular values descend; in each left singular vector the entry of
//!   largest magnitude (lowest index on ties) is positive.
//! * Symmetric eigendecomposition: eigenvalues ascend; eigenvectors follow
//!   the same largest-entry-positive rule.
//!
//! Rank-deficient QR inputs are completed by the Householder reflectors
//! themselves: a column with zero residual yields a zero diagonal entry in
//! `R` and the corresponding column of `Q` is still a unit vector orthogonal
//! to all others. No randomness is involved.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR, SVD};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

const MAX_SWEEPS_PER_DIM: usize = 200;

/// Thin QR factorization `M = Q R` of an `n x k` matrix with `k <= n`.
///
/// `Q` is `n x k` with orthonormal columns and `R` is `k x k` upper
/// triangular with a nonnegative diagonal.
pub fn qr_orthonormalize(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.ncols() > m.nrows() {
        return Err(Error::dims(
            "qr_orthonormalize",
            format!("{}x{} has more columns than rows", m.nrows(), m.ncols()),
        ));
    }
    Ok(qr_any(m))
}

/// QR factorization for any shape: `Q` is `n x min(n, k)`, `R` is
/// `min(n, k) x k` upper trapezoidal.
pub fn qr_any(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    if m.ncols() == 0 {
        return (DMatrix::zeros(m.nrows(), 0), DMatrix::zeros(0, 0));
    }
    let qr = QR::new(m.clone());
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Orthonormal basis containing the column span of `m`, with
/// `min(nrows, ncols)` columns.
pub fn orthonormal_basis(m: &DenseMatrix) -> DenseMatrix {
    qr_any(m).0
}

#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: DVector<f64>,
    pub w: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.w.transpose()
    }
}

/// Thin SVD `M = U diag(s) W^T` with descending singular values.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            w: DMatrix::zeros(cols, 0),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("svd input is not finite".into()));
    }
    let raw = SVD::try_new_unordered(
        m.clone(),
        true,
        true,
        f64::EPSILON,
        MAX_SWEEPS_PER_DIM * (k + 1),
    )
    .ok_or(Error::NoConvergence { op: "svd" })?;
    let (u, vt) = match (raw.u, raw.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NoConvergence { op: "svd" }),
    };

    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps equal singular values in backend order.
    order.sort_by(|&a, &b| raw.singular_values[b].total_cmp(&raw.singular_values[a]));

    let mut uu = DMatrix::zeros(rows, k);
    let mut ww = DMatrix::zeros(cols, k);
    let mut s = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = raw.singular_values[src].max(0.0);
        uu.set_column(dst, &u.column(src));
        ww.set_column(dst, &vt.row(src).transpose());
        if dominant_entry_sign(uu.column(dst).iter()) < 0.0 {
            uu.column_mut(dst).neg_mut();
            ww.column_mut(dst).neg_mut();
        }
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence { op: "svd" });
    }
    Ok(Svd {
        u: uu,
        singular_values: s,
        w: ww,
    })
}

/// Eigendecomposition `M = Q diag(lambda) Q^T` of a symmetric matrix, with
/// ascending eigenvalues.
pub fn symmetric_eig(m: &DenseMatrix) -> Result<(DenseMatrix, DVector<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::dims(
            "symmetric_eig",
            format!("{}x{} is not square", m.nrows(), m.ncols()),
        ));
    }
    let scale = max_abs(m);
    let asymmetry = max_abs(&(m - m.transpose()));
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DVector::zeros(0)));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS_PER_DIM * (n + 1))
        .ok_or(Error::NoConvergence { op: "symmetric_eig" })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut q = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = eig.eigenvalues[src];
        q.set_column(dst, &eig.eigenvectors.column(src));
        if dominant_entry_sign(q.column(dst).iter()) < 0.0 {
            q.column_mut(dst).neg_mut();
        }
    }
    Ok((q, lambda))
}

fn dominant_entry_sign<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let mut best = 0.0_f64;
    for &x in values {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Horizontal concatenation `[a, b, ...]`.
pub fn hcat(blocks: &[&DenseMatrix]) -> DenseMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    out
}

pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `max |Q^T Q - I|`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let mut g = q.transpose() * q;
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    max_abs(&g)
}

/// Scales row `j` of `m` by `w[j]`.
pub fn scale_rows(m: &DenseMatrix, w: &DVector<f64>) -> DenseMatrix {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col.component_mul_assign(w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn qr_of_identity_is_identity() {
        let (q, r) = qr_orthonormalize(&DMatrix::identity(3, 3)).unwrap();
        assert!(max_abs(&(q - DMatrix::identity(3, 3))) < 1e-15);
        assert!(max_abs(&(r - DMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn qr_single_nonzero_column() {
        let m = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (q, r) = qr_orthonormalize(&m).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(r[(1, 1)], 0.0);
        assert!(orthonormality_defect(&q) < 1e-15);
        assert!(max_abs(&(&q * &r - &m)) < 1e-15);
    }

    #[test]
    fn qr_random_tall() {
        let m = random(50, 10, 1);
        let (q, r) = qr_orthonormalize(&m).unwrap();
        assert!(orthonormality_defect(&q) < 1e-12);
        assert!(max_abs(&(&q * &r - &m)) < 1e-12 * max_abs(&m));
        for i in 0..10 {
            assert!(r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_rank_deficient_stack_still_orthonormal() {
        let a = random(12, 3, 2);
        let m = hcat(&[&a, &a, &(&a * 2.0)]);
        let (q, r) = qr_orthonormalize(&m).unwrap();
        assert_eq!(q.ncols(), 9);
        assert!(orthonormality_defect(&q) < 1e-12);
        assert!(max_abs(&(&q * &r - &m)) < 1e-12 * max_abs(&m));
        // Determinism.
        let (q2, _) = qr_orthonormalize(&m).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn qr_rejects_wide_input() {
        assert!(matches!(
            qr_orthonormalize(&random(2, 3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let basis = orthonormal_basis(&random(2, 3, 3));
        assert_eq!(basis.shape(), (2, 2));
        assert!(orthonormality_defect(&basis) < 1e-14);
    }

    #[test]
    fn svd_diagonal_and_zero() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let s = svd(&m).unwrap();
        assert!((s.singular_values[0] - 3.0).abs() < 1e-15);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-15);

        let z = svd(&DMatrix::zeros(4, 4)).unwrap();
        assert!(z.singular_values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn svd_rank_one_closed_form() {
        let x = random(7, 1, 4);
        let y = random(5, 1, 5);
        let m = &x * y.transpose();
        let s = svd(&m).unwrap();
        let expected = x.norm() * y.norm();
        assert!((s.singular_values[0] - expected).abs() < 1e-13 * expected);
        for k in 1..5 {
            assert!(s.singular_values[k] < 1e-12 * expected);
        }
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        for (rows, cols, seed) in [(9, 4, 6), (4, 9, 7), (6, 6, 8)] {
            let m = random(rows, cols, seed);
            let s = svd(&m).unwrap();
            assert!(max_abs(&(s.reconstruct() - &m)) < 1e-12 * max_abs(&m));
            assert!(orthonormality_defect(&s.u) < 1e-12);
            assert!(orthonormality_defect(&s.w) < 1e-12);
            for k in 1..s.singular_values.len() {
                assert!(s.singular_values[k - 1] >= s.singular_values[k]);
            }
        }
    }

    #[test]
    fn symmetric_eig_closed_forms() {
        let (_, l) = symmetric_eig(&DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 5.0])).unwrap();
        assert_eq!(l.as_slice(), &[-2.0, 5.0]);

        let a = 0.7;
        let (q, l) = symmetric_eig(&DMatrix::from_row_slice(2, 2, &[0.0, a, a, 0.0])).unwrap();
        assert!((l[0] + a).abs() < 1e-15 && (l[1] - a).abs() < 1e-15);
        assert!(orthonormality_defect(&q) < 1e-15);
    }

    #[test]
    fn symmetric_eig_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(symmetric_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn symmetric_eig_reconstructs() {
        let a = random(8, 8, 9);
        let m = &a + a.transpose();
        let (q, l) = symmetric_eig(&m).unwrap();
        let back = &q * DMatrix::from_diagonal(&l) * q.transpose();
        assert!(max_abs(&(back - &m)) < 1e-12 * max_abs(&m));
        assert!(orthonormality_defect(&q) < 1e-12);
    }
}
