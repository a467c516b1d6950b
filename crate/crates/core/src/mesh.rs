//! Periodic 1D grid and the banded stencil operators.
//!
//! Every operator is tridiagonal with periodic wrap, so it is stored as three
//! coefficients (sub-, main- and super-diagonal) and applied row by row in
//! `O(Nx m)`; the dense `Nx x Nx` matrix is only built on request for tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMesh {
    n_cells: usize,
    x_left: f64,
    x_right: f64,
}

impl SpatialMesh {
    pub fn new(n_cells: usize, x_left: f64, x_right: f64) -> Result<Self> {
        if n_cells < 3 {
            return Err(Error::InvalidParameter(format!(
                "periodic stencils need at least 3 cells, got {n_cells}"
            )));
        }
        if !(x_right > x_left) || !x_left.is_finite() || !x_right.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "domain [{x_left}, {x_right}] is empty"
            )));
        }
        Ok(SpatialMesh {
            n_cells,
            x_left,
            x_right,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    /// Center of cell `j`, `x_left + (j + 1/2) dx`.
    pub fn center(&self, j: usize) -> f64 {
        self.x_left + (j as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> DVector<f64> {
        DVector::from_fn(self.n_cells, |j, _| self.center(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Centered first derivative.
    Dx,
    /// Second-order stabilization, approximately `dx/2 d_xx`.
    Dxx,
    /// Forward difference with `Dplus^T Dplus = -Dxx`.
    Dplus,
}

#[derive(Debug, Clone, Copy)]
struct Band {
    lower: f64,
    diag: f64,
    upper: f64,
}

#[derive(Debug, Clone)]
pub struct StencilSet {
    n: usize,
    dx: f64,
    dx_band: Band,
    dxx_band: Band,
    dplus_band: Band,
}

pub fn build_stencils(mesh: &SpatialMesh) -> StencilSet {
    StencilSet::new(mesh)
}

impl StencilSet {
    pub fn new(mesh: &SpatialMesh) -> Self {
        let dx = mesh.dx();
        let half = 1.0 / (2.0 * dx);
        let root = 1.0 / (2.0 * dx).sqrt();
        StencilSet {
            n: mesh.n_cells(),
            dx,
            dx_band: Band {
                lower: -half,
                diag: 0.0,
                upper: half,
            },
            dxx_band: Band {
                lower: half,
                diag: -1.0 / dx,
                upper: half,
            },
            dplus_band: Band {
                lower: 0.0,
                diag: -root,
                upper: root,
            },
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    fn band(&self, op: Stencil) -> Band {
        match op {
            Stencil::Dx => self.dx_band,
            Stencil::Dxx => self.dxx_band,
            Stencil::Dplus => self.dplus_band,
        }
    }

    /// Entry `(j, i)` of the operator.
    pub fn entry(&self, op: Stencil, j: usize, i: usize) -> f64 {
        let b = self.band(op);
        let n = self.n;
        let mut value = 0.0;
        if i == j {
            value += b.diag;
        }
        if i == (j + n - 1) % n {
            value += b.lower;
        }
        if i == (j + 1) % n {
            value += b.upper;
        }
        value
    }

    pub fn to_dense(&self, op: Stencil) -> DenseMatrix {
        DMatrix::from_fn(self.n, self.n, |j, i| self.entry(op, j, i))
    }

    /// `op * field` for an `Nx x m` field.
    pub fn apply(&self, op: Stencil, field: &DenseMatrix) -> Result<DenseMatrix> {
        if field.nrows() != self.n {
            return Err(Error::dims(
                "apply_stencil",
                format!("field has {} rows, mesh has {}", field.nrows(), self.n),
            ));
        }
        Ok(self.apply_unchecked(op, field))
    }

    pub(crate) fn apply_unchecked(&self, op: Stencil, field: &DenseMatrix) -> DenseMatrix {
        let b = self.band(op);
        let n = self.n;
        let mut out = DMatrix::zeros(n, field.ncols());
        for (src, mut dst) in field.column_iter().zip(out.column_iter_mut()) {
            for j in 0..n {
                let prev = src[(j + n - 1) % n];
                let next = src[(j + 1) % n];
                dst[j] = b.lower * prev + b.diag * src[j] + b.upper * next;
            }
        }
        out
    }

    pub fn apply_vec(&self, op: Stencil, field: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(field.len(), self.n);
        let b = self.band(op);
        let n = self.n;
        DVector::from_fn(n, |j, _| {
            b.lower * field[(j + n - 1) % n] + b.diag * field[j] + b.upper * field[(j + 1) % n]
        })
    }

    /// `op^T * field`.
    pub fn apply_transpose(&self, op: Stencil, field: &DenseMatrix) -> DenseMatrix {
        let b = self.band(op);
        let n = self.n;
        let mut out = DMatrix::zeros(n, field.ncols());
        for (src, mut dst) in field.column_iter().zip(out.column_iter_mut()) {
            for i in 0..n {
                // (op^T z)_i = sum_j op_{j i} z_j, with op_{i+1, i} = lower and
                // op_{i-1, i} = upper.
                dst[i] = b.diag * src[i] + b.lower * src[(i + 1) % n] + b.upper * src[(i + n - 1) % n];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stencils(n: usize, left: f64, right: f64) -> StencilSet {
        StencilSet::new(&SpatialMesh::new(n, left, right).unwrap())
    }

    #[test]
    fn mesh_validation() {
        assert!(SpatialMesh::new(2, 0.0, 1.0).is_err());
        assert!(SpatialMesh::new(3, 1.0, 1.0).is_err());
        let m = SpatialMesh::new(1000, -10.0, 10.0).unwrap();
        assert!((m.dx() - 0.02).abs() < 1e-15);
        assert!((m.center(0) + 9.99).abs() < 1e-12);
    }

    #[test]
    fn first_row_of_dx_wraps() {
        let s = stencils(4, 0.0, 2.0);
        let d = s.to_dense(Stencil::Dx);
        assert_eq!(
            d.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 1.0, 0.0, -1.0]
        );
        assert_eq!(d[(3, 0)], 1.0);
    }

    #[test]
    fn row_sums_vanish() {
        for n in 3..12 {
            let s = stencils(n, -1.0, 2.0);
            for op in [Stencil::Dx, Stencil::Dxx, Stencil::Dplus] {
                let d = s.to_dense(op);
                for j in 0..n {
                    assert!(d.row(j).sum().abs() < 1e-13, "{op:?} row {j}");
                }
            }
        }
    }

    #[test]
    fn dplus_factorizes_dxx() {
        for n in 3..=16 {
            let s = stencils(n, 0.0, 1.3);
            let p = s.to_dense(Stencil::Dplus);
            let dxx = s.to_dense(Stencil::Dxx);
            assert!(max_abs(&(p.transpose() * &p + &dxx)) < 1e-13 * max_abs(&dxx));
        }
    }

    #[test]
    fn banded_apply_matches_dense() {
        let s = stencils(9, -2.0, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = DMatrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        for op in [Stencil::Dx, Stencil::Dxx, Stencil::Dplus] {
            let d = s.to_dense(op);
            assert!(max_abs(&(s.apply(op, &f).unwrap() - &d * &f)) < 1e-13);
            assert!(max_abs(&(s.apply_transpose(op, &f) - d.transpose() * &f)) < 1e-13);
            let col = f.column(0).into_owned();
            assert!((s.apply_vec(op, &col) - &d * &col).amax() < 1e-13);
        }
        assert!(s.apply(Stencil::Dx, &DMatrix::zeros(8, 1)).is_err());
    }

    #[test]
    fn constant_and_spike_fields() {
        let s = stencils(10, 0.0, 1.0);
        let c = DMatrix::from_element(10, 2, 3.7);
        assert!(s.apply(Stencil::Dx, &c).unwrap().iter().all(|&x| x == 0.0));
        let mut e = DMatrix::zeros(10, 1);
        e[(0, 0)] = 1.0;
        let d = s.apply(Stencil::Dx, &e).unwrap();
        let nonzero: Vec<_> = d.iter().enumerate().filter(|(_, x)| **x != 0.0).collect();
        assert_eq!(nonzero.len(), 2);
        // Row 1 sees e_0 as its left neighbour, row Nx-1 as its right one.
        assert_eq!(d[(1, 0)], -5.0);
        assert_eq!(d[(9, 0)], 5.0);
    }

    #[test]
    fn centered_difference_is_second_order() {
        let mut errors = Vec::new();
        for n in [50, 100, 200] {
            let mesh = SpatialMesh::new(n, 0.0, 1.0).unwrap();
            let s = StencilSet::new(&mesh);
            let two_pi = 2.0 * std::f64::consts::PI;
            let f = DMatrix::from_fn(n, 1, |j, _| (two_pi * mesh.center(j)).sin());
            let d = s.apply(Stencil::Dx, &f).unwrap();
            let err = (0..n)
                .map(|j| (d[(j, 0)] - two_pi * (two_pi * mesh.center(j)).cos()).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.05, "rate {rate}");
        }
    }
}
