//! Full-rank time steppers for the multiplicative system `f = B g`.
//!
//! Both schemes treat transport explicitly and absorption implicitly. The
//! implicit coupling between the zeroth moment and the internal energy is
//! linear per cell and is solved in closed form, so a step never iterates.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::SQRT_2;

use crate::angular::AngularBasis;
use crate::error::{Error, Result};
use crate::linalg::{scale_rows, DenseMatrix};
use crate::mesh::{SpatialMesh, Stencil, StencilSet};

/// Moments `v` (`Nx x Nmu`) of `g` and the internal energy `B` (`Nx`).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub v: DenseMatrix,
    pub b: DVector<f64>,
}

impl MomentField {
    pub fn new(v: DenseMatrix, b: DVector<f64>) -> Result<Self> {
        if v.nrows() != b.len() {
            return Err(Error::dims(
                "MomentField::new",
                format!("v has {} rows, B has {} entries", v.nrows(), b.len()),
            ));
        }
        check_positive(&b)?;
        Ok(MomentField { v, b })
    }

    pub fn n_cells(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_moments(&self) -> usize {
        self.v.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(self.b.iter()).all(|x| x.is_finite())
    }
}

pub(crate) fn check_positive(b: &DVector<f64>) -> Result<()> {
    match b.iter().position(|&x| !(x > 0.0)) {
        Some(cell) => Err(Error::NonPositiveEnergy {
            cell,
            value: b[cell],
        }),
        None => Ok(()),
    }
}

/// Absorption opacity, uniform or per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Opacity {
    Uniform(f64),
    PerCell(Vec<f64>),
}

impl Opacity {
    pub fn at(&self, j: usize) -> f64 {
        match self {
            Opacity::Uniform(s) => *s,
            Opacity::PerCell(s) => s[j],
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Opacity::Uniform(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub sigma: Opacity,
    pub dt: f64,
    /// External isotropic source `Q_j`, added to the `g` equation as `Q / B`.
    pub source: Option<DVector<f64>>,
}

impl SolverConfig {
    /// `dt = cfl * dx`.
    pub fn from_cfl(mesh: &SpatialMesh, cfl: f64, sigma: f64) -> Result<Self> {
        let cfg = SolverConfig {
            sigma: Opacity::Uniform(sigma),
            dt: cfl * mesh.dx(),
            source: None,
        };
        cfg.validate(mesh.n_cells())?;
        Ok(cfg)
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        SolverConfig {
            dt,
            ..self.clone()
        }
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step {} must be positive", self.dt)));
        }
        match &self.sigma {
            Opacity::Uniform(s) if !(*s >= 0.0) => {
                return Err(Error::InvalidParameter(format!("opacity {s} must be nonnegative")))
            }
            Opacity::PerCell(s) if s.len() != n_cells || s.iter().any(|x| !(*x >= 0.0)) => {
                return Err(Error::InvalidParameter(
                    "per-cell opacity must have one nonnegative entry per cell".into(),
                ))
            }
            _ => {}
        }
        if let Some(q) = &self.source {
            if q.len() != n_cells {
                return Err(Error::dims("SolverConfig", "source length differs from cell count"));
            }
        }
        Ok(())
    }

    /// Whether `dt <= dx`, the condition under which the conservative
    /// schemes dissipate energy.
    pub fn satisfies_cfl(&self, stencils: &StencilSet) -> bool {
        self.dt <= stencils.dx() * (1.0 + 1e-14)
    }

    /// `1 / (1 + sigma_j dt)` per cell.
    pub(crate) fn implicit_weights(&self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |j, _| 1.0 / (1.0 + self.sigma.at(j) * self.dt))
    }

    /// Source contribution to the zeroth moment of the explicit part,
    /// `sqrt(2) dt Q_j / (B_j (1 + sigma_j dt))`.
    pub(crate) fn source_term(&self, j: usize, b0: f64) -> f64 {
        match &self.source {
            Some(q) => SQRT_2 * self.dt * q[j] / (b0 * (1.0 + self.sigma.at(j) * self.dt)),
            None => 0.0,
        }
    }
}

/// Transport part `-(1/B) Dx(B w) A^T + (1/B) Dxx(B w) |A|^T` for a
/// field `w` with one row per cell (`Nx x Nmu`).
pub(crate) fn conservative_transport(
    w: &DenseMatrix,
    b: &DVector<f64>,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> DenseMatrix {
    let bw = scale_rows(w, b);
    let dx_part = stencils.apply_unchecked(Stencil::Dx, &bw);
    let dxx_part = stencils.apply_unchecked(Stencil::Dxx, &bw);
    let mut t = dxx_part * basis.flux_abs().transpose();
    t -= basis.right_mul_flux_t(&dx_part);
    let inv_b = b.map(|x| 1.0 / x);
    scale_rows(&t, &inv_b)
}

/// Explicit part `C` of the conservative step, already divided by
/// `1 + sigma dt`.
pub fn explicit_rhs_conservative(
    state: &MomentField,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<DenseMatrix> {
    check_shapes(state, stencils, basis)?;
    check_positive(&state.b)?;
    let transport = conservative_transport(&state.v, &state.b, stencils, basis);
    let rhs = &state.v + transport * cfg.dt;
    Ok(scale_rows(&rhs, &cfg.implicit_weights(state.n_cells())))
}

fn check_shapes(state: &MomentField, stencils: &StencilSet, basis: &AngularBasis) -> Result<()> {
    if state.n_cells() != stencils.n_cells() || state.b.len() != stencils.n_cells() {
        return Err(Error::dims("step", "state and mesh cell counts differ"));
    }
    if state.n_moments() != basis.n_moments() {
        return Err(Error::dims("step", "state and angular basis moment counts differ"));
    }
    Ok(())
}

/// Solves the per-cell coupled system for `w = B1/B0` and `y = v1_0`:
///
/// ```text
/// w y = c + D w,          D = sqrt(2) sigma dt / (1 + sigma dt)
/// w   = 1 + sigma dt w (sqrt(2) y - 2)
/// ```
///
/// where `c = c0 + q_term` is the explicit zeroth-moment part (divided by
/// `1 + sigma dt`). Substituting the first equation into the second leaves
/// a linear equation for `w`.
pub fn solve_coupled_cell(c0: f64, sigma: f64, dt: f64, q_term: f64) -> Result<(f64, f64)> {
    solve_coupled_cell_at(0, c0, sigma, dt, q_term)
}

pub(crate) fn solve_coupled_cell_at(
    cell: usize,
    c0: f64,
    sigma: f64,
    dt: f64,
    q_term: f64,
) -> Result<(f64, f64)> {
    let c = c0 + q_term;
    let s = sigma * dt;
    let w = (1.0 + SQRT_2 * s * c) * (1.0 + s) / (1.0 + 3.0 * s);
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::CoupledSolve { cell, ratio: w });
    }
    let d = SQRT_2 * s / (1.0 + s);
    let y = (c + d * w) / w;
    Ok((w, y))
}

/// One step of the energy-stable conservative scheme.
pub fn step_full_conservative(
    state: &MomentField,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<MomentField> {
    if !cfg.satisfies_cfl(stencils) {
        log::warn!(
            "dt = {} exceeds dx = {}; energy stability is not guaranteed",
            cfg.dt,
            stencils.dx()
        );
    }
    let c = explicit_rhs_conservative(state, cfg, stencils, basis)?;
    let n = state.n_cells();
    let mut v = c;
    let mut b = state.b.clone();
    for j in 0..n {
        let (w, y) = solve_coupled_cell_at(
            j,
            v[(j, 0)],
            cfg.sigma.at(j),
            cfg.dt,
            cfg.source_term(j, state.b[j]),
        )?;
        b[j] *= w;
        v.row_mut(j).unscale_mut(w);
        v[(j, 0)] = y;
    }
    Ok(MomentField { v, b })
}

/// One step of the advection-form scheme, which splits `d_x(B g)` with the
/// product rule. It is not von Neumann stable and exists to demonstrate
/// that.
pub fn step_full_advection(
    state: &MomentField,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<MomentField> {
    check_shapes(state, stencils, basis)?;
    check_positive(&state.b)?;
    let n = state.n_cells();
    let dt = cfg.dt;
    let v0 = &state.v;

    // v0 - dt Dx v0 A^T + dt Dxx v0 |A|^T - dt (v0 / B) (Dx B) A^T
    let dx_v = stencils.apply_unchecked(Stencil::Dx, v0);
    let dxx_v = stencils.apply_unchecked(Stencil::Dxx, v0);
    let dx_b = stencils.apply_vec(Stencil::Dx, &state.b);
    let ratio = DVector::from_fn(n, |j, _| dx_b[j] / state.b[j]);
    let mut flux_arg = dx_v;
    flux_arg += scale_rows(v0, &ratio);
    let mut e = v0.clone();
    e -= basis.right_mul_flux_t(&flux_arg) * dt;
    e += dxx_v * basis.flux_abs().transpose() * dt;

    // Implicit absorption and dB/dt terms give, per cell,
    //   v1_k (w + s) = e_k + sqrt(2) s delta_k0,
    //   w = 1 + s w (sqrt(2) v1_0 - 2),
    // whose positive root in w is unique for s > 0.
    let mut v = DMatrix::zeros(n, state.n_moments());
    let mut b = state.b.clone();
    for j in 0..n {
        let s = cfg.sigma.at(j) * dt;
        let e0 = e[(j, 0)] + cfg.source_term(j, state.b[j]) * (1.0 + s);
        let qa = 1.0 + 2.0 * s;
        let qb = s - 1.0 - SQRT_2 * s * e0;
        let qc = -s;
        let disc = qb * qb - 4.0 * qa * qc;
        let w = if qb <= 0.0 {
            (-qb + disc.sqrt()) / (2.0 * qa)
        } else {
            // Cancellation-free form of the same root.
            (2.0 * qc) / (-qb - disc.sqrt())
        };
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::CoupledSolve { cell: j, ratio: w });
        }
        let denom = w + s;
        for k in 0..state.n_moments() {
            v[(j, k)] = e[(j, k)] / denom;
        }
        v[(j, 0)] = (e0 + SQRT_2 * s) / denom;
        b[j] *= w;
    }
    Ok(MomentField { v, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn coupled_cell_decouples_without_absorption() {
        let (w, y) = solve_coupled_cell(0.37, 0.0, 0.1, 0.0).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(y, 0.37);
    }

    #[test]
    fn coupled_cell_keeps_equilibrium() {
        for (sigma, dt) in [(1.0, 0.01), (10.0, 0.5), (0.3, 2.0)] {
            let s = sigma * dt;
            // Explicit part of g = 1 (v_0 = sqrt 2) after division by 1 + s.
            let (w, y) = solve_coupled_cell(SQRT_2 / (1.0 + s), sigma, dt, 0.0).unwrap();
            assert!((w - 1.0).abs() < 1e-15);
            assert!((y - SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn coupled_cell_matches_bisection_oracle() {
        let (sigma, dt, c0) = (1.0, 0.01, 1.0);
        let s = sigma * dt;
        let d = SQRT_2 * s / (1.0 + s);
        // Residual of the energy equation after eliminating y.
        let residual = |w: f64| {
            let y = (c0 + d * w) / w;
            w - 1.0 - s * w * (SQRT_2 * y - 2.0)
        };
        let w_ref = bisect(0.5, 1.5, residual);
        let (w, y) = solve_coupled_cell(c0, sigma, dt, 0.0).unwrap();
        assert!((w - w_ref).abs() < 1e-13);
        assert!((w * y - c0 - d * w).abs() < 1e-12);
        assert!((w - 1.0 - s * w * (SQRT_2 * y - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn coupled_cell_rejects_collapse() {
        let err = solve_coupled_cell(-100.0, 1.0, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, Error::CoupledSolve { .. }));
    }

    fn setup(n: usize, m: usize) -> (SpatialMesh, StencilSet, AngularBasis) {
        let mesh = SpatialMesh::new(n, 0.0, 1.0).unwrap();
        (mesh, StencilSet::new(&mesh), AngularBasis::new(m).unwrap())
    }

    #[test]
    fn constant_state_is_unchanged_by_transport() {
        let (mesh, st, basis) = setup(8, 4);
        let v = DMatrix::from_fn(8, 4, |_, k| 0.3 + k as f64);
        let state = MomentField::new(v.clone(), DVector::from_element(8, 2.0)).unwrap();
        let cfg = SolverConfig::from_cfl(&mesh, 0.9, 0.0).unwrap();
        let c = explicit_rhs_conservative(&state, &cfg, &st, &basis).unwrap();
        assert!(max_abs(&(c - v)) < 1e-14);
    }

    #[test]
    fn huge_opacity_damps_explicit_part() {
        let (mesh, st, basis) = setup(8, 4);
        let v = DMatrix::from_fn(8, 4, |j, k| (j as f64 * 0.4).sin() + k as f64);
        let state = MomentField::new(v, DVector::from_element(8, 1.0)).unwrap();
        let mut cfg = SolverConfig::from_cfl(&mesh, 0.9, 1e12).unwrap();
        cfg.dt = 0.1;
        let c = explicit_rhs_conservative(&state, &cfg, &st, &basis).unwrap();
        assert!(max_abs(&c) < 1e-9);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let (mesh, st, basis) = setup(10, 5);
        let mut v = DMatrix::zeros(10, 5);
        v.column_mut(0).fill(SQRT_2);
        for sigma in [0.0, 1.0, 25.0] {
            let state = MomentField::new(v.clone(), DVector::from_element(10, 3.0)).unwrap();
            let cfg = SolverConfig::from_cfl(&mesh, 0.99, sigma).unwrap();
            let next = step_full_conservative(&state, &cfg, &st, &basis).unwrap();
            assert!(max_abs(&(&next.v - &v)) < 1e-14);
            assert!((&next.b - &state.b).amax() < 1e-14);
            let adv = step_full_advection(&state, &cfg, &st, &basis).unwrap();
            assert!(max_abs(&(&adv.v - &v)) < 1e-14);
        }
    }

    #[test]
    fn forms_coincide_for_constant_energy() {
        let (mesh, st, basis) = setup(12, 6);
        let v = DMatrix::from_fn(12, 6, |j, k| 1.0 + 0.3 * ((j + k) as f64).cos());
        let state = MomentField::new(v, DVector::from_element(12, 1.7)).unwrap();
        let cfg = SolverConfig::from_cfl(&mesh, 0.8, 0.0).unwrap();
        let a = step_full_conservative(&state, &cfg, &st, &basis).unwrap();
        let b = step_full_advection(&state, &cfg, &st, &basis).unwrap();
        assert!(max_abs(&(a.v - b.v)) < 1e-13);
    }

    #[test]
    fn rejects_nonpositive_energy() {
        let b = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert!(matches!(
            MomentField::new(DMatrix::zeros(3, 2), b),
            Err(Error::NonPositiveEnergy { cell: 1, .. })
        ));
    }
}
