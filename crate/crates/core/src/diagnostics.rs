//! Observables of a moment state: energy, mass, momentum, scalar flux,
//! temperature and the residual of the discrete local mass balance.
//!
//! Everything except [`evaluate_distribution`] works on a low-rank state
//! without forming the `Nx x Nmu` moment matrix.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::SQRT_2;

use crate::angular::{evaluate_legendre, AngularBasis};
use crate::dlra::LowRankState;
use crate::error::{Error, Result};
use crate::full::MomentField;
use crate::linalg::{scale_rows, DenseMatrix};
use crate::mesh::{Stencil, StencilSet};

/// Read access to a moment state, full or factored.
pub trait MomentState {
    fn n_cells(&self) -> usize;
    fn n_moments(&self) -> usize;
    fn internal_energy(&self) -> &DVector<f64>;
    /// `v w`, a combination of the moment columns.
    fn contract_moments(&self, w: &DVector<f64>) -> DVector<f64>;
    /// `|| diag(B) v ||_F^2`
    fn weighted_norm_squared(&self) -> f64;
    fn moments(&self) -> DenseMatrix;
    fn rank(&self) -> usize;

    fn zeroth_moment(&self) -> DVector<f64> {
        let mut e1 = DVector::zeros(self.n_moments());
        e1[0] = 1.0;
        self.contract_moments(&e1)
    }
}

impl MomentState for MomentField {
    fn n_cells(&self) -> usize {
        self.v.nrows()
    }

    fn n_moments(&self) -> usize {
        self.v.ncols()
    }

    fn internal_energy(&self) -> &DVector<f64> {
        &self.b
    }

    fn contract_moments(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.v * w
    }

    fn weighted_norm_squared(&self) -> f64 {
        scale_rows(&self.v, &self.b).norm_squared()
    }

    fn moments(&self) -> DenseMatrix {
        self.v.clone()
    }

    fn rank(&self) -> usize {
        self.v.nrows().min(self.v.ncols())
    }

    fn zeroth_moment(&self) -> DVector<f64> {
        self.v.column(0).into_owned()
    }
}

impl MomentState for LowRankState {
    fn n_cells(&self) -> usize {
        self.x.nrows()
    }

    fn n_moments(&self) -> usize {
        self.v.nrows()
    }

    fn internal_energy(&self) -> &DVector<f64> {
        &self.b
    }

    fn contract_moments(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.x * (&self.s * (self.v.transpose() * w))
    }

    fn weighted_norm_squared(&self) -> f64 {
        // V has orthonormal columns, so it drops out of the norm.
        (scale_rows(&self.x, &self.b) * &self.s).norm_squared()
    }

    fn moments(&self) -> DenseMatrix {
        self.reconstruct()
    }

    fn rank(&self) -> usize {
        self.s.nrows()
    }
}

/// `E = 1/2 ||diag(B) v||_F^2 + 1/2 ||B||^2`.
pub fn total_energy(state: &impl MomentState) -> f64 {
    0.5 * state.weighted_norm_squared() + 0.5 * state.internal_energy().norm_squared()
}

/// Cell densities `rho_j = sqrt(2) B_j v_j0 + B_j`.
pub fn mass_density(v0: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    v0.zip_map(b, |v, b| SQRT_2 * b * v + b)
}

/// `m = dx * sum_j (sqrt(2) B_j v_j0 + B_j)`.
pub fn total_mass(v0: &DVector<f64>, b: &DVector<f64>, dx: f64) -> f64 {
    dx * mass_density(v0, b).sum()
}

pub fn state_mass(state: &impl MomentState, dx: f64) -> f64 {
    total_mass(&state.zeroth_moment(), state.internal_energy(), dx)
}

/// `u_j = sqrt(2) B_j sum_l v_jl A_0l`.
pub fn momentum(state: &impl MomentState, basis: &AngularBasis) -> DVector<f64> {
    let z = state.contract_moments(&basis.flux_row(0));
    z.component_mul(state.internal_energy()) * SQRT_2
}

/// `Phi = <f>_mu / sqrt(2) = B v_0`.
pub fn scalar_flux(state: &impl MomentState) -> DVector<f64> {
    state.zeroth_moment().component_mul(state.internal_energy())
}

/// `T = B^(1/4)`.
pub fn temperature(b: &DVector<f64>) -> DVector<f64> {
    b.map(|x| x.powf(0.25))
}

/// Residual of the discrete balance law
///
/// `(rho^1 - rho^0)/dt + sqrt(2) Dx(B^0 v^0 a_0) - sqrt(2) Dxx(B^0 v^0 |a|_0) - 2 Q`
///
/// per cell, where `a_0` and `|a|_0` are the first rows of `A` and `|A|`.
/// Both conservative solvers satisfy it to rounding.
pub fn local_conservation_residual(
    before: &impl MomentState,
    after: &impl MomentState,
    dt: f64,
    source: Option<&DVector<f64>>,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<DVector<f64>> {
    Ok(conservation_balance(before, after, dt, source, stencils, basis)?.residual)
}

/// Residual together with the magnitude of the terms it balances.
#[derive(Debug, Clone)]
pub struct ConservationBalance {
    pub residual: DVector<f64>,
    /// Largest of the individual terms, for relative comparisons.
    pub scale: f64,
}

impl ConservationBalance {
    pub fn max_relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual.amax() / self.scale
        } else {
            self.residual.amax()
        }
    }
}

pub fn conservation_balance(
    before: &impl MomentState,
    after: &impl MomentState,
    dt: f64,
    source: Option<&DVector<f64>>,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<ConservationBalance> {
    let n = before.n_cells();
    if after.n_cells() != n || stencils.n_cells() != n || before.n_moments() != basis.n_moments() {
        return Err(Error::dims("local_conservation_residual", "states, mesh and basis disagree"));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let b0 = before.internal_energy();
    let rho0 = mass_density(&before.zeroth_moment(), b0);
    let rho1 = mass_density(&after.zeroth_moment(), after.internal_energy());
    let flux = before.contract_moments(&basis.flux_row(0)).component_mul(b0);
    let flux_abs = before.contract_moments(&basis.flux_abs_row(0)).component_mul(b0);
    let dx_term = stencils.apply_vec(Stencil::Dx, &flux) * SQRT_2;
    let dxx_term = stencils.apply_vec(Stencil::Dxx, &flux_abs) * SQRT_2;
    let rate = (&rho1 - &rho0) / dt;
    let mut residual = &rate + &dx_term - &dxx_term;
    let mut scale = rho0.amax().max(rho1.amax()) / dt + dx_term.amax() + dxx_term.amax();
    if let Some(q) = source {
        residual -= q * 2.0;
        scale += 2.0 * q.amax();
    }
    Ok(ConservationBalance { residual, scale })
}

/// `f(x_j, mu) = B_j sum_l v_jl P_l(mu)` on the given directions.
pub fn evaluate_distribution(
    state: &impl MomentState,
    basis: &AngularBasis,
    mu_points: &[f64],
) -> Result<DenseMatrix> {
    let p = evaluate_legendre(basis.n_moments(), mu_points)?;
    let v = state.moments();
    Ok(scale_rows(&(v * p.transpose()), state.internal_energy()))
}

/// `n` midpoints of a uniform partition of `[-1, 1]`.
pub fn uniform_mu_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + (2.0 * i as f64 + 1.0) / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub rank: usize,
    pub max_conservation_residual: f64,
    pub min_b: f64,
}

impl DiagnosticsRecord {
    pub fn capture(
        step: usize,
        t: f64,
        state: &impl MomentState,
        dx: f64,
        max_conservation_residual: f64,
    ) -> Self {
        DiagnosticsRecord {
            step,
            t,
            energy: total_energy(state),
            mass: state_mass(state, dx),
            rank: state.rank(),
            max_conservation_residual,
            min_b: state.internal_energy().min(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.energy.is_finite()
            && self.mass.is_finite()
            && self.max_conservation_residual.is_finite()
            && self.min_b > 0.0
    }
}

/// Relative L2 difference `||a - b|| / ||b||`.
pub fn relative_l2(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let denom = b.norm();
    if denom > 0.0 {
        (a - b).norm() / denom
    } else {
        (a - b).norm()
    }
}

/// Moment field with a single nonzero moment `l` equal to `value` in
/// every cell; handy for checks.
pub fn single_moment_field(n_cells: usize, n_moments: usize, l: usize, value: f64, b: f64) -> Result<MomentField> {
    let mut v = DMatrix::zeros(n_cells, n_moments);
    v.column_mut(l).fill(value);
    MomentField::new(v, DVector::from_element(n_cells, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlra::{step_dlra, TruncationConfig};
    use crate::full::{step_full_conservative, SolverConfig};
    use crate::mesh::SpatialMesh;
    use crate::quadrature::gauss_legendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, m: usize, seed: u64) -> MomentField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DMatrix::from_fn(n, m, |_, k| rng.random_range(-1.0..1.0) / (1.0 + k as f64) + if k == 0 { 2.0 } else { 0.0 });
        let b = DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
        MomentField::new(v, b).unwrap()
    }

    #[test]
    fn energy_examples() {
        let f = single_moment_field(1, 1, 0, SQRT_2, 1.0).unwrap();
        assert!((total_energy(&f) - 1.5).abs() < 1e-15);
        let r = random_field(7, 5, 1);
        let mut oracle = 0.0;
        for j in 0..7 {
            for k in 0..5 {
                oracle += 0.5 * (r.b[j] * r.v[(j, k)]).powi(2);
            }
            oracle += 0.5 * r.b[j] * r.b[j];
        }
        assert!((total_energy(&r) - oracle).abs() < 1e-13 * oracle);
        let low = LowRankState::from_full(&r, 5).unwrap();
        assert!((total_energy(&low) - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn mass_examples() {
        let b = DVector::from_element(10, 1.0);
        assert!((total_mass(&DVector::zeros(10), &b, 2.0) - 20.0).abs() < 1e-14);
        assert!((total_mass(&DVector::from_element(10, SQRT_2), &b, 1.0) - 30.0).abs() < 1e-13);
    }

    #[test]
    fn momentum_examples() {
        let basis = AngularBasis::new(4).unwrap();
        let iso = single_moment_field(5, 4, 0, 1.3, 2.0).unwrap();
        assert!(momentum(&iso, &basis).iter().all(|&u| u == 0.0));
        let odd = single_moment_field(5, 4, 1, 0.7, 2.0).unwrap();
        let expected = SQRT_2 * 2.0 * 0.7 / 3f64.sqrt();
        assert!(momentum(&odd, &basis).iter().all(|u| (u - expected).abs() < 1e-15));
        let r = random_field(6, 4, 2);
        let u = momentum(&r, &basis);
        for j in 0..6 {
            let oracle: f64 = (0..4).map(|l| SQRT_2 * r.b[j] * r.v[(j, l)] * basis.flux()[(0, l)]).sum();
            assert!((u[j] - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_flux_and_temperature() {
        // g = 1 has v_0 = sqrt(2).
        let f = single_moment_field(3, 2, 0, SQRT_2, 1.0).unwrap();
        assert!(scalar_flux(&f).iter().all(|p| (p - SQRT_2).abs() < 1e-15));
        let z = single_moment_field(3, 2, 1, 1.0, 1.0).unwrap();
        assert!(scalar_flux(&z).iter().all(|&p| p == 0.0));
        let t = temperature(&DVector::from_vec(vec![1.0, 16.0, 50.0]));
        assert_eq!(t[0], 1.0);
        assert!((t[1] - 2.0).abs() < 1e-15);
        assert!((t[2] - 2.659_147_948_472_494_6).abs() < 1e-12);
    }

    #[test]
    fn scalar_flux_matches_quadrature() {
        let r = random_field(5, 12, 3);
        let basis = AngularBasis::new(12).unwrap();
        let (x, w) = gauss_legendre(128);
        let f = evaluate_distribution(&r, &basis, x.as_slice()).unwrap();
        let phi = scalar_flux(&r);
        for j in 0..5 {
            let integral: f64 = (0..128).map(|i| w[i] * f[(j, i)]).sum();
            assert!((integral / SQRT_2 - phi[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn distribution_examples() {
        let basis = AngularBasis::new(3).unwrap();
        let one = single_moment_field(4, 3, 0, SQRT_2, 2.5).unwrap();
        let f = evaluate_distribution(&one, &basis, &[-0.9, 0.0, 0.4]).unwrap();
        assert!(f.iter().all(|x| (x - 2.5).abs() < 1e-14));
        let lin = single_moment_field(4, 3, 1, 1.0, 1.0).unwrap();
        let f = evaluate_distribution(&lin, &basis, &[-0.5, 0.5, 1.0]).unwrap();
        let c = (1.5f64).sqrt();
        assert!((f[(0, 0)] + 0.5 * c).abs() < 1e-14);
        assert!((f[(0, 2)] - c).abs() < 1e-14);
    }

    #[test]
    fn residual_vanishes_for_equilibrium() {
        let mesh = SpatialMesh::new(12, 0.0, 1.0).unwrap();
        let st = StencilSet::new(&mesh);
        let basis = AngularBasis::new(4).unwrap();
        let eq = single_moment_field(12, 4, 0, SQRT_2, 1.0).unwrap();
        let r = local_conservation_residual(&eq, &eq, 0.01, None, &st, &basis).unwrap();
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn solvers_satisfy_local_balance() {
        let mesh = SpatialMesh::new(16, -1.0, 1.0).unwrap();
        let st = StencilSet::new(&mesh);
        let basis = AngularBasis::new(6).unwrap();
        let mut cfg = SolverConfig::from_cfl(&mesh, 0.99, 0.8).unwrap();
        for with_source in [false, true] {
            cfg.source = with_source.then(|| DVector::from_fn(16, |j, _| if j % 3 == 0 { 1.5 } else { 0.0 }));
            let f0 = random_field(16, 6, 4);
            let f1 = step_full_conservative(&f0, &cfg, &st, &basis).unwrap();
            let bal = conservation_balance(&f0, &f1, cfg.dt, cfg.source.as_ref(), &st, &basis).unwrap();
            assert!(bal.max_relative() < 1e-13, "full {}", bal.max_relative());

            let l0 = LowRankState::from_full(&f0, 3).unwrap();
            let l1 = step_dlra(&l0, &cfg, &TruncationConfig::relative(0.1, 6), &st, &basis).unwrap();
            let bal = conservation_balance(&l0, &l1, cfg.dt, cfg.source.as_ref(), &st, &basis).unwrap();
            assert!(bal.max_relative() < 1e-13, "dlra {}", bal.max_relative());
        }
    }

    #[test]
    fn residual_telescopes_to_mass_change() {
        let mesh = SpatialMesh::new(10, 0.0, 2.0).unwrap();
        let st = StencilSet::new(&mesh);
        let basis = AngularBasis::new(5).unwrap();
        let f0 = random_field(10, 5, 6);
        let f1 = random_field(10, 5, 7);
        let dt = 0.05;
        let r = local_conservation_residual(&f0, &f1, dt, None, &st, &basis).unwrap();
        let rate = (state_mass(&f1, mesh.dx()) - state_mass(&f0, mesh.dx())) / dt;
        assert!((r.sum() * mesh.dx() - rate).abs() < 1e-12 * rate.abs().max(1.0));
    }

    #[test]
    fn mu_grid_is_symmetric() {
        let g = uniform_mu_grid(64);
        assert_eq!(g.len(), 64);
        assert!((g[0] + g[63]).abs() < 1e-15);
        assert!(g[0] > -1.0 && g[63] < 1.0);
    }
}
