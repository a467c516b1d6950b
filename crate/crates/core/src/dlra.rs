//! Rank-adaptive low-rank stepper for the conservative multiplicative scheme.
//!
//! One step takes `v0 = X S V^T` and `B0` to the next time level:
//!
//! 1. K- and L-steps (independent of each other) give `K*` and `L*`.
//! 2. The spatial basis is augmented to `[K*, X0]` and then with
//!    `(1/B0) Dx(B0 X0)`; the directional basis to `[L*, V0]` and then with
//!    `A^T V0`. These extra directions make the Galerkin projections of the
//!    transport terms exact, which the energy argument needs.
//! 3. A Galerkin S-step in the augmented bases.
//! 4. The zeroth moment and `B` are updated together, cell by cell, using the
//!    unprojected explicit part, exactly as the full scheme does.
//! 5. The factor `B1/B0` is divided out of the spatial factor, the bases are
//!    augmented with the new zeroth moment and `e_1`, and the coefficient
//!    matrix is rebuilt so the zeroth moment column is exactly the one from
//!    step 4.
//! 6. Conservative truncation: the zeroth-moment column is kept aside and only
//!    the remaining columns are compressed by SVD.
//!
//! Augmented bases never exceed the ambient dimension; once `3r` exceeds
//! `Nx` (or `Nmu`) the basis simply spans the whole space.

use nalgebra::{DMatrix, DVector};

use crate::angular::AngularBasis;
use crate::error::{Error, Result};
use crate::full::{check_positive, solve_coupled_cell_at, MomentField, SolverConfig};
use crate::linalg::{
    hcat, orthonormal_basis, orthonormality_defect, qr_any, scale_rows, svd,
    DenseMatrix,
};
use crate::mesh::{Stencil, StencilSet};

/// Deviation from orthonormality above which bases are re-orthonormalized.
pub const REORTHONORMALIZE_ABOVE: f64 = 1e-10;

/// `v = X S V^T` with orthonormal `X` (`Nx x r`) and `V` (`Nmu x r`), plus
/// the internal energy `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankState {
    pub x: DenseMatrix,
    pub s: DenseMatrix,
    pub v: DenseMatrix,
    pub b: DVector<f64>,
}

impl LowRankState {
    pub fn new(x: DenseMatrix, s: DenseMatrix, v: DenseMatrix, b: DVector<f64>) -> Result<Self> {
        let r = s.nrows();
        if s.ncols() != r || x.ncols() != r || v.ncols() != r {
            return Err(Error::dims(
                "LowRankState::new",
                format!(
                    "X is {}x{}, S is {}x{}, V is {}x{}",
                    x.nrows(),
                    x.ncols(),
                    s.nrows(),
                    s.ncols(),
                    v.nrows(),
                    v.ncols()
                ),
            ));
        }
        if r == 0 || r > x.nrows().min(v.nrows()) {
            return Err(Error::InvalidParameter(format!(
                "rank {r} outside [1, {}]",
                x.nrows().min(v.nrows())
            )));
        }
        if b.len() != x.nrows() {
            return Err(Error::dims("LowRankState::new", "B length differs from X rows"));
        }
        check_positive(&b)?;
        let mut state = LowRankState { x, s, v, b };
        state.reorthonormalize_if_needed();
        Ok(state)
    }

    /// Best rank-`rank` approximation of a full field (truncated SVD).
    pub fn from_full(field: &MomentField, rank: usize) -> Result<Self> {
        let dec = svd(&field.v)?;
        let r = rank.clamp(1, dec.singular_values.len());
        LowRankState::new(
            dec.u.columns(0, r).into_owned(),
            DMatrix::from_diagonal(&dec.singular_values.rows(0, r).into_owned()),
            dec.w.columns(0, r).into_owned(),
            field.b.clone(),
        )
    }

    /// Rank-one state `x y^T` padded with zero singular directions up to
    /// `rank`; the padding directions come from Householder completion.
    pub fn rank_one_padded(
        x: &DVector<f64>,
        y: &DVector<f64>,
        rank: usize,
        b: DVector<f64>,
    ) -> Result<Self> {
        let r = rank.clamp(1, x.len().min(y.len()));
        let pad = |u: &DVector<f64>| {
            let mut m = DMatrix::zeros(u.len(), r);
            m.set_column(0, u);
            qr_any(&m)
        };
        let (qx, rx) = pad(x);
        let (qy, ry) = pad(y);
        let mut s = DMatrix::zeros(r, r);
        s[(0, 0)] = rx[(0, 0)] * ry[(0, 0)];
        LowRankState::new(qx, s, qy, b)
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_cells(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_moments(&self) -> usize {
        self.v.nrows()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        &self.x * &self.s * self.v.transpose()
    }

    pub fn to_full(&self) -> MomentField {
        MomentField {
            v: self.reconstruct(),
            b: self.b.clone(),
        }
    }

    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.x).max(orthonormality_defect(&self.v))
    }

    pub fn reorthonormalize_if_needed(&mut self) {
        if orthonormality_defect(&self.x) > REORTHONORMALIZE_ABOVE {
            let (q, r) = qr_any(&self.x);
            self.x = q;
            self.s = r * &self.s;
        }
        if orthonormality_defect(&self.v) > REORTHONORMALIZE_ABOVE {
            let (q, r) = qr_any(&self.v);
            self.v = q;
            self.s = &self.s * r.transpose();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.s.iter())
            .chain(self.v.iter())
            .chain(self.b.iter())
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceMode {
    /// `theta` is multiplied by the 2-norm of the singular value vector.
    RelativeToSigmaNorm,
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig {
    pub tolerance_mode: ToleranceMode,
    pub theta: f64,
    pub r_max: usize,
    /// Keep the zeroth moment out of the SVD truncation.
    pub conservative: bool,
}

impl TruncationConfig {
    pub fn relative(theta: f64, r_max: usize) -> Self {
        TruncationConfig {
            tolerance_mode: ToleranceMode::RelativeToSigmaNorm,
            theta,
            r_max,
            conservative: true,
        }
    }

    /// Default rank cap, `min(Nx, Nmu) / 2` but at least one.
    pub fn default_r_max(n_cells: usize, n_moments: usize) -> usize {
        (n_cells.min(n_moments) / 2).max(1)
    }

    fn absolute_tolerance(&self, singular_values: &DVector<f64>) -> f64 {
        match self.tolerance_mode {
            ToleranceMode::Absolute => self.theta,
            ToleranceMode::RelativeToSigmaNorm => self.theta * singular_values.norm(),
        }
    }
}

/// Smallest `r` with `(sum_{j >= r} s_j^2)^(1/2) <= tol` (at least one when
/// there is anything to keep).
fn rank_for_tolerance(singular_values: &DVector<f64>, tol: f64) -> usize {
    let n = singular_values.len();
    let mut tail = 0.0;
    let mut r = n;
    while r > 0 {
        let next = tail + singular_values[r - 1] * singular_values[r - 1];
        if next.sqrt() > tol {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.max(n.min(1))
}

/// `-(1/B) Dx(B K) P_A + (1/B) Dxx(B K) P_|A|` for a spatial factor `K`
/// (`Nx x q`) and projected flux matrices (`q x q`).
fn projected_transport(
    k: &DenseMatrix,
    b: &DVector<f64>,
    p_flux: &DenseMatrix,
    p_abs: &DenseMatrix,
    stencils: &StencilSet,
) -> DenseMatrix {
    let bk = scale_rows(k, b);
    let dx = stencils.apply_unchecked(Stencil::Dx, &bk);
    let dxx = stencils.apply_unchecked(Stencil::Dxx, &bk);
    let t = dxx * p_abs - dx * p_flux;
    scale_rows(&t, &b.map(|x| 1.0 / x))
}

/// `(1/B) op(B X)`.
fn weighted_derivative(op: Stencil, x: &DenseMatrix, b: &DVector<f64>, stencils: &StencilSet) -> DenseMatrix {
    let d = stencils.apply_unchecked(op, &scale_rows(x, b));
    scale_rows(&d, &b.map(|x| 1.0 / x))
}

/// `(V^T A^T V, V^T |A|^T V)`.
fn projected_flux(v: &DenseMatrix, basis: &AngularBasis) -> (DenseMatrix, DenseMatrix) {
    let av = basis.flux().transpose() * v;
    let absv = basis.flux_abs().transpose() * v;
    (v.transpose() * av, v.transpose() * absv)
}

fn check_inputs(state: &LowRankState, cfg: &SolverConfig, stencils: &StencilSet, basis: &AngularBasis) -> Result<()> {
    if state.n_cells() != stencils.n_cells() {
        return Err(Error::dims("step_dlra", "state and mesh cell counts differ"));
    }
    if state.n_moments() != basis.n_moments() {
        return Err(Error::dims("step_dlra", "state and angular basis moment counts differ"));
    }
    cfg.validate(state.n_cells())?;
    check_positive(&state.b)
}

/// K-step: `K* = W [K0 - dt (1/B)Dx(B K0) V^T A^T V + dt (1/B)Dxx(B K0) V^T |A|^T V]`
/// with `K0 = X S` and `W = diag(1 / (1 + sigma dt))`.
pub fn k_step(
    state: &LowRankState,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<DenseMatrix> {
    check_inputs(state, cfg, stencils, basis)?;
    let k0 = &state.x * &state.s;
    let (p_flux, p_abs) = projected_flux(&state.v, basis);
    let t = projected_transport(&k0, &state.b, &p_flux, &p_abs, stencils);
    let k = k0 + t * cfg.dt;
    Ok(scale_rows(&k, &cfg.implicit_weights(state.n_cells())))
}

/// L-step: the explicit part tested against the fixed spatial basis,
/// `L* = E^T W X0` with `E` evaluated at `X0 L0^T`, `L0 = V S^T`.
///
/// With `Gx = (1/B)Dx(B X0)` and `Gxx = (1/B)Dxx(B X0)` this is
/// `L0 (X0^T W X0) - dt A L0 (Gx^T W X0) + dt |A| L0 (Gxx^T W X0)`.
pub fn l_step(
    state: &LowRankState,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<DenseMatrix> {
    check_inputs(state, cfg, stencils, basis)?;
    let x0 = &state.x;
    let l0 = &state.v * state.s.transpose();
    let y = scale_rows(x0, &cfg.implicit_weights(state.n_cells()));
    let gx = weighted_derivative(Stencil::Dx, x0, &state.b, stencils);
    let gxx = weighted_derivative(Stencil::Dxx, x0, &state.b, stencils);
    let mut l = &l0 * (x0.transpose() * &y);
    l -= basis.flux() * (&l0 * (gx.transpose() * &y)) * cfg.dt;
    l += basis.flux_abs() * (&l0 * (gxx.transpose() * &y)) * cfg.dt;
    Ok(l)
}

/// Bases after both augmentation stages, and the overlaps with the old
/// bases.
#[derive(Debug, Clone)]
pub struct AugmentedBases {
    /// `Nx x min(Nx, 3r)`
    pub x_hh: DenseMatrix,
    /// `Nmu x min(Nmu, 3r)`
    pub v_hh: DenseMatrix,
    /// `X_hh^T X0`
    pub m_hh: DenseMatrix,
    /// `V_hh^T V0`
    pub n_hh: DenseMatrix,
}

pub fn augment_bases(
    state: &LowRankState,
    k_star: &DenseMatrix,
    l_star: &DenseMatrix,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<AugmentedBases> {
    if k_star.shape() != state.x.shape() || l_star.shape() != state.v.shape() {
        return Err(Error::dims("augment_bases", "K*/L* shapes differ from X0/V0"));
    }
    let x0 = &state.x;
    let v0 = &state.v;
    let x_h = orthonormal_basis(&hcat(&[k_star, x0]));
    let gx = weighted_derivative(Stencil::Dx, x0, &state.b, stencils);
    let x_hh = orthonormal_basis(&hcat(&[&x_h, &gx]));

    let v_h = orthonormal_basis(&hcat(&[l_star, v0]));
    let av0 = basis.flux().transpose() * v0;
    let v_hh = orthonormal_basis(&hcat(&[&v_h, &av0]));

    let m_hh = x_hh.transpose() * x0;
    let n_hh = v_hh.transpose() * v0;
    Ok(AugmentedBases {
        x_hh,
        v_hh,
        m_hh,
        n_hh,
    })
}

/// Galerkin step in the augmented bases, starting from
/// `S~0 = M_hh S0 N_hh^T`: `S* = (W X_hh)^T E(X_hh S~0) `, where `E` is the
/// explicit operator restricted to the directional basis `V_hh`.
pub fn s_step(
    s_tilde: &DenseMatrix,
    x_hh: &DenseMatrix,
    v_hh: &DenseMatrix,
    b0: &DVector<f64>,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<DenseMatrix> {
    if s_tilde.nrows() != x_hh.ncols() || s_tilde.ncols() != v_hh.ncols() {
        return Err(Error::dims("s_step", "S~0 does not match augmented bases"));
    }
    let k = x_hh * s_tilde;
    let (p_flux, p_abs) = projected_flux(v_hh, basis);
    let t = projected_transport(&k, b0, &p_flux, &p_abs, stencils);
    let e = k + t * cfg.dt;
    let wx = scale_rows(x_hh, &cfg.implicit_weights(x_hh.nrows()));
    Ok(wx.transpose() * e)
}

/// Updates `B` and the zeroth moment together. The explicit part uses the
/// unprojected transport of `X_hh S~0 V_hh^T` (which equals `v0`), so this
/// is the same per-cell solve as in the full scheme.
#[allow(clippy::too_many_arguments)]
pub fn coupled_update_k0(
    state: &LowRankState,
    s_tilde: &DenseMatrix,
    x_hh: &DenseMatrix,
    v_hh: &DenseMatrix,
    cfg: &SolverConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = state.n_cells();
    let b0 = &state.b;
    let kt = x_hh * s_tilde;
    // v0 A_{0.}^T and v0 |A|_{0.}^T through the augmented factors.
    let z_flux = &kt * (v_hh.transpose() * basis.flux_row(0));
    let z_abs = &kt * (v_hh.transpose() * basis.flux_abs_row(0));
    let first = &state.x * (&state.s * state.v.row(0).transpose());

    let dx = stencils.apply_vec(Stencil::Dx, &z_flux.component_mul(b0));
    let dxx = stencils.apply_vec(Stencil::Dxx, &z_abs.component_mul(b0));
    let mut b1 = DVector::zeros(n);
    let mut v0_1 = DVector::zeros(n);
    for j in 0..n {
        let sigma = cfg.sigma.at(j);
        let explicit = (first[j] + cfg.dt * (dxx[j] - dx[j]) / b0[j]) / (1.0 + sigma * cfg.dt);
        let (w, y) = solve_coupled_cell_at(j, explicit, sigma, cfg.dt, cfg.source_term(j, b0[j]))?;
        b1[j] = w * b0[j];
        v0_1[j] = y;
    }
    Ok((b1, v0_1))
}

/// Factors of the rank-`(3r+1)` intermediate state.
#[derive(Debug, Clone)]
pub struct AugmentedFactors {
    pub x: DenseMatrix,
    pub s: DenseMatrix,
    pub v: DenseMatrix,
}

impl AugmentedFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        &self.x * &self.s * self.v.transpose()
    }
}

/// Divides `B1/B0` out of `K* = X_hh S*`, then adds `v0_1` to the spatial
/// basis and `e_1` to the directional basis and assembles the coefficient
/// matrix whose zeroth-moment column is exactly `v0_1`.
pub fn transform_and_augment(
    k_star_3r: &DenseMatrix,
    b0: &DVector<f64>,
    b1: &DVector<f64>,
    v0_1: &DVector<f64>,
    v_hh: &DenseMatrix,
) -> Result<AugmentedFactors> {
    check_positive(b1)?;
    if k_star_3r.ncols() != v_hh.ncols() || k_star_3r.nrows() != b0.len() || v0_1.len() != b0.len() {
        return Err(Error::dims("transform_and_augment", "factor shapes disagree"));
    }
    let ratio = b0.component_div(b1);
    let k_trans = scale_rows(k_star_3r, &ratio);
    let (x_trans, s_trans) = qr_any(&k_trans);

    let v0_col = DMatrix::from_column_slice(v0_1.len(), 1, v0_1.as_slice());
    let x1 = orthonormal_basis(&hcat(&[&v0_col, &x_trans]));
    let mut e1 = DMatrix::zeros(v_hh.nrows(), 1);
    e1[(0, 0)] = 1.0;
    let v1 = orthonormal_basis(&hcat(&[&e1, v_hh]));

    // V_hh^T (I - e1 e1^T) V1
    let proj = v_hh.transpose() * &v1 - v_hh.row(0).transpose() * v1.row(0);
    let s1 = x1.transpose() * &x_trans * s_trans * proj + (x1.transpose() * v0_1) * v1.row(0);
    Ok(AugmentedFactors { x: x1, s: s1, v: v1 })
}

/// Truncates the augmented factors back to a compact state. In conservative
/// mode the first directional column (the zeroth moment) is excluded from
/// the SVD so the zeroth moment is carried over unchanged.
pub fn truncate_conservative(
    factors: &AugmentedFactors,
    b1: DVector<f64>,
    tc: &TruncationConfig,
) -> Result<LowRankState> {
    if !(tc.theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be nonnegative", tc.theta)));
    }
    if tc.r_max == 0 {
        return Err(Error::InvalidParameter("r_max must be at least 1".into()));
    }
    if tc.conservative {
        truncate_keep_zeroth(factors, b1, tc)
    } else {
        truncate_plain(factors, b1, tc)
    }
}

fn truncate_plain(factors: &AugmentedFactors, b1: DVector<f64>, tc: &TruncationConfig) -> Result<LowRankState> {
    let dec = svd(&factors.s)?;
    let tol = tc.absolute_tolerance(&dec.singular_values);
    let mut r = rank_for_tolerance(&dec.singular_values, tol);
    if r > tc.r_max {
        log::warn!("truncation rank {r} clamped to r_max = {}", tc.r_max);
        r = tc.r_max;
    }
    LowRankState::new(
        &factors.x * dec.u.columns(0, r),
        DMatrix::from_diagonal(&dec.singular_values.rows(0, r).into_owned()),
        &factors.v * dec.w.columns(0, r),
        b1,
    )
}

fn truncate_keep_zeroth(factors: &AugmentedFactors, b1: DVector<f64>, tc: &TruncationConfig) -> Result<LowRankState> {
    let n_mu = factors.v.nrows();
    let q = factors.v.ncols();
    let k = &factors.x * &factors.s;

    // Conserved column.
    let k_cons = k.column(0).into_owned();
    let s_cons = k_cons.norm();
    let x_cons = if s_cons > 0.0 {
        DMatrix::from_column_slice(k_cons.len(), 1, (k_cons / s_cons).as_slice())
    } else {
        orthonormal_basis(&DMatrix::zeros(k.nrows(), 1))
    };

    // Remainder, compressed by SVD.
    let k_rem = k.columns(1, q - 1).into_owned();
    let v_rem_full = factors.v.columns(1, q - 1).into_owned();
    let (x_rem_basis, s_rem) = qr_any(&k_rem);
    let dec = svd(&s_rem)?;
    let tol = tc.absolute_tolerance(&dec.singular_values);
    let mut r1 = rank_for_tolerance(&dec.singular_values, tol);
    // At or above the ambient dimension the cap cannot bind: the stacked
    // factors are compressed exactly below.
    let cap = if tc.r_max >= k.nrows().min(n_mu) {
        usize::MAX
    } else {
        tc.r_max.saturating_sub(1)
    };
    if r1 > cap {
        log::warn!("truncation rank {} clamped to r_max = {}", r1 + 1, tc.r_max);
        r1 = cap;
    }
    let x_rem = &x_rem_basis * dec.u.columns(0, r1);
    let v_rem = &v_rem_full * dec.w.columns(0, r1);

    let mut e1 = DMatrix::zeros(n_mu, 1);
    e1[(0, 0)] = 1.0;
    let (x_new, r_x) = qr_any(&hcat(&[&x_cons, &x_rem]));
    let (v_new, r_v) = qr_any(&hcat(&[&e1, &v_rem]));
    let mut core = DMatrix::zeros(r1 + 1, r1 + 1);
    core[(0, 0)] = s_cons;
    for i in 0..r1 {
        core[(i + 1, i + 1)] = dec.singular_values[i];
    }
    let s_new = r_x * core * r_v.transpose();

    if s_new.nrows() == s_new.ncols() {
        return LowRankState::new(x_new, s_new, v_new, b1);
    }
    // The stacked spatial factor had more columns than cells; compress the
    // rectangular core exactly so the state keeps a square coefficient
    // matrix.
    let sq = svd(&s_new)?;
    LowRankState::new(
        &x_new * &sq.u,
        DMatrix::from_diagonal(&sq.singular_values),
        &v_new * &sq.w,
        b1,
    )
}

#[cfg(feature = "parallel")]
fn join<A, B>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B)
where
    A: Send,
    B: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

/// One full low-rank step.
pub fn step_dlra(
    state: &LowRankState,
    cfg: &SolverConfig,
    tc: &TruncationConfig,
    stencils: &StencilSet,
    basis: &AngularBasis,
) -> Result<LowRankState> {
    check_inputs(state, cfg, stencils, basis)?;
    if !cfg.satisfies_cfl(stencils) {
        log::warn!(
            "dt = {} exceeds dx = {}; energy stability is not guaranteed",
            cfg.dt,
            stencils.dx()
        );
    }
    let mut state = state.clone();
    state.reorthonormalize_if_needed();

    let (k_star, l_star) = join(
        || k_step(&state, cfg, stencils, basis),
        || l_step(&state, cfg, stencils, basis),
    );
    let k_star = k_star.map_err(|e| e.in_stage("k_step"))?;
    let l_star = l_star.map_err(|e| e.in_stage("l_step"))?;

    let aug = augment_bases(&state, &k_star, &l_star, stencils, basis)
        .map_err(|e| e.in_stage("augment_bases"))?;
    let s_tilde = &aug.m_hh * &state.s * aug.n_hh.transpose();
    let s_star = s_step(&s_tilde, &aug.x_hh, &aug.v_hh, &state.b, cfg, stencils, basis)
        .map_err(|e| e.in_stage("s_step"))?;
    let (b1, v0_1) = coupled_update_k0(&state, &s_tilde, &aug.x_hh, &aug.v_hh, cfg, stencils, basis)
        .map_err(|e| e.in_stage("coupled_update_k0"))?;
    let k_star_3r = &aug.x_hh * s_star;
    let factors = transform_and_augment(&k_star_3r, &state.b, &b1, &v0_1, &aug.v_hh)
        .map_err(|e| e.in_stage("transform_and_augment"))?;
    let next = truncate_conservative(&factors, b1, tc).map_err(|e| e.in_stage("truncate"))?;
    if !next.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            stage: "step_dlra",
        });
    }
    Ok(next)
}
