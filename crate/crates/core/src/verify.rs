//! Acceptance checks. Each criterion builds its own inputs from fixed seeds,
//! runs the solvers and compares against an independent evaluation or a
//! threshold. Results are reports, never panics.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angular::{build_abs_matrices, build_flux_matrix, AngularBasis};
use crate::diagnostics::{relative_l2, total_energy, MomentState};
use crate::dlra::{k_step, l_step, s_step, step_dlra, LowRankState, ToleranceMode, TruncationConfig};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, simulate, ExperimentConfig, Problem, SolverKind};
use crate::full::{step_full_advection, step_full_conservative, MomentField, SolverConfig};
use crate::linalg::{orthonormal_basis, DenseMatrix};
use crate::mesh::{SpatialMesh, Stencil, StencilSet};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Full-scale runs, minutes rather than seconds.
    pub slow: bool,
    check: fn() -> Result<(bool, String)>,
}

impl Criterion {
    pub fn run(&self) -> CriterionReport {
        let start = Instant::now();
        let (passed, detail) = match (self.check)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionReport {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed: start.elapsed(),
        }
    }
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "stencil identities", slow: false, check: stencil_identities },
    Criterion { id: 2, name: "flux matrix oracle", slow: false, check: flux_matrix_oracle },
    Criterion { id: 3, name: "full energy stability", slow: false, check: full_energy_stability },
    Criterion { id: 4, name: "advection instability", slow: false, check: advection_instability },
    Criterion { id: 5, name: "full-rank equivalence", slow: false, check: full_rank_equivalence },
    Criterion { id: 6, name: "dense substep oracles", slow: false, check: dense_substep_oracles },
    Criterion { id: 7, name: "mass conservation", slow: false, check: mass_conservation },
    Criterion { id: 8, name: "low-rank energy stability", slow: false, check: dlra_energy_stability },
    Criterion { id: 9, name: "rank behaviour", slow: true, check: rank_behaviour },
    Criterion { id: 10, name: "scalar flux accuracy", slow: false, check: scalar_flux_accuracy },
    Criterion { id: 11, name: "reproducibility", slow: false, check: reproducibility },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    /// Everything except the full-scale runs.
    Fast,
    Slow,
    Single(u8),
}

impl Suite {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Suite::All),
            "fast" => Ok(Suite::Fast),
            "slow" => Ok(Suite::Slow),
            other => {
                let id = other.trim_start_matches('c').parse::<u8>().ok();
                match id {
                    Some(id) if CRITERIA.iter().any(|c| c.id == id) => Ok(Suite::Single(id)),
                    _ => Err(format!("unknown suite '{s}' (expected all, fast, slow or 1..=11)")),
                }
            }
        }
    }

    pub fn criteria(self) -> impl Iterator<Item = &'static Criterion> {
        CRITERIA.iter().filter(move |c| match self {
            Suite::All => true,
            Suite::Fast => !c.slow,
            Suite::Slow => c.slow,
            Suite::Single(id) => c.id == id,
        })
    }
}

pub fn run_suite(suite: Suite, mut on_report: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    suite
        .criteria()
        .map(|c| {
            let r = c.run();
            on_report(&r);
            r
        })
        .collect()
}

fn verdict(ok: bool, detail: String) -> Result<(bool, String)> {
    Ok((ok, detail))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn max_abs(m: &DenseMatrix) -> f64 {
    m.amax()
}

// ---------------------------------------------------------------- 1

fn stencil_identities() -> Result<(bool, String)> {
    let mut rng = rng(1);
    let mut worst = [0.0f64; 4];
    for nx in 3..=16 {
        let st = StencilSet::new(&SpatialMesh::new(nx, 0.0, 1.0)?);
        for _ in 0..100 {
            let y = random_vector(&mut rng, nx);
            let z = random_vector(&mut rng, nx);
            let dx_z = st.apply_vec(Stencil::Dx, &z);
            let dx_y = st.apply_vec(Stencil::Dx, &y);
            let dxx_z = st.apply_vec(Stencil::Dxx, &z);
            let dxx_y = st.apply_vec(Stencil::Dxx, &y);
            let dplus_z = st.apply_vec(Stencil::Dplus, &z);
            let yz = y.norm() * z.norm();
            let zz = z.norm_squared();
            let errs = [
                (y.dot(&dx_z) + z.dot(&dx_y)).abs() / yz,
                z.dot(&dx_z).abs() / zz,
                (y.dot(&dxx_z) - z.dot(&dxx_y)).abs() / yz,
                (z.dot(&dxx_z) + dplus_z.norm_squared()).abs() / zz,
            ];
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
        }
    }
    let ok = worst.iter().all(|&e| e <= 1e-13);
    verdict(
        ok,
        format!(
            "antisymmetry {:.1e}, null form {:.1e}, symmetry {:.1e}, dissipativity {:.1e} (limit 1e-13)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Orthonormal Legendre polynomials at `mu` by the three-term recurrence.
fn legendre_normalized(n: usize, mu: f64) -> Vec<f64> {
    let mut p = vec![0.0; n];
    let (mut prev, mut cur) = (0.0, 1.0);
    for (l, slot) in p.iter_mut().enumerate() {
        *slot = cur * ((2 * l + 1) as f64 / 2.0).sqrt();
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * mu * cur - lf * prev) / (lf + 1.0);
        prev = cur;
        cur = next;
    }
    p
}

fn flux_matrix_oracle() -> Result<(bool, String)> {
    let (nodes, weights) = gauss_legendre(64);
    let values: Vec<Vec<f64>> = nodes.iter().map(|&mu| legendre_normalized(64, mu)).collect();
    let (mut worst_a, mut worst_sq) = (0.0f64, 0.0f64);
    for n in 1..=64 {
        let a = build_flux_matrix(n)?;
        let quad = DMatrix::from_fn(n, n, |k, l| {
            (0..nodes.len()).map(|q| weights[q] * values[q][k] * nodes[q] * values[q][l]).sum::<f64>()
        });
        worst_a = worst_a.max(max_abs(&(&a - quad)));
        let (abs, _) = build_abs_matrices(&a)?;
        worst_sq = worst_sq.max(max_abs(&(&abs * &abs - &a * &a)));
    }
    verdict(
        worst_a <= 1e-13 && worst_sq <= 1e-12,
        format!("max |A - quadrature| {worst_a:.1e} (limit 1e-13), max |(|A|^2 - A^2)| {worst_sq:.1e} (limit 1e-12)"),
    )
}

// ---------------------------------------------------------------- 3, 8

const SIGMAS: [f64; 4] = [0.0, 0.5, 1.0, 10.0];
const SMOOTH_STATES: u64 = 20;
const ENERGY_STEPS: usize = 200;

/// Six low Fourier modes per field (rank above the DLRA cap of 8) and a
/// positive `B` around one.
fn random_smooth_state(mesh: &SpatialMesh, n_moments: usize, seed: u64) -> Result<MomentField> {
    let mut rng = rng(seed);
    let x = mesh.centers();
    let two_pi = 2.0 * std::f64::consts::PI / mesh.length();
    let mut smooth = |amplitude: f64| {
        let modes: Vec<(f64, f64, f64)> = (1..=6)
            .map(|m| {
                (
                    m as f64,
                    rng.random_range(-amplitude..amplitude) / m as f64,
                    rng.random_range(0.0..two_pi),
                )
            })
            .collect();
        DVector::from_fn(x.len(), |j, _| {
            modes.iter().map(|(m, a, phase)| a * (two_pi * m * x[j] + phase).sin()).sum::<f64>()
        })
    };
    let b = smooth(0.25).add_scalar(1.0);
    let mut v = DMatrix::zeros(x.len(), n_moments);
    v.set_column(0, &smooth(0.25).add_scalar(std::f64::consts::SQRT_2));
    for k in 1..n_moments {
        v.set_column(k, &smooth(0.3 / k as f64));
    }
    MomentField::new(v, b)
}

fn energy_setup() -> Result<(SpatialMesh, StencilSet, AngularBasis)> {
    let mesh = SpatialMesh::new(64, 0.0, 1.0)?;
    let st = StencilSet::new(&mesh);
    Ok((mesh, st, AngularBasis::new(16)?))
}

/// Largest relative per-step energy increase; negative when every step
/// decreases the energy.
fn worst_energy_increase(mut step: impl FnMut() -> Result<f64>, e0: f64) -> Result<f64> {
    let mut prev = e0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..ENERGY_STEPS {
        let e = step()?;
        worst = worst.max((e - prev) / prev.abs());
        prev = e;
    }
    Ok(worst)
}

fn full_energy_stability() -> Result<(bool, String)> {
    let (mesh, st, basis) = energy_setup()?;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..SMOOTH_STATES {
        for sigma in SIGMAS {
            let cfg = SolverConfig::from_cfl(&mesh, 0.99, sigma)?;
            let mut state = random_smooth_state(&mesh, 16, 300 + seed)?;
            let e0 = total_energy(&state);
            worst = worst.max(worst_energy_increase(
                || {
                    state = step_full_conservative(&state, &cfg, &st, &basis)?;
                    Ok(total_energy(&state))
                },
                e0,
            )?);
        }
    }
    verdict(
        worst <= 1e-12,
        format!("{} runs x {ENERGY_STEPS} steps, largest relative step change {worst:.2e} (limit +1e-12)", SMOOTH_STATES * 4),
    )
}

fn dlra_energy_stability() -> Result<(bool, String)> {
    let (mesh, st, basis) = energy_setup()?;
    let tc = TruncationConfig::relative(1e-2, TruncationConfig::default_r_max(64, 16));
    let mut worst = f64::NEG_INFINITY;
    let mut max_rank = 0;
    for seed in 0..SMOOTH_STATES {
        for sigma in SIGMAS {
            let cfg = SolverConfig::from_cfl(&mesh, 0.99, sigma)?;
            let mut state = LowRankState::from_full(&random_smooth_state(&mesh, 16, 300 + seed)?, 8)?;
            let e0 = total_energy(&state);
            worst = worst.max(worst_energy_increase(
                || {
                    state = step_dlra(&state, &cfg, &tc, &st, &basis)?;
                    max_rank = max_rank.max(state.rank());
                    Ok(total_energy(&state))
                },
                e0,
            )?);
        }
    }
    verdict(
        worst <= 1e-12,
        format!(
            "{} runs x {ENERGY_STEPS} steps, largest relative step change {worst:.2e} (limit +1e-12), max rank {max_rank}",
            SMOOTH_STATES * 4
        ),
    )
}

// ---------------------------------------------------------------- 4

fn advection_instability() -> Result<(bool, String)> {
    let (nx, nmu, steps) = (128, 8, 2000);
    let mesh = SpatialMesh::new(nx, 0.0, 1.0)?;
    let st = StencilSet::new(&mesh);
    let basis = AngularBasis::new(nmu)?;
    let cfg = SolverConfig::from_cfl(&mesh, 0.99, 0.0)?;
    let two_pi = 2.0 * std::f64::consts::PI / mesh.length();
    let b = DVector::from_fn(nx, |j, _| 1.0 + 0.5 * (two_pi * mesh.center(j)).sin());
    let initial = MomentField::new(DMatrix::from_element(nx, nmu, 1.0), b)?;
    let energy = |s: &MomentField| 0.5 * s.weighted_norm_squared();
    let e0 = energy(&initial);

    let mut adv = initial.clone();
    let mut growth = 1.0f64;
    for _ in 0..steps {
        adv = step_full_advection(&adv, &cfg, &st, &basis)?;
        growth = growth.max(energy(&adv) / e0);
    }

    let mut cons = initial;
    let mut prev = e0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        cons = step_full_conservative(&cons, &cfg, &st, &basis)?;
        let e = energy(&cons);
        worst = worst.max((e - prev) / prev);
        prev = e;
    }
    verdict(
        growth >= 10.0 && worst <= 1e-12,
        format!(
            "advection energy growth {growth:.3}x in {steps} steps (needs >= 10x); conservative largest relative step change {worst:.2e}"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn random_moment_field(rng: &mut ChaCha8Rng, nx: usize, nmu: usize) -> Result<MomentField> {
    let v = DMatrix::from_fn(nx, nmu, |_, k| {
        if k == 0 {
            rng.random_range(1.0..2.0)
        } else {
            rng.random_range(-0.3..0.3)
        }
    });
    let b = DVector::from_fn(nx, |_, _| rng.random_range(0.5..2.0));
    MomentField::new(v, b)
}

fn full_rank_equivalence() -> Result<(bool, String)> {
    let mut rng = rng(5);
    let (mut worst_v, mut worst_b) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let nx = rng.random_range(3..=16);
        let nmu = rng.random_range(1..=8);
        let mesh = SpatialMesh::new(nx, 0.0, 1.0)?;
        let st = StencilSet::new(&mesh);
        let basis = AngularBasis::new(nmu)?;
        let mut cfg = SolverConfig::from_cfl(&mesh, rng.random_range(0.5..0.99), rng.random_range(0.0..2.0))?;
        if rng.random_bool(0.5) {
            cfg.source = Some(DVector::from_fn(nx, |_, _| rng.random_range(0.0..1.0)));
        }
        let r = nx.min(nmu);
        let tc = TruncationConfig {
            tolerance_mode: ToleranceMode::Absolute,
            theta: 0.0,
            r_max: r,
            conservative: true,
        };
        let mut full = random_moment_field(&mut rng, nx, nmu)?;
        let mut low = LowRankState::from_full(&full, r)?;
        for _ in 0..10 {
            full = step_full_conservative(&full, &cfg, &st, &basis)?;
            low = step_dlra(&low, &cfg, &tc, &st, &basis)?;
        }
        worst_v = worst_v.max(max_abs(&(low.reconstruct() - &full.v)));
        worst_b = worst_b.max((&low.b - &full.b).amax());
    }
    verdict(
        worst_v <= 1e-11 && worst_b <= 1e-11,
        format!("20 instances, 10 steps: max |dv| {worst_v:.1e}, max |dB| {worst_b:.1e} (limit 1e-11)"),
    )
}

// ---------------------------------------------------------------- 6

/// Periodic centered-difference and stabilization matrices written out
/// entry by entry.
fn dense_stencils(nx: usize, dx: f64) -> (DenseMatrix, DenseMatrix) {
    let mut d1 = DMatrix::zeros(nx, nx);
    let mut d2 = DMatrix::zeros(nx, nx);
    for j in 0..nx {
        let (left, right) = ((j + nx - 1) % nx, (j + 1) % nx);
        d1[(j, right)] += 1.0 / (2.0 * dx);
        d1[(j, left)] -= 1.0 / (2.0 * dx);
        d2[(j, j)] -= 1.0 / dx;
        d2[(j, right)] += 1.0 / (2.0 * dx);
        d2[(j, left)] += 1.0 / (2.0 * dx);
    }
    (d1, d2)
}

/// Explicit part of the full scheme with the implicit weights applied,
/// evaluated with dense matrices.
struct DenseExplicit {
    d1: DenseMatrix,
    d2: DenseMatrix,
    a: DenseMatrix,
    a_abs: DenseMatrix,
    b: DVector<f64>,
    w: DVector<f64>,
    dt: f64,
}

impl DenseExplicit {
    fn apply(&self, v: &DenseMatrix) -> DenseMatrix {
        let bm = DMatrix::from_diagonal(&self.b);
        let inv_b = DMatrix::from_diagonal(&self.b.map(|x| 1.0 / x));
        let transport = &inv_b * (&self.d2 * &bm * v * self.a_abs.transpose() - &self.d1 * &bm * v * self.a.transpose());
        DMatrix::from_diagonal(&self.w) * (v + transport * self.dt)
    }
}

fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DenseMatrix {
    orthonormal_basis(&DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0)))
}

fn dense_substep_oracles() -> Result<(bool, String)> {
    let mut rng = rng(6);
    let mut worst = [0.0f64; 3];
    for _ in 0..20 {
        let nx = rng.random_range(6..=20);
        let nmu = rng.random_range(3..=10);
        let r = rng.random_range(1..=nx.min(nmu) / 2);
        let mesh = SpatialMesh::new(nx, 0.0, rng.random_range(0.5..3.0))?;
        let st = StencilSet::new(&mesh);
        let basis = AngularBasis::new(nmu)?;
        let sigma = rng.random_range(0.0..5.0);
        let cfg = SolverConfig::from_cfl(&mesh, rng.random_range(0.3..0.99), sigma)?;
        let b = DVector::from_fn(nx, |_, _| rng.random_range(0.5..2.0));
        let (d1, d2) = dense_stencils(nx, mesh.dx());
        let op = DenseExplicit {
            d1,
            d2,
            a: basis.flux().clone(),
            a_abs: basis.flux_abs().clone(),
            w: DVector::from_element(nx, 1.0 / (1.0 + sigma * cfg.dt)),
            b: b.clone(),
            dt: cfg.dt,
        };
        let x = random_orthonormal(&mut rng, nx, r);
        let v = random_orthonormal(&mut rng, nmu, r);
        let s = DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
        let state = LowRankState::new(x.clone(), s.clone(), v.clone(), b.clone())?;
        let e = op.apply(&(&x * &s * v.transpose()));
        let rel = |got: &DenseMatrix, want: &DenseMatrix| max_abs(&(got - want)) / want.amax().max(1.0);

        let k = k_step(&state, &cfg, &st, &basis)?;
        worst[0] = worst[0].max(rel(&k, &(&e * &v)));
        let l = l_step(&state, &cfg, &st, &basis)?;
        worst[1] = worst[1].max(rel(&l, &(e.transpose() * &x)));

        let q = (2 * r).min(nx).min(nmu);
        let xh = random_orthonormal(&mut rng, nx, q);
        let vh = random_orthonormal(&mut rng, nmu, q);
        let st0 = DMatrix::from_fn(q, q, |_, _| rng.random_range(-1.0..1.0));
        let got = s_step(&st0, &xh, &vh, &b, &cfg, &st, &basis)?;
        let want = xh.transpose() * op.apply(&(&xh * &st0 * vh.transpose())) * &vh;
        worst[2] = worst[2].max(rel(&got, &want));
    }
    let ok = worst.iter().all(|&e| e <= 1e-12);
    verdict(
        ok,
        format!(
            "20 instances: K {:.1e}, L {:.1e}, S {:.1e} (limit 1e-12, relative to max(1, |oracle|))",
            worst[0], worst[1], worst[2]
        ),
    )
}

// ---------------------------------------------------------------- 7, 10

/// Plane source at Nx = 400, Nmu = 100.
pub fn desk_plane_source(solver: SolverKind, theta: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Problem::PlaneSource);
    cfg.n_cells = 400;
    cfg.n_moments = 100;
    cfg.solver = solver;
    cfg.theta = theta;
    cfg.plots = false;
    cfg
}

fn mass_conservation() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for solver in [SolverKind::FullConservative, SolverKind::Dlra] {
        let (_, summary) = simulate(&desk_plane_source(solver, 0.1), |_, _| Ok(()))?;
        let drift = summary.mass_drift();
        let residual = summary.max_conservation_residual;
        ok &= drift <= 1e-11 && residual <= 1e-10;
        parts.push(format!("{}: drift {drift:.1e}, cell residual {residual:.1e}", solver.name()));
    }
    verdict(ok, format!("{} (limits 1e-11, 1e-10)", parts.join("; ")))
}

fn scalar_flux_accuracy() -> Result<(bool, String)> {
    let (full, _) = simulate(&desk_plane_source(SolverKind::FullConservative, 0.1), |_, _| Ok(()))?;
    let (low, summary) = simulate(&desk_plane_source(SolverKind::Dlra, 1e-3), |_, _| Ok(()))?;
    let err = relative_l2(&low.scalar_flux(), &full.scalar_flux());
    verdict(
        err <= 2e-2,
        format!("relative L2 of scalar flux {err:.2e} (limit 2e-2), max rank {}", summary.max_rank),
    )
}

// ---------------------------------------------------------------- 9

fn rank_behaviour() -> Result<(bool, String)> {
    let mut plane = ExperimentConfig::preset(Problem::PlaneSource);
    plane.plots = false;
    let (_, p) = simulate(&plane, |_, _| Ok(()))?;
    let mut external = ExperimentConfig::preset(Problem::ExternalSource);
    external.plots = false;
    let (_, e) = simulate(&external, |_, _| Ok(()))?;
    verdict(
        p.max_rank <= 25 && p.final_rank < 10 && e.max_rank <= 25,
        format!(
            "plane source max rank {} (limit 25), final {} (limit < 10); external source max rank {} (limit 25)",
            p.max_rank, p.final_rank, e.max_rank
        ),
    )
}

// ---------------------------------------------------------------- 11

fn reproducibility_config(solver: SolverKind, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Problem::PlaneSource);
    cfg.n_cells = 64;
    cfg.n_moments = 16;
    cfg.initial_rank = 4;
    cfg.solver = solver;
    cfg.t_end = 1.0;
    cfg.sigma_ic = 0.5;
    cfg.ic_noise = 1e-2;
    cfg.rng_seed = 42;
    cfg.snapshot_times = vec![0.5];
    cfg.plots = false;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            files.push((name, std::fs::read(&path).map_err(io)?));
        }
    }
    files.sort();
    Ok(files)
}

fn scratch_dir(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("suolson-verify-{}-{tag}", std::process::id()))
}

fn reproducibility() -> Result<(bool, String)> {
    let mut ok = true;
    let mut compared = 0;
    for solver in [SolverKind::FullConservative, SolverKind::Dlra] {
        let dirs = [scratch_dir(&format!("{}-a", solver.name())), scratch_dir(&format!("{}-b", solver.name()))];
        let outcome = (|| {
            for d in &dirs {
                run_experiment(&reproducibility_config(solver, d))?;
            }
            Ok::<_, Error>((csv_files(&dirs[0])?, csv_files(&dirs[1])?))
        })();
        for d in &dirs {
            let _ = std::fs::remove_dir_all(d);
        }
        let (a, b) = outcome?;
        ok &= !a.is_empty() && a == b;
        compared += a.len();
    }
    verdict(ok, format!("{compared} CSV files per run compared byte for byte over two solvers"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!(Suite::parse("all"), Ok(Suite::All));
        assert_eq!(Suite::parse("C7"), Ok(Suite::Single(7)));
        assert_eq!(Suite::parse("11"), Ok(Suite::Single(11)));
        assert!(Suite::parse("12").is_err());
        assert_eq!(Suite::Fast.criteria().count(), 10);
        assert_eq!(Suite::Slow.criteria().count(), 1);
    }

    #[test]
    fn recurrence_polynomials_are_orthonormal() {
        let (nodes, weights) = gauss_legendre(20);
        for k in 0..10 {
            for l in 0..10 {
                let g: f64 = (0..20)
                    .map(|q| {
                        let p = legendre_normalized(10, nodes[q]);
                        weights[q] * p[k] * p[l]
                    })
                    .sum();
                assert!((g - if k == l { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dense_stencils_match_banded() {
        let mesh = SpatialMesh::new(7, 0.0, 2.0).unwrap();
        let st = StencilSet::new(&mesh);
        let (d1, d2) = dense_stencils(7, mesh.dx());
        assert!(max_abs(&(d1 - st.to_dense(Stencil::Dx))) < 1e-15);
        assert!(max_abs(&(d2 - st.to_dense(Stencil::Dxx))) < 1e-15);
    }
}
