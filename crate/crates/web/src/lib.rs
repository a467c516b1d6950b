//! WebAssembly bindings for the demo page in `www/`. Each export runs a
//! small problem to completion and hands plain arrays back to JavaScript.

use suolson_core::diagnostics::{relative_l2, uniform_mu_grid, MomentState};
use nalgebra::{DMatrix, DVector};
use suolson_core::experiments::{ExperimentConfig, Problem, Simulation, SolverKind};
use suolson_core::{step_full_advection, step_full_conservative, AngularBasis, MomentField, SolverConfig};
use suolson_core::{SpatialMesh, StencilSet};
use wasm_bindgen::prelude::*;

/// Scalar flux of both solvers at `t_end` plus the rank history of the
/// low-rank run.
#[wasm_bindgen]
pub struct PlaneSourceComparison {
    x: Vec<f64>,
    phi_full: Vec<f64>,
    phi_dlra: Vec<f64>,
    times: Vec<f64>,
    ranks: Vec<f64>,
    flux_difference: f64,
    mass_drift_full: f64,
    mass_drift_dlra: f64,
}

#[wasm_bindgen]
impl PlaneSourceComparison {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn phi_full(&self) -> Vec<f64> {
        self.phi_full.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn phi_dlra(&self) -> Vec<f64> {
        self.phi_dlra.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn ranks(&self) -> Vec<f64> {
        self.ranks.clone()
    }
    /// Relative L2 difference of the two scalar fluxes.
    #[wasm_bindgen(getter)]
    pub fn flux_difference(&self) -> f64 {
        self.flux_difference
    }
    #[wasm_bindgen(getter)]
    pub fn mass_drift_full(&self) -> f64 {
        self.mass_drift_full
    }
    #[wasm_bindgen(getter)]
    pub fn mass_drift_dlra(&self) -> f64 {
        self.mass_drift_dlra
    }
}

fn plane_source_config(solver: SolverKind, n_cells: usize, n_moments: usize, theta: f64, t_end: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Problem::PlaneSource);
    cfg.solver = solver;
    cfg.n_cells = n_cells;
    cfg.n_moments = n_moments;
    cfg.initial_rank = cfg.initial_rank.min(n_cells.min(n_moments));
    cfg.theta = theta;
    cfg.t_end = t_end;
    cfg.plots = false;
    cfg
}

struct Finished {
    sim: Simulation,
    times: Vec<f64>,
    ranks: Vec<f64>,
    mass_drift: f64,
}

fn run_to_end(cfg: ExperimentConfig) -> suolson_core::Result<Finished> {
    let t_end = cfg.t_end;
    let mut sim = Simulation::new(cfg)?;
    let m0 = sim.record(0.0).mass;
    let mut times = vec![0.0];
    let mut ranks = vec![sim.state.rank() as f64];
    sim.advance_to(t_end, |_, rec| {
        times.push(rec.t);
        ranks.push(rec.rank as f64);
        Ok(())
    })?;
    let m1 = sim.record(0.0).mass;
    Ok(Finished {
        sim,
        times,
        ranks,
        mass_drift: ((m1 - m0) / m0).abs(),
    })
}

pub fn compare(n_cells: usize, n_moments: usize, theta: f64, t_end: f64) -> suolson_core::Result<PlaneSourceComparison> {
    let full = run_to_end(plane_source_config(SolverKind::FullConservative, n_cells, n_moments, theta, t_end))?;
    let low = run_to_end(plane_source_config(SolverKind::Dlra, n_cells, n_moments, theta, t_end))?;
    let phi_full = full.sim.scalar_flux();
    let phi_dlra = low.sim.scalar_flux();
    Ok(PlaneSourceComparison {
        x: full.sim.mesh.centers().as_slice().to_vec(),
        flux_difference: relative_l2(&phi_dlra, &phi_full),
        phi_full: phi_full.as_slice().to_vec(),
        phi_dlra: phi_dlra.as_slice().to_vec(),
        times: low.times,
        ranks: low.ranks,
        mass_drift_full: full.mass_drift,
        mass_drift_dlra: low.mass_drift,
    })
}

fn js_error(e: suolson_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Plane source with the full solver and the low-rank solver side by side.
#[wasm_bindgen]
pub fn compare_plane_source(n_cells: usize, n_moments: usize, theta: f64, t_end: f64) -> Result<PlaneSourceComparison, JsError> {
    compare(n_cells, n_moments, theta, t_end).map_err(js_error)
}

/// Energy `0.5 |B v|_F^2` relative to its initial value, per step.
#[wasm_bindgen]
pub struct EnergyHistory {
    advection: Vec<f64>,
    conservative: Vec<f64>,
}

#[wasm_bindgen]
impl EnergyHistory {
    #[wasm_bindgen(getter)]
    pub fn advection(&self) -> Vec<f64> {
        self.advection.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn conservative(&self) -> Vec<f64> {
        self.conservative.clone()
    }
}

/// `v = 1`, `B = 1 + 0.5 sin(2 pi periods x)` on the unit interval,
/// `Nx = 128`, `Nmu = 8`, no absorption, `dt = 0.99 dx`.
pub fn energy_growth(periods: u32, steps: usize) -> suolson_core::Result<EnergyHistory> {
    let (nx, nmu) = (128, 8);
    let mesh = SpatialMesh::new(nx, 0.0, 1.0)?;
    let st = StencilSet::new(&mesh);
    let basis = AngularBasis::new(nmu)?;
    let cfg = SolverConfig::from_cfl(&mesh, 0.99, 0.0)?;
    let k = 2.0 * std::f64::consts::PI * periods as f64;
    let b = DVector::from_fn(nx, |j, _| 1.0 + 0.5 * (k * mesh.center(j)).sin());
    let initial = MomentField::new(DMatrix::from_element(nx, nmu, 1.0), b)?;
    let energy = |s: &MomentField| 0.5 * s.weighted_norm_squared();
    let e0 = energy(&initial);
    let mut adv = initial.clone();
    let mut cons = initial;
    let mut advection = vec![1.0];
    let mut conservative = vec![1.0];
    for _ in 0..steps {
        adv = step_full_advection(&adv, &cfg, &st, &basis)?;
        cons = step_full_conservative(&cons, &cfg, &st, &basis)?;
        advection.push(energy(&adv) / e0);
        conservative.push(energy(&cons) / e0);
    }
    Ok(EnergyHistory { advection, conservative })
}

/// Advection-form and conservative energy on the same periodic setup.
#[wasm_bindgen]
pub fn instability(periods: u32, steps: usize) -> Result<EnergyHistory, JsError> {
    energy_growth(periods, steps).map_err(js_error)
}

/// `f(x, mu)` on `n_cells x n_mu` points, row-major with `mu` fastest.
#[wasm_bindgen]
pub struct Heatmap {
    n_cells: usize,
    n_mu: usize,
    values: Vec<f64>,
    rank: usize,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    #[wasm_bindgen(getter)]
    pub fn n_mu(&self) -> usize {
        self.n_mu
    }
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn rank(&self) -> usize {
        self.rank
    }
}

pub fn heatmap(solver: &str, n_cells: usize, n_moments: usize, theta: f64, t: f64, n_mu: usize) -> suolson_core::Result<Heatmap> {
    let kind = SolverKind::parse(solver).map_err(|e| suolson_core::Error::Config(vec![e]))?;
    let finished = run_to_end(plane_source_config(kind, n_cells, n_moments, theta, t))?;
    let f = finished.sim.distribution(&uniform_mu_grid(n_mu))?;
    let values = (0..f.nrows()).flat_map(|j| (0..f.ncols()).map(move |m| (j, m))).map(|(j, m)| f[(j, m)]).collect();
    Ok(Heatmap {
        n_cells,
        n_mu,
        values,
        rank: finished.sim.state.rank(),
    })
}

/// Plane-source distribution `f(x, mu)` at time `t`.
#[wasm_bindgen]
pub fn distribution_heatmap(solver: &str, n_cells: usize, n_moments: usize, theta: f64, t: f64, n_mu: usize) -> Result<Heatmap, JsError> {
    heatmap(solver, n_cells, n_moments, theta, t, n_mu).map_err(js_error)
}
