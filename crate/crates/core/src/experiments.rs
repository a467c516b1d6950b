//! Experiment configuration, initial data and the time loop that drives
//! either solver and writes diagnostics, snapshots and plots.
//!
//! Configuration files are flat `key = value` lines; `#` starts a comment.
//! The `problem` key selects a preset whose defaults every other key may
//! override.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::SQRT_2;

use crate::angular::AngularBasis;
use crate::diagnostics::{
    conservation_balance, evaluate_distribution, scalar_flux, temperature, uniform_mu_grid,
    DiagnosticsRecord, MomentState,
};
use crate::dlra::{step_dlra, LowRankState, ToleranceMode, TruncationConfig};
use crate::error::{Error, Result};
use crate::full::{step_full_advection, step_full_conservative, MomentField, SolverConfig};
use crate::linalg::DenseMatrix;
use crate::mesh::{SpatialMesh, StencilSet};

/// Floor of the cutoff Gaussian initial condition.
pub const GAUSSIAN_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    PlaneSource,
    ExternalSource,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    FullConservative,
    FullAdvection,
    Dlra,
}

impl SolverKind {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" | "full_conservative" | "conservative" => Ok(SolverKind::FullConservative),
            "advection" | "full_advection" => Ok(SolverKind::FullAdvection),
            "dlra" | "low_rank" => Ok(SolverKind::Dlra),
            _ => Err(format!("unknown solver '{s}' (expected full, advection or dlra)")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::FullConservative => "full_conservative",
            SolverKind::FullAdvection => "full_advection",
            SolverKind::Dlra => "dlra",
        }
    }
}

impl Problem {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "plane_source" => Ok(Problem::PlaneSource),
            "external_source" | "marshak" => Ok(Problem::ExternalSource),
            "custom" => Ok(Problem::Custom),
            _ => Err(format!(
                "unknown problem '{s}' (expected plane_source, external_source or custom)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub solver: SolverKind,
    pub n_cells: usize,
    pub n_moments: usize,
    pub initial_rank: usize,
    /// Defaults to `min(Nx, Nmu) / 2`.
    pub r_max: Option<usize>,
    pub conservative_truncation: bool,
    pub cfl: f64,
    pub sigma: f64,
    pub theta: f64,
    pub tolerance_mode: ToleranceMode,
    pub t_end: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub b0_init: f64,
    pub sigma_ic: f64,
    pub ic_center: f64,
    /// Source strength inside the source region. When unset, the external
    /// source problem uses `1 / radiation_constant_a` and the others none.
    pub source_magnitude: Option<f64>,
    pub radiation_constant_a: f64,
    pub source_half_width: f64,
    /// Amplitude of seeded random perturbations of the first few higher
    /// moments, relative to the zeroth moment.
    pub ic_noise: f64,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub fxmu_points: usize,
    pub plots: bool,
}

impl ExperimentConfig {
    pub fn preset(problem: Problem) -> Self {
        let mut cfg = ExperimentConfig {
            problem,
            solver: SolverKind::Dlra,
            n_cells: 1000,
            n_moments: 500,
            initial_rank: 20,
            r_max: None,
            conservative_truncation: true,
            cfl: 0.99,
            sigma: 1.0,
            theta: 1e-1,
            tolerance_mode: ToleranceMode::RelativeToSigmaNorm,
            t_end: 8.0,
            x_left: -10.0,
            x_right: 10.0,
            b0_init: 1.0,
            sigma_ic: 0.03,
            ic_center: 1.0,
            source_magnitude: None,
            radiation_constant_a: 1.0,
            source_half_width: 0.5,
            ic_noise: 0.0,
            rng_seed: 0,
            output_dir: PathBuf::from("output"),
            snapshot_times: Vec::new(),
            fxmu_points: 64,
            plots: true,
        };
        if problem == Problem::ExternalSource {
            cfg.b0_init = 50.0;
            cfg.theta = 1e-3;
            cfg.t_end = 3.16;
        }
        cfg
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("{key}: cannot parse '{value}'"))
        }
        fn flag(key: &str, value: &str) -> std::result::Result<bool, String> {
            match value {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(format!("{key}: expected true or false, got '{value}'")),
            }
        }
        match key {
            "problem" => self.problem = Problem::parse(value)?,
            "solver" => self.solver = SolverKind::parse(value)?,
            "n_cells" => self.n_cells = num(key, value)?,
            "n_moments" => self.n_moments = num(key, value)?,
            "initial_rank" => self.initial_rank = num(key, value)?,
            "r_max" => self.r_max = Some(num(key, value)?),
            "conservative_truncation" => self.conservative_truncation = flag(key, value)?,
            "cfl" => self.cfl = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "tolerance_mode" => {
                self.tolerance_mode = match value {
                    "relative" | "relative_to_sigma_norm" => ToleranceMode::RelativeToSigmaNorm,
                    "absolute" => ToleranceMode::Absolute,
                    _ => return Err(format!("tolerance_mode: expected relative or absolute, got '{value}'")),
                }
            }
            "t_end" => self.t_end = num(key, value)?,
            "x_left" => self.x_left = num(key, value)?,
            "x_right" => self.x_right = num(key, value)?,
            "b0_init" => self.b0_init = num(key, value)?,
            "sigma_ic" => self.sigma_ic = num(key, value)?,
            "ic_center" => self.ic_center = num(key, value)?,
            "source_magnitude" => self.source_magnitude = Some(num(key, value)?),
            "radiation_constant_a" => self.radiation_constant_a = num(key, value)?,
            "source_half_width" => self.source_half_width = num(key, value)?,
            "ic_noise" => self.ic_noise = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "snapshot_times" => {
                self.snapshot_times = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|t| num::<f64>(key, t.trim()))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "fxmu_points" => self.fxmu_points = num(key, value)?,
            "plots" => self.plots = flag(key, value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Builds a configuration from ordered key/value pairs. The preset is
    /// chosen by the last `problem` entry; all problems are reported at once.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut errors = Vec::new();
        let problem = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "problem")
            .map(|(_, v)| Problem::parse(v))
            .transpose()
            .unwrap_or_else(|e| {
                errors.push(e);
                None
            })
            .unwrap_or(Problem::PlaneSource);
        let mut cfg = ExperimentConfig::preset(problem);
        for (k, v) in pairs {
            if k == "problem" {
                continue;
            }
            if let Err(e) = cfg.set(k, v) {
                errors.push(e);
            }
        }
        errors.extend(cfg.problems());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Reads a config file and applies `key=value` overrides on top.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        let mut pairs = parse_config_text(&text)?;
        pairs.extend_from_slice(overrides);
        ExperimentConfig::from_pairs(&pairs)
    }

    /// Every violated constraint, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.n_cells < 3 {
            p.push(format!("n_cells = {} must be at least 3", self.n_cells));
        }
        if self.n_moments < 1 {
            p.push("n_moments must be at least 1".into());
        }
        if self.initial_rank < 1 {
            p.push("initial_rank must be at least 1".into());
        }
        let max_rank = self.n_cells.min(self.n_moments);
        if self.initial_rank > max_rank {
            p.push(format!("initial_rank = {} exceeds min(n_cells, n_moments) = {max_rank}", self.initial_rank));
        }
        if let Some(r) = self.r_max {
            if r < 1 || r > max_rank {
                p.push(format!("r_max = {r} outside [1, {max_rank}]"));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            p.push(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            p.push(format!("sigma = {} must be nonnegative", self.sigma));
        }
        if !(self.theta >= 0.0) {
            p.push(format!("theta = {} must be nonnegative", self.theta));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            p.push(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if !(self.x_right > self.x_left) {
            p.push(format!("domain [{}, {}] is empty", self.x_left, self.x_right));
        }
        if !(self.b0_init > 0.0) {
            p.push(format!("b0_init = {} must be positive", self.b0_init));
        }
        if !(self.sigma_ic > 0.0) {
            p.push(format!("sigma_ic = {} must be positive", self.sigma_ic));
        }
        if !(self.radiation_constant_a > 0.0) {
            p.push(format!("radiation_constant_a = {} must be positive", self.radiation_constant_a));
        }
        if let Some(q) = self.source_magnitude {
            if !(q >= 0.0) {
                p.push(format!("source_magnitude = {q} must be nonnegative"));
            }
        }
        if !(self.ic_noise >= 0.0) {
            p.push(format!("ic_noise = {} must be nonnegative", self.ic_noise));
        }
        if self.fxmu_points < 1 {
            p.push("fxmu_points must be at least 1".into());
        }
        for t in &self.snapshot_times {
            if !(*t >= 0.0 && *t <= self.t_end) {
                p.push(format!("snapshot time {t} outside [0, t_end]"));
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn mesh(&self) -> Result<SpatialMesh> {
        SpatialMesh::new(self.n_cells, self.x_left, self.x_right)
    }

    pub fn effective_r_max(&self) -> usize {
        self.r_max
            .unwrap_or_else(|| TruncationConfig::default_r_max(self.n_cells, self.n_moments))
    }

    pub fn truncation(&self) -> TruncationConfig {
        TruncationConfig {
            tolerance_mode: self.tolerance_mode,
            theta: self.theta,
            r_max: self.effective_r_max(),
            conservative: self.conservative_truncation,
        }
    }

    pub fn effective_source_magnitude(&self) -> f64 {
        match (self.source_magnitude, self.problem) {
            (Some(q), _) => q,
            (None, Problem::ExternalSource) => 1.0 / self.radiation_constant_a,
            (None, _) => 0.0,
        }
    }
}

/// Splits config text into ordered `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => pairs.push((k.trim().to_string(), v.trim().to_string())),
            _ => errors.push(format!("line {}: expected key = value, got '{}'", i + 1, raw.trim())),
        }
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(Error::Config(errors))
    }
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config(vec![format!("override '{s}' is not key=value")])),
    }
}

/// Either solver's state.
#[derive(Debug, Clone, PartialEq)]
pub enum SimState {
    Full(MomentField),
    LowRank(LowRankState),
}

impl MomentState for SimState {
    fn n_cells(&self) -> usize {
        match self {
            SimState::Full(s) => MomentState::n_cells(s),
            SimState::LowRank(s) => MomentState::n_cells(s),
        }
    }

    fn n_moments(&self) -> usize {
        match self {
            SimState::Full(s) => MomentState::n_moments(s),
            SimState::LowRank(s) => MomentState::n_moments(s),
        }
    }

    fn internal_energy(&self) -> &DVector<f64> {
        match self {
            SimState::Full(s) => &s.b,
            SimState::LowRank(s) => &s.b,
        }
    }

    fn contract_moments(&self, w: &DVector<f64>) -> DVector<f64> {
        match self {
            SimState::Full(s) => s.contract_moments(w),
            SimState::LowRank(s) => s.contract_moments(w),
        }
    }

    fn weighted_norm_squared(&self) -> f64 {
        match self {
            SimState::Full(s) => s.weighted_norm_squared(),
            SimState::LowRank(s) => s.weighted_norm_squared(),
        }
    }

    fn moments(&self) -> DenseMatrix {
        match self {
            SimState::Full(s) => s.moments(),
            SimState::LowRank(s) => s.moments(),
        }
    }

    fn rank(&self) -> usize {
        match self {
            SimState::Full(s) => MomentState::rank(s),
            SimState::LowRank(s) => s.rank(),
        }
    }

    fn zeroth_moment(&self) -> DVector<f64> {
        match self {
            SimState::Full(s) => s.zeroth_moment(),
            SimState::LowRank(s) => s.zeroth_moment(),
        }
    }
}

/// Normal density with standard deviation `width`.
pub fn gaussian(x: f64, width: f64) -> f64 {
    (-(x * x) / (2.0 * width * width)).exp() / (2.0 * std::f64::consts::PI * width * width).sqrt()
}

/// `g_j = max(1e-4, N(x_j - c; sigma_ic)) / B0`.
pub fn cutoff_gaussian(cfg: &ExperimentConfig, mesh: &SpatialMesh) -> DVector<f64> {
    DVector::from_fn(mesh.n_cells(), |j, _| {
        GAUSSIAN_FLOOR.max(gaussian(mesh.center(j) - cfg.ic_center, cfg.sigma_ic)) / cfg.b0_init
    })
}

/// `Q_j` on the closed interval `|x_j| <= source_half_width`.
pub fn source_profile(cfg: &ExperimentConfig, mesh: &SpatialMesh) -> Option<DVector<f64>> {
    let q = cfg.effective_source_magnitude();
    (q > 0.0).then(|| {
        DVector::from_fn(mesh.n_cells(), |j, _| {
            if mesh.center(j).abs() <= cfg.source_half_width {
                q
            } else {
                0.0
            }
        })
    })
}

fn initial_state(cfg: &ExperimentConfig, mesh: &SpatialMesh) -> Result<SimState> {
    let g = cutoff_gaussian(cfg, mesh);
    let v0 = &g * SQRT_2;
    let b = DVector::from_element(mesh.n_cells(), cfg.b0_init);
    if cfg.ic_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let mut v = DMatrix::zeros(mesh.n_cells(), cfg.n_moments);
        v.set_column(0, &v0);
        for l in 1..cfg.n_moments.min(4) {
            for j in 0..mesh.n_cells() {
                v[(j, l)] = cfg.ic_noise * rng.random_range(-1.0..1.0) * v0[j];
            }
        }
        let field = MomentField::new(v, b)?;
        return Ok(match cfg.solver {
            SolverKind::Dlra => SimState::LowRank(LowRankState::from_full(&field, cfg.initial_rank)?),
            _ => SimState::Full(field),
        });
    }
    Ok(match cfg.solver {
        SolverKind::Dlra => {
            let mut e1 = DVector::zeros(cfg.n_moments);
            e1[0] = 1.0;
            SimState::LowRank(LowRankState::rank_one_padded(&v0, &e1, cfg.initial_rank, b)?)
        }
        _ => {
            let mut v = DMatrix::zeros(mesh.n_cells(), cfg.n_moments);
            v.set_column(0, &v0);
            SimState::Full(MomentField::new(v, b)?)
        }
    })
}

/// Isotropic cutoff Gaussian with `B = B0` and no source.
pub fn init_plane_source(cfg: &ExperimentConfig) -> Result<SimState> {
    cfg.validate()?;
    initial_state(cfg, &cfg.mesh()?)
}

/// Same initial data plus the source profile.
pub fn init_external_source(cfg: &ExperimentConfig) -> Result<(SimState, DVector<f64>)> {
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    let q = source_profile(cfg, &mesh).unwrap_or_else(|| DVector::zeros(mesh.n_cells()));
    Ok((initial_state(cfg, &mesh)?, q))
}

/// Solver, mesh and state of a running experiment.
pub struct Simulation {
    pub config: ExperimentConfig,
    pub mesh: SpatialMesh,
    pub stencils: StencilSet,
    pub basis: AngularBasis,
    pub solver: SolverConfig,
    pub truncation: TruncationConfig,
    pub state: SimState,
    pub t: f64,
    pub step: usize,
}

impl Simulation {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mesh = config.mesh()?;
        let stencils = StencilSet::new(&mesh);
        let basis = AngularBasis::new(config.n_moments)?;
        let mut solver = SolverConfig::from_cfl(&mesh, config.cfl, config.sigma)?;
        solver.source = source_profile(&config, &mesh);
        let state = initial_state(&config, &mesh)?;
        Ok(Simulation {
            truncation: config.truncation(),
            config,
            mesh,
            stencils,
            basis,
            solver,
            state,
            t: 0.0,
            step: 0,
        })
    }

    pub fn record(&self, max_conservation_residual: f64) -> DiagnosticsRecord {
        DiagnosticsRecord::capture(self.step, self.t, &self.state, self.mesh.dx(), max_conservation_residual)
    }

    /// Advances by `dt` (at most the CFL step) and returns the new record.
    pub fn advance(&mut self, dt: f64) -> Result<DiagnosticsRecord> {
        let cfg = self.solver.with_dt(dt);
        let next_step = self.step + 1;
        let next = match (&self.state, self.config.solver) {
            (SimState::Full(f), SolverKind::FullConservative) => {
                step_full_conservative(f, &cfg, &self.stencils, &self.basis).map(SimState::Full)
            }
            (SimState::Full(f), SolverKind::FullAdvection) => {
                step_full_advection(f, &cfg, &self.stencils, &self.basis).map(SimState::Full)
            }
            (SimState::LowRank(s), SolverKind::Dlra) => {
                step_dlra(s, &cfg, &self.truncation, &self.stencils, &self.basis).map(SimState::LowRank)
            }
            _ => Err(Error::InvalidParameter("state does not match solver".into())),
        }
        .map_err(|e| e.at_step(next_step))?;
        let balance = conservation_balance(&self.state, &next, dt, cfg.source.as_ref(), &self.stencils, &self.basis)?;
        self.state = next;
        self.t += dt;
        self.step = next_step;
        let rec = self.record(balance.max_relative());
        if !rec.is_valid() {
            return Err(Error::NonFinite {
                step: self.step,
                stage: "diagnostics",
            });
        }
        Ok(rec)
    }

    /// Steps up to time `target`, shortening the last step to land on it.
    pub fn advance_to(&mut self, target: f64, mut on_step: impl FnMut(&Simulation, &DiagnosticsRecord) -> Result<()>) -> Result<()> {
        let dt_max = self.solver.dt;
        while self.t < target {
            let remaining = target - self.t;
            let landing = remaining <= dt_max * (1.0 + 1e-12);
            let dt = if landing { remaining } else { dt_max };
            if dt <= dt_max * 1e-12 {
                self.t = target;
                break;
            }
            let rec = self.advance(dt)?;
            if landing {
                self.t = target;
            }
            on_step(self, &rec)?;
        }
        Ok(())
    }

    pub fn scalar_flux(&self) -> DVector<f64> {
        scalar_flux(&self.state)
    }

    pub fn temperature(&self) -> DVector<f64> {
        temperature(self.state.internal_energy())
    }

    pub fn distribution(&self, mu: &[f64]) -> Result<DenseMatrix> {
        evaluate_distribution(&self.state, &self.basis, mu)
    }

    /// Bytes of the persistent state: `r (Nx + Nmu + r) + Nx` doubles for
    /// the low-rank solver, `Nx Nmu + Nx` for the full ones.
    pub fn state_bytes(&self, rank: usize) -> usize {
        let (nx, nmu) = (self.config.n_cells, self.config.n_moments);
        match self.config.solver {
            SolverKind::Dlra => 8 * (rank * (nx + nmu + rank) + nx),
            _ => full_state_bytes(nx, nmu),
        }
    }
}

pub fn full_state_bytes(n_cells: usize, n_moments: usize) -> usize {
    8 * (n_cells * n_moments + n_cells)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub solver: SolverKind,
    pub steps: usize,
    pub final_time: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_rank: usize,
    pub final_rank: usize,
    pub max_conservation_residual: f64,
    pub wall_time: Duration,
    pub peak_state_bytes: usize,
    pub full_state_bytes: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub written: Vec<PathBuf>,
}

impl RunSummary {
    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass).abs() / self.initial_mass.abs()
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "solver            {}", self.solver.name())?;
        writeln!(f, "steps             {}", self.steps)?;
        writeln!(f, "final time        {}", self.final_time)?;
        writeln!(f, "mass drift        {:.3e} (relative)", self.mass_drift())?;
        writeln!(f, "energy            {:.6e} -> {:.6e}", self.initial_energy, self.final_energy)?;
        writeln!(f, "max rank          {}", self.max_rank)?;
        writeln!(f, "final rank        {}", self.final_rank)?;
        writeln!(f, "max cons. resid.  {:.3e}", self.max_conservation_residual)?;
        writeln!(f, "wall time         {:.3} s", self.wall_time.as_secs_f64())?;
        write!(
            f,
            "peak state memory {} bytes (full solver: {} bytes)",
            self.peak_state_bytes, self.full_state_bytes
        )
    }
}

/// Time label used in snapshot file names: up to six decimals, trailing
/// zeros removed.
pub fn time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

const DIAGNOSTICS_HEADER: &str = "step,t,energy,mass,rank,max_conservation_residual,min_B";

fn diagnostics_line(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.step, r.t, r.energy, r.mass, r.rank, r.max_conservation_residual, r.min_b
    )
}

struct OutputWriter {
    dir: PathBuf,
    diagnostics: std::io::BufWriter<fs::File>,
    mu: Vec<f64>,
    plots: bool,
    written: Vec<PathBuf>,
}

impl OutputWriter {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output_dir)?;
        let path = cfg.output_dir.join("diagnostics.csv");
        let mut diagnostics = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(diagnostics, "{DIAGNOSTICS_HEADER}")?;
        Ok(OutputWriter {
            dir: cfg.output_dir.clone(),
            diagnostics,
            mu: uniform_mu_grid(cfg.fxmu_points),
            plots: cfg.plots,
            written: vec![path],
        })
    }

    fn record(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.diagnostics, "{}", diagnostics_line(r))?;
        Ok(())
    }

    fn snapshot(&mut self, sim: &Simulation) -> Result<()> {
        let label = time_label(sim.t);
        let x = sim.mesh.centers();
        let phi = sim.scalar_flux();
        let temp = sim.temperature();
        let b = sim.state.internal_energy();

        let path = self.dir.join(format!("snapshot_t{label}.csv"));
        let mut out = String::from("x,scalar_flux,temperature,B\n");
        for j in 0..x.len() {
            out.push_str(&format!("{},{},{},{}\n", x[j], phi[j], temp[j], b[j]));
        }
        fs::write(&path, out)?;
        self.written.push(path);

        let f = sim.distribution(&self.mu)?;
        let path = self.dir.join(format!("fxmu_t{label}.csv"));
        let mut out = String::from("x,mu,f\n");
        for j in 0..x.len() {
            for (i, mu) in self.mu.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", x[j], mu, f[(j, i)]));
            }
        }
        fs::write(&path, out)?;
        self.written.push(path);

        if self.plots {
            if let Err(e) = self.snapshot_plots(&label, x.as_slice(), phi.as_slice(), temp.as_slice(), &f) {
                log::warn!("plot rendering failed, continuing with CSV only: {e}");
            }
        }
        Ok(())
    }

    #[cfg(feature = "plots")]
    fn snapshot_plots(&mut self, label: &str, x: &[f64], phi: &[f64], temp: &[f64], f: &DenseMatrix) -> Result<()> {
        use crate::plot::{render_heatmap, render_lines, save_png, Series, BLUE, ORANGE};
        for (name, y, color) in [("scalar_flux", phi, BLUE), ("temperature", temp, ORANGE)] {
            let img = render_lines(x, &[Series { y, color }], 640, 400)?;
            let path = self.dir.join(format!("{name}_t{label}.png"));
            save_png(&img, &path)?;
            self.written.push(path);
        }
        let img = render_heatmap(f, 640, 400)?;
        let path = self.dir.join(format!("fxmu_t{label}.png"));
        save_png(&img, &path)?;
        self.written.push(path);
        Ok(())
    }

    #[cfg(not(feature = "plots"))]
    fn snapshot_plots(&mut self, _: &str, _: &[f64], _: &[f64], _: &[f64], _: &DenseMatrix) -> Result<()> {
        Err(Error::InvalidParameter("built without plot support".into()))
    }

    #[cfg(feature = "plots")]
    fn history_plots(&mut self, records: &[DiagnosticsRecord]) -> Result<()> {
        use crate::plot::{render_lines, save_png, Series, BLUE, GREEN};
        let t: Vec<f64> = records.iter().map(|r| r.t).collect();
        let rank: Vec<f64> = records.iter().map(|r| r.rank as f64).collect();
        let m0 = records[0].mass;
        let drift: Vec<f64> = records.iter().map(|r| (r.mass - m0) / m0).collect();
        for (name, y, color) in [("rank", &rank, BLUE), ("mass_drift", &drift, GREEN)] {
            let img = render_lines(&t, &[Series { y, color }], 640, 400)?;
            let path = self.dir.join(format!("{name}.png"));
            save_png(&img, &path)?;
            self.written.push(path);
        }
        Ok(())
    }

    #[cfg(not(feature = "plots"))]
    fn history_plots(&mut self, _: &[DiagnosticsRecord]) -> Result<()> {
        Ok(())
    }

    fn finish(mut self, records: &[DiagnosticsRecord]) -> Result<Vec<PathBuf>> {
        self.diagnostics.flush()?;
        if self.plots && records.len() > 1 {
            if let Err(e) = self.history_plots(records) {
                log::warn!("plot rendering failed, continuing with CSV only: {e}");
            }
        }
        Ok(self.written)
    }
}

fn summarize(sim: &Simulation, records: Vec<DiagnosticsRecord>, written: Vec<PathBuf>, start: Instant) -> RunSummary {
    let first = &records[0];
    let last = records.last().unwrap_or(first);
    RunSummary {
        solver: sim.config.solver,
        steps: sim.step,
        final_time: sim.t,
        initial_mass: first.mass,
        final_mass: last.mass,
        initial_energy: first.energy,
        final_energy: last.energy,
        max_rank: records.iter().map(|r| r.rank).max().unwrap_or(0),
        final_rank: sim.state.rank(),
        max_conservation_residual: records.iter().map(|r| r.max_conservation_residual).fold(0.0, f64::max),
        wall_time: start.elapsed(),
        peak_state_bytes: records.iter().map(|r| sim.state_bytes(r.rank)).max().unwrap_or(0),
        full_state_bytes: full_state_bytes(sim.config.n_cells, sim.config.n_moments),
        records,
        written,
    }
}

/// Runs an experiment in memory to `t_end`, calling `on_step` with the
/// initial record and after every step.
pub fn simulate(
    cfg: &ExperimentConfig,
    mut on_step: impl FnMut(&Simulation, &DiagnosticsRecord) -> Result<()>,
) -> Result<(Simulation, RunSummary)> {
    let start = Instant::now();
    let mut sim = Simulation::new(cfg.clone())?;
    let first = sim.record(0.0);
    on_step(&sim, &first)?;
    let mut records = vec![first];
    sim.advance_to(cfg.t_end, |s, rec| {
        records.push(rec.clone());
        on_step(s, rec)
    })?;
    let summary = summarize(&sim, records, Vec::new(), start);
    Ok((sim, summary))
}

/// Runs an experiment and writes `diagnostics.csv`, snapshot CSVs at time
/// zero, at every snapshot time and at `t_end`, and plot images.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = OutputWriter::new(cfg)?;
    let mut stops: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .chain(std::iter::once(cfg.t_end))
        .filter(|t| *t > 0.0)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut sim = Simulation::new(cfg.clone())?;
    let first = sim.record(0.0);
    out.record(&first)?;
    out.snapshot(&sim)?;
    let mut records = vec![first];
    for stop in stops {
        sim.advance_to(stop, |_, rec| {
            records.push(rec.clone());
            out.record(rec)
        })?;
        out.snapshot(&sim)?;
    }
    let written = out.finish(&records)?;
    Ok(summarize(&sim, records, written, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::state_mass;

    fn small(problem: Problem, solver: SolverKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(problem);
        c.solver = solver;
        c.n_cells = 60;
        c.n_moments = 12;
        c.initial_rank = 4;
        c.t_end = 0.5;
        c.sigma_ic = 0.3;
        c.plots = false;
        c
    }

    #[test]
    fn config_text_parsing() {
        let text = "# comment\nproblem = external_source\nn_cells = 40 # trailing\n\nsnapshot_times = 0.5, 1\n";
        let pairs = parse_config_text(text).unwrap();
        assert_eq!(pairs.len(), 3);
        let cfg = ExperimentConfig::from_pairs(&pairs).unwrap();
        assert_eq!(cfg.problem, Problem::ExternalSource);
        assert_eq!(cfg.b0_init, 50.0);
        assert_eq!(cfg.n_cells, 40);
        assert_eq!(cfg.snapshot_times, vec![0.5, 1.0]);
        assert!(parse_config_text("just words").is_err());
    }

    #[test]
    fn all_config_errors_reported_together() {
        let pairs: Vec<(String, String)> = [("cfl", "1.5"), ("n_cells", "x"), ("bogus", "1"), ("t_end", "-1")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        match ExperimentConfig::from_pairs(&pairs) {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 4, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_apply_after_file() {
        let mut pairs = parse_config_text("n_cells = 40").unwrap();
        pairs.push(parse_override("n_cells=80").unwrap());
        assert_eq!(ExperimentConfig::from_pairs(&pairs).unwrap().n_cells, 80);
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn plane_source_initial_data() {
        let c = ExperimentConfig::preset(Problem::PlaneSource);
        let mesh = c.mesh().unwrap();
        let g = cutoff_gaussian(&c, &mesh);
        assert!((gaussian(0.0, 0.03) - 13.298_076_013_381_09).abs() < 1e-9);
        assert_eq!(g[0], 1e-4);
        let peak = g.max();
        assert!(peak > 10.0 && peak <= 13.3);
        let mut full = c.clone();
        full.solver = SolverKind::FullConservative;
        let dx = mesh.dx();
        let a = state_mass(&init_plane_source(&c).unwrap(), dx);
        let b = state_mass(&init_plane_source(&full).unwrap(), dx);
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn low_rank_init_is_padded() {
        let c = small(Problem::PlaneSource, SolverKind::Dlra);
        match init_plane_source(&c).unwrap() {
            SimState::LowRank(s) => {
                assert_eq!(s.rank(), 4);
                assert!(s.orthonormality_defect() < 1e-12);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn external_source_profile() {
        let mut c = ExperimentConfig::preset(Problem::ExternalSource);
        c.n_cells = 20;
        c.n_moments = 4;
        c.initial_rank = 2;
        let (_, q) = init_external_source(&c).unwrap();
        let mesh = c.mesh().unwrap();
        for j in 0..20 {
            let x = mesh.center(j);
            assert_eq!(q[j], if x.abs() <= 0.5 { 1.0 } else { 0.0 }, "x = {x}");
        }
        // Cell centre exactly on the boundary of the source region.
        c.n_cells = 40;
        let mesh = c.mesh().unwrap();
        assert_eq!(mesh.center(20), 0.25);
        c.source_half_width = 0.25;
        let q = source_profile(&c, &mesh).unwrap();
        assert_eq!(q[20], 1.0);
        assert_eq!(q[21], 0.0);
    }

    #[test]
    fn steps_land_on_end_time() {
        let c = small(Problem::PlaneSource, SolverKind::FullConservative);
        let (sim, summary) = simulate(&c, |_, _| Ok(())).unwrap();
        assert_eq!(sim.t, 0.5);
        let dt = c.cfl * c.mesh().unwrap().dx();
        assert_eq!(summary.steps, (0.5 / dt).ceil() as usize);
        assert!(summary.mass_drift() < 1e-13);
    }

    #[test]
    fn zero_end_time_writes_only_initial_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Problem::PlaneSource, SolverKind::Dlra);
        c.t_end = 0.0;
        c.output_dir = dir.path().to_path_buf();
        let s = run_experiment(&c).unwrap();
        assert_eq!(s.steps, 0);
        let diag = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(diag.lines().count(), 2);
        assert!(dir.path().join("snapshot_t0.csv").exists());
        assert!(dir.path().join("fxmu_t0.csv").exists());
    }

    #[test]
    fn time_labels() {
        assert_eq!(time_label(0.0), "0");
        assert_eq!(time_label(8.0), "8");
        assert_eq!(time_label(3.16), "3.16");
        assert_eq!(time_label(0.1 + 0.2), "0.3");
    }

    #[test]
    fn source_run_is_conservative_in_the_local_sense() {
        let c = small(Problem::ExternalSource, SolverKind::Dlra);
        let (_, s) = simulate(&c, |_, _| Ok(())).unwrap();
        assert!(s.max_conservation_residual < 1e-12, "{}", s.max_conservation_residual);
        // The source adds mass.
        assert!(s.final_mass > s.initial_mass);
    }
}
