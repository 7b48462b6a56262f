//! Radially symmetric method-of-lines solver on a ball in dimension `n >= 3`.
//!
//! Cells are uniform shells `[r_j, r_{j+1}]` with cell-centred values. All three
//! equations are written in conservative finite-volume form; the face at the
//! origin has zero area, so `(n − 1)/r` is never evaluated. Neumann conditions
//! are zero flux through `r = R`.
//!
//! Time stepping is IMEX: diffusion and the linear decay of `v`, `w` are
//! implicit (tridiagonal solves), chemotactic fluxes and `g(u)` explicit. The
//! chemotactic flux `u (χ ∂_r v − ξ ∂_r w)` is upwinded by the sign of the face
//! velocity, which together with the explicit-rate restriction on `dt` keeps
//! `u` nonnegative for the first-order scheme.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{ExponentError, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Model(#[from] ExponentError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid initial profile: {0}")]
    Profile(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("non-finite state after step at t = {t}")]
    NonFinite { t: f64 },
}

pub type Result<T> = std::result::Result<T, PdeError>;

/// Surface area of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: u32) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut area, mut k) = if n.is_multiple_of(2) { (2.0 * pi, 2) } else { (2.0, 1) };
    while k < n {
        area *= 2.0 * pi / k as f64;
        k += 2;
    }
    area
}

/// Uniform radial shells on the ball of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub dim: u32,
    pub radius: f64,
    pub cells: usize,
    pub r_faces: Vec<f64>,
    pub r_centers: Vec<f64>,
    /// `ω ∫ r^{n−1} dr` over each shell.
    pub shell_measures: Vec<f64>,
    /// `ω r^{n−1}` at each face.
    pub face_areas: Vec<f64>,
    /// Measure between neighbouring centres, attached to interior faces; zero
    /// on the two boundary faces.
    pub dual_measures: Vec<f64>,
    spacing: f64,
}

impl RadialGrid {
    pub fn new(dim: u32, radius: f64, cells: usize) -> Result<Self> {
        if dim < 3 {
            return Err(PdeError::Grid(format!("dimension {dim} below 3")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PdeError::Grid(format!("radius {radius} must be positive")));
        }
        if cells < 2 {
            return Err(PdeError::Grid(format!("need at least 2 cells, got {cells}")));
        }
        let h = radius / cells as f64;
        let omega = unit_sphere_area(dim);
        let nf = dim as f64;
        let ball = |r: f64| omega * r.powi(dim as i32) / nf;
        let r_faces: Vec<f64> = (0..=cells).map(|j| j as f64 * h).collect();
        let r_centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
        let shell_measures = r_faces.windows(2).map(|w| ball(w[1]) - ball(w[0])).collect();
        let face_areas = r_faces
            .iter()
            .map(|&r| omega * r.powi(dim as i32 - 1))
            .collect();
        let mut dual_measures = vec![0.0; cells + 1];
        for j in 1..cells {
            dual_measures[j] = ball(r_centers[j]) - ball(r_centers[j - 1]);
        }
        Ok(Self {
            dim,
            radius,
            cells,
            r_faces,
            r_centers,
            shell_measures,
            face_areas,
            dual_measures,
            spacing: h,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `|Ω| = ω R^n / n`.
    pub fn volume(&self) -> f64 {
        unit_sphere_area(self.dim) * self.radius.powi(self.dim as i32) / self.dim as f64
    }

    /// Discrete derivative at every face; zero on the two boundary faces.
    pub fn face_gradients(&self, f: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.cells + 1];
        for j in 1..self.cells {
            g[j] = (f[j] - f[j - 1]) / self.spacing;
        }
        g
    }

    /// `Σ V_i |f_i|^p`.
    pub fn integrate_power(&self, f: &[f64], p: f64) -> f64 {
        self.shell_measures
            .iter()
            .zip(f)
            .map(|(v, x)| v * x.abs().powf(p))
            .sum()
    }

    /// `Σ D_j |∂f_j|^r` over interior faces.
    pub fn integrate_gradient_power(&self, f: &[f64], r: f64) -> f64 {
        self.face_gradients(f)
            .iter()
            .zip(&self.dual_measures)
            .map(|(g, d)| d * g.abs().powf(r))
            .sum()
    }

    /// Samples a radial profile at the cell centres.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.r_centers.iter().map(|&r| f(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl FieldState {
    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.w)
            .all(|x| x.is_finite())
    }
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        u: f64,
        v: f64,
        w: f64,
    },
    /// `u = background + amplitude·exp(−r²/(2 width²))`, constant `v`, `w`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        background: f64,
        #[serde(default)]
        v: f64,
        #[serde(default)]
        w: f64,
    },
    /// Cell-centred values, one per shell.
    Table {
        u: Vec<f64>,
        v: Vec<f64>,
        w: Vec<f64>,
    },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::GaussianBump {
            amplitude: 1000.0,
            width: 0.1,
            background: 0.0,
            v: 0.0,
            w: 0.0,
        }
    }
}

pub fn init_state(grid: &RadialGrid, profile: &Profile) -> Result<FieldState> {
    let (u, v, w) = match profile {
        Profile::Constant { u, v, w } => (
            vec![*u; grid.cells],
            vec![*v; grid.cells],
            vec![*w; grid.cells],
        ),
        Profile::GaussianBump {
            amplitude,
            width,
            background,
            v,
            w,
        } => {
            if !(*width > 0.0) {
                return Err(PdeError::Profile(format!("bump width {width} must be positive")));
            }
            let u = grid.sample(|r| background + amplitude * (-r * r / (2.0 * width * width)).exp());
            (u, vec![*v; grid.cells], vec![*w; grid.cells])
        }
        Profile::Table { u, v, w } => {
            for (name, f) in [("u", u), ("v", v), ("w", w)] {
                if f.len() != grid.cells {
                    return Err(PdeError::Profile(format!(
                        "table {name} has {} entries for {} cells",
                        f.len(),
                        grid.cells
                    )));
                }
            }
            (u.clone(), v.clone(), w.clone())
        }
    };
    for (name, f) in [("u", &u), ("v", &v), ("w", &w)] {
        if let Some((i, x)) = f.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
            return Err(PdeError::Profile(format!("{name}[{i}] = {x} is negative or non-finite")));
        }
    }
    Ok(FieldState { t: 0.0, u, v, w })
}

/// `(1/p)∫u^p + (1/q)∫|∂_r v|^q + (1/q)∫|∂_r w|^q`.
pub fn energy(grid: &RadialGrid, state: &FieldState, p: f64, q: f64) -> f64 {
    grid.integrate_power(&state.u, p) / p
        + (grid.integrate_gradient_power(&state.v, q) + grid.integrate_gradient_power(&state.w, q)) / q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub lp_u: f64,
    pub linf_u: f64,
    pub grad_inf_v: f64,
    pub grad_inf_w: f64,
}

fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norms(grid: &RadialGrid, state: &FieldState, p: f64) -> Norms {
    Norms {
        lp_u: grid.integrate_power(&state.u, p).powf(1.0 / p),
        linf_u: max_abs(&state.u),
        grad_inf_v: max_abs(&grid.face_gradients(&state.v)),
        grad_inf_w: max_abs(&grid.face_gradients(&state.w)),
    }
}

pub fn mass(grid: &RadialGrid, state: &FieldState) -> f64 {
    grid.shell_measures.iter().zip(&state.u).map(|(v, u)| v * u).sum()
}

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
/// `lower[i]` couples rows `i` and `i − 1`; `lower[0]` is unused.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    // upper[i] = lower[i + 1]
    let mut denom = diag[0];
    rhs[0] /= denom;
    for i in 1..n {
        scratch[i - 1] = lower[i] / denom;
        denom = diag[i] - lower[i] * scratch[i - 1];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Backward Euler for the implicit part, forward Euler for the explicit part.
    #[default]
    ImexEuler,
    /// Crank-Nicolson / Adams-Bashforth 2 (variable step). Second order, not
    /// positivity preserving.
    Cnab2,
}

/// One-step integrator bound to a grid and a parameter set.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    grid: &'a RadialGrid,
    params: &'a ModelParams,
    scheme: TimeScheme,
    /// `A_j / h` at each face; zero on the boundary faces.
    transmissivity: Vec<f64>,
    history: Option<(Vec<f64>, f64)>,
    clips: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a RadialGrid, params: &'a ModelParams, scheme: TimeScheme) -> Self {
        let mut transmissivity: Vec<f64> = grid
            .face_areas
            .iter()
            .map(|a| a / grid.spacing)
            .collect();
        transmissivity[0] = 0.0;
        transmissivity[grid.cells] = 0.0;
        Self {
            grid,
            params,
            scheme,
            transmissivity,
            history: None,
            clips: 0,
        }
    }

    /// Number of negative values floored to zero so far.
    pub fn clip_count(&self) -> usize {
        self.clips
    }

    fn face_velocity(&self, state: &FieldState) -> Vec<f64> {
        let gv = self.grid.face_gradients(&state.v);
        let gw = self.grid.face_gradients(&state.w);
        gv.iter()
            .zip(&gw)
            .map(|(a, b)| self.params.chi * a - self.params.xi * b)
            .collect()
    }

    fn logistic(&self, u: f64) -> f64 {
        let p = self.params;
        if p.mu2 == 0.0 {
            p.mu1 * u
        } else {
            p.mu1 * u - p.mu2 * u.powf(p.k_logistic)
        }
    }

    /// Explicit tendency of `u`: upwinded chemotactic divergence plus `g(u)`.
    fn explicit_u(&self, state: &FieldState) -> Vec<f64> {
        let g = self.grid;
        let vel = self.face_velocity(state);
        let mut flux = vec![0.0; g.cells + 1];
        for j in 1..g.cells {
            let upwind = if vel[j] > 0.0 { state.u[j - 1] } else { state.u[j] };
            flux[j] = g.face_areas[j] * vel[j] * upwind;
        }
        (0..g.cells)
            .map(|i| -(flux[i + 1] - flux[i]) / g.shell_measures[i] + self.logistic(state.u[i]))
            .collect()
    }

    /// Largest `dt` for which the explicit update is a positive combination,
    /// scaled by `safety`.
    pub fn explicit_dt_limit(&self, state: &FieldState, safety: f64) -> f64 {
        let g = self.grid;
        let p = self.params;
        let vel = self.face_velocity(state);
        let mut rate: f64 = 0.0;
        for i in 0..g.cells {
            let out = g.face_areas[i + 1] * vel[i + 1].max(0.0) + g.face_areas[i] * (-vel[i]).max(0.0);
            let mut r = out / g.shell_measures[i] + (-p.mu1).max(0.0);
            if p.mu2 > 0.0 && state.u[i] > 0.0 {
                r += p.mu2 * state.u[i].powf(p.k_logistic - 1.0);
            }
            rate = rate.max(r);
        }
        if rate > 0.0 {
            safety / rate
        } else {
            f64::INFINITY
        }
    }

    /// `(V(1 + θ dt decay) + θ dt K) x = rhs`, `K` the stiffness matrix.
    fn implicit_solve(&self, theta_dt: f64, decay: f64, rhs: &mut [f64]) {
        let g = self.grid;
        let t = &self.transmissivity;
        let n = g.cells;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            diag[i] = g.shell_measures[i] * (1.0 + theta_dt * decay) + theta_dt * (t[i] + t[i + 1]);
            lower[i] = -theta_dt * t[i];
        }
        let mut scratch = vec![0.0; n];
        solve_tridiagonal(&lower, &diag, rhs, &mut scratch);
    }

    /// `K x`, the discrete `−Δ` weighted by shell measure.
    fn stiffness_apply(&self, x: &[f64]) -> Vec<f64> {
        let t = &self.transmissivity;
        let n = self.grid.cells;
        (0..n)
            .map(|i| {
                let mut y = (t[i] + t[i + 1]) * x[i];
                if i > 0 {
                    y -= t[i] * x[i - 1];
                }
                if i + 1 < n {
                    y -= t[i + 1] * x[i + 1];
                }
                y
            })
            .collect()
    }

    fn clip(&mut self, f: &mut [f64]) {
        for x in f.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
                self.clips += 1;
            }
        }
    }

    /// Advances `state` by `dt`. Fails without touching the history when the
    /// result is not finite.
    pub fn step(&mut self, state: &FieldState, dt: f64) -> Result<FieldState> {
        if !(dt > 0.0) {
            return Err(PdeError::Config(format!("dt = {dt} must be positive")));
        }
        let g = self.grid;
        let p = self.params;
        let vol = &g.shell_measures;
        let explicit = self.explicit_u(state);
        let n = g.cells;

        let (mut u, mut v, mut w) = match self.scheme {
            TimeScheme::ImexEuler => {
                let mut u: Vec<f64> = (0..n).map(|i| vol[i] * (state.u[i] + dt * explicit[i])).collect();
                self.implicit_solve(dt, 0.0, &mut u);
                let mut v: Vec<f64> = (0..n).map(|i| vol[i] * (state.v[i] + dt * p.beta * u[i])).collect();
                self.implicit_solve(dt, p.alpha, &mut v);
                let mut w: Vec<f64> = (0..n).map(|i| vol[i] * (state.w[i] + dt * p.delta * u[i])).collect();
                self.implicit_solve(dt, p.gamma, &mut w);
                (u, v, w)
            }
            TimeScheme::Cnab2 => {
                let half = 0.5 * dt;
                let extrap: Vec<f64> = match &self.history {
                    Some((prev, dt_prev)) => {
                        let r = dt / dt_prev;
                        explicit
                            .iter()
                            .zip(prev)
                            .map(|(e, ep)| (1.0 + 0.5 * r) * e - 0.5 * r * ep)
                            .collect()
                    }
                    None => explicit.clone(),
                };
                let ku = self.stiffness_apply(&state.u);
                let mut u: Vec<f64> = (0..n)
                    .map(|i| vol[i] * state.u[i] - half * ku[i] + dt * vol[i] * extrap[i])
                    .collect();
                self.implicit_solve(half, 0.0, &mut u);
                let kv = self.stiffness_apply(&state.v);
                let mut v: Vec<f64> = (0..n)
                    .map(|i| {
                        vol[i] * state.v[i] * (1.0 - half * p.alpha) - half * kv[i]
                            + half * p.beta * vol[i] * (u[i] + state.u[i])
                    })
                    .collect();
                self.implicit_solve(half, p.alpha, &mut v);
                let kw = self.stiffness_apply(&state.w);
                let mut w: Vec<f64> = (0..n)
                    .map(|i| {
                        vol[i] * state.w[i] * (1.0 - half * p.gamma) - half * kw[i]
                            + half * p.delta * vol[i] * (u[i] + state.u[i])
                    })
                    .collect();
                self.implicit_solve(half, p.gamma, &mut w);
                (u, v, w)
            }
        };

        let next = FieldState {
            t: state.t + dt,
            u: std::mem::take(&mut u),
            v: std::mem::take(&mut v),
            w: std::mem::take(&mut w),
        };
        if !next.is_finite() {
            return Err(PdeError::NonFinite { t: next.t });
        }
        let mut next = next;
        self.clip(&mut next.u);
        self.clip(&mut next.v);
        self.clip(&mut next.w);
        if self.scheme == TimeScheme::Cnab2 {
            self.history = Some((explicit, dt));
        }
        Ok(next)
    }
}

/// One first-order IMEX step.
pub fn step(grid: &RadialGrid, params: &ModelParams, state: &FieldState, dt: f64) -> Result<FieldState> {
    Stepper::new(grid, params, TimeScheme::ImexEuler).step(state, dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub t_end: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub blowup_threshold: f64,
    /// Fraction of the explicit positivity limit allowed per step.
    pub cfl: f64,
    pub growth: f64,
    /// Record a sample every `sample_stride` accepted steps.
    pub sample_stride: usize,
    pub max_steps: usize,
    pub scheme: TimeScheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt_initial: 1e-5,
            dt_max: 1e-3,
            dt_min: 1e-12,
            blowup_threshold: 1e8,
            cfl: 0.5,
            growth: 1.2,
            sample_stride: 1,
            max_steps: 1_000_000,
            scheme: TimeScheme::ImexEuler,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_end > 0.0
            && self.dt_initial > 0.0
            && self.dt_max >= self.dt_initial
            && self.dt_min > 0.0
            && self.dt_min <= self.dt_initial
            && self.blowup_threshold > 0.0
            && self.cfl > 0.0
            && self.cfl <= 1.0
            && self.growth >= 1.0
            && self.sample_stride >= 1
            && self.max_steps >= 1;
        if ok {
            Ok(())
        } else {
            Err(PdeError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub params: ModelParams,
    pub cells: usize,
    pub profile: Profile,
    pub p: f64,
    pub q: f64,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupTrigger {
    LinfThreshold,
    DtUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub blew_up: bool,
    pub t_detect: Option<f64>,
    pub trigger: Option<BlowupTrigger>,
    pub final_time: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    /// The run stopped on `max_steps` before `t_end` without blowing up,
    /// typically a collapse saturated at grid resolution.
    pub step_limit_reached: bool,
    pub clip_count: usize,
    /// Set for blow-up runs with logistic damping, where no blow-up theory is
    /// available.
    pub exploratory: bool,
    pub cells: usize,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub energy: f64,
    pub lp_u: f64,
    pub linf_u: f64,
    pub grad_inf_v: f64,
    pub grad_inf_w: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub p: f64,
    pub q: f64,
    pub volume: f64,
    pub samples: Vec<Sample>,
    pub report: BlowupReport,
}

impl Trajectory {
    pub fn initial_energy(&self) -> f64 {
        self.samples[0].energy
    }

    pub fn write_csv<W: Write>(&self, out: W, config_hash: Option<&str>) -> std::io::Result<()> {
        let mut out = out;
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "E_pq", "Lp_u", "Linf_u", "gradinf_v", "gradinf_w", "mass"])?;
        for s in &self.samples {
            w.write_record(
                [s.t, s.energy, s.lp_u, s.linf_u, s.grad_inf_v, s.grad_inf_w, s.mass]
                    .map(|x| format!("{x:e}")),
            )?;
        }
        w.flush()
    }
}

fn sample(grid: &RadialGrid, state: &FieldState, p: f64, q: f64) -> Sample {
    let nm = norms(grid, state, p);
    Sample {
        t: state.t,
        energy: energy(grid, state, p, q),
        lp_u: nm.lp_u,
        linf_u: nm.linf_u,
        grad_inf_v: nm.grad_inf_v,
        grad_inf_w: nm.grad_inf_w,
        mass: mass(grid, state),
    }
}

/// Runs to `t_end` or numerical blow-up, whichever comes first.
///
/// `dt` is halved while it exceeds the explicit positivity limit or the step
/// produces non-finite values, and grows by `growth` after steps that needed no
/// reduction. Blow-up is declared when `‖u‖_∞` exceeds the threshold or `dt`
/// would drop below `dt_min`.
pub fn run(config: &SimulationConfig) -> Result<(Trajectory, FieldState)> {
    config.params.validate_for_simulation()?;
    config.solver.validate()?;
    if !(config.p > 0.0 && config.q > 0.0) {
        return Err(PdeError::Config(format!(
            "energy exponents p = {}, q = {} must be positive",
            config.p, config.q
        )));
    }
    let grid = RadialGrid::new(config.params.dim, config.params.domain.radius, config.cells)?;
    let mut state = init_state(&grid, &config.profile)?;
    let sc = &config.solver;
    let mut stepper = Stepper::new(&grid, &config.params, sc.scheme);
    let (p, q) = (config.p, config.q);

    let mut samples = vec![sample(&grid, &state, p, q)];
    let mut dt = sc.dt_initial;
    let mut steps = 0;
    let mut rejected = 0;
    let mut trigger = None;
    let finish = sc.t_end * (1.0 - 1e-14);

    while state.t < finish && steps < sc.max_steps {
        let mut trial = dt.min(sc.dt_max).min(sc.t_end - state.t);
        let mut reduced = false;
        let limit = stepper.explicit_dt_limit(&state, sc.cfl);
        while trial > limit {
            trial /= 2.0;
            reduced = true;
        }
        if trial < sc.dt_min {
            trigger = Some(BlowupTrigger::DtUnderflow);
            break;
        }
        let next = match stepper.step(&state, trial) {
            Ok(next) => next,
            Err(PdeError::NonFinite { .. }) => {
                rejected += 1;
                dt = trial / 2.0;
                if dt < sc.dt_min {
                    trigger = Some(BlowupTrigger::DtUnderflow);
                    break;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        state = next;
        steps += 1;
        let linf = max_abs(&state.u);
        let blown = linf > sc.blowup_threshold;
        if steps % sc.sample_stride == 0 || blown || state.t >= finish {
            samples.push(sample(&grid, &state, p, q));
        }
        if blown {
            trigger = Some(BlowupTrigger::LinfThreshold);
            break;
        }
        dt = if reduced { trial } else { trial * sc.growth };
        // a step clipped by t_end should not shrink the nominal step
        dt = dt.max(trial);
    }
    if samples.last().map(|s| s.t) != Some(state.t) {
        samples.push(sample(&grid, &state, p, q));
    }

    let blew_up = trigger.is_some();
    let report = BlowupReport {
        blew_up,
        t_detect: blew_up.then_some(state.t),
        trigger,
        final_time: state.t,
        steps,
        rejected_steps: rejected,
        step_limit_reached: !blew_up && state.t < finish,
        clip_count: stepper.clip_count(),
        exploratory: blew_up && config.params.mu2 > 0.0,
        cells: config.cells,
        solver: sc.clone(),
    };
    Ok((
        Trajectory {
            p,
            q,
            volume: grid.volume(),
            samples,
            report,
        },
        state,
    ))
}
