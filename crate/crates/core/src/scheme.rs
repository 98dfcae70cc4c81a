//! Fully discrete semi-implicit stepper.
//!
//! One step `m → m+1` consists of
//!
//! 1. the position solve: for each coordinate, the cyclic system with rows
//!    ```text
//!    [(q_{i+1}+q_i)/(2δ) + 1/q_i + 1/q_{i+1}] u_i' - u_{i-1}'/q_i - u_{i+1}'/q_{i+1}
//!        = (q_{i+1}+q_i)/2 (u_i/δ + s_u(x_i, t')) + ½ f(c_i) (u_{i+1} - u_{i-1})^⊥
//!    ```
//!    with all `q` taken at step `m` (lumped mass, P1 stiffness);
//! 2. the field solve with consistent P1 mass on the new lengths (left) and
//!    the old lengths (right), stiffness on the new lengths;
//! 3. the guard: the run stops once a segment is shorter than `tol`.

use std::sync::Arc;

use crate::cyclic::CyclicTridiagonal;
use crate::geometry::{segment_lengths, DiscreteCurve, PolygonGeometry, SurfaceField, Vec2};
use crate::mesh::PeriodicMesh;
use crate::problems::ProblemSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    /// Minimum admissible segment length.
    pub tol: f64,
}

impl SolverConfig {
    /// Config with the default guard `tol = 1e-3 h`.
    pub fn new(n: usize, dt: f64, t_max: f64) -> Result<Self> {
        let cfg = Self {
            n,
            dt,
            t_max,
            tol: 1e-3 / n.max(1) as f64,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Time step `δ = h²` on the uniform grid with `n` nodes.
    pub fn with_h2_step(n: usize, t_max: f64) -> Result<Self> {
        let h = 1.0 / n.max(1) as f64;
        Self::new(n, h * h, t_max)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    /// `M = round(T/δ)`.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidConfig(format!("need at least 3 nodes, got {}", self.n)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if !self.t_max.is_finite() || self.t_max < self.dt || self.steps() < 1 {
            return Err(Error::InvalidConfig(format!(
                "final time {} admits no step of size {}",
                self.t_max, self.dt
            )));
        }
        Ok(())
    }
}

/// Discrete state at time `t = m δ`.
#[derive(Debug, Clone)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub mesh: Arc<PeriodicMesh>,
    pub positions: Vec<Vec2>,
    pub field: Vec<f64>,
    /// Geometry of `positions`.
    pub geom: PolygonGeometry,
}

impl SimState {
    pub fn curve(&self) -> DiscreteCurve {
        DiscreteCurve {
            mesh: self.mesh.clone(),
            positions: self.positions.clone(),
        }
    }

    pub fn surface_field(&self) -> SurfaceField {
        SurfaceField {
            mesh: self.mesh.clone(),
            values: self.field.clone(),
        }
    }

    pub fn min_segment(&self) -> f64 {
        self.geom.min_segment()
    }
}

/// Per-step callback; receives read-only snapshots.
pub trait Observer {
    fn on_start(&mut self, _state: &SimState) {}
    fn on_step(&mut self, prev: &SimState, next: &SimState);
}

impl<F: FnMut(&SimState, &SimState)> Observer for F {
    fn on_step(&mut self, prev: &SimState, next: &SimState) {
        self(prev, next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbortInfo {
    /// Index of the step that produced the short segment.
    pub step: usize,
    pub time: f64,
    pub min_len: f64,
    pub tol: f64,
}

impl From<AbortInfo> for Error {
    fn from(a: AbortInfo) -> Self {
        Error::Aborted {
            step: a.step,
            time: a.time,
            min_len: a.min_len,
            tol: a.tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub steps_completed: usize,
    pub final_state: SimState,
    pub abort: Option<AbortInfo>,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

pub fn initialize(problem: &ProblemSpec, config: &SolverConfig) -> Result<SimState> {
    config.validate()?;
    let mesh = Arc::new(PeriodicMesh::uniform(config.n)?);
    let positions = mesh.interpolate(|x| (problem.u0)(x));
    let field = mesh.interpolate(|x| (problem.c0)(x));
    let min_len = segment_lengths(&positions).into_iter().fold(f64::INFINITY, f64::min);
    if !(min_len >= config.tol) {
        return Err(Error::DegenerateInitialCurve {
            min_len,
            tol: config.tol,
        });
    }
    let geom = PolygonGeometry::from_positions(&positions)?;
    Ok(SimState {
        step: 0,
        time: 0.0,
        mesh,
        positions,
        field,
        geom,
    })
}

/// Matrix of the position solve; identical for both coordinates.
pub fn position_matrix(q: &[f64], dt: f64) -> Result<CyclicTridiagonal> {
    let n = q.len();
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n);
    for i in 0..n {
        let qn = q[(i + 1) % n];
        diag.push((q[i] + qn) / (2.0 * dt) + 1.0 / q[i] + 1.0 / qn);
        off.push(-1.0 / qn);
    }
    CyclicTridiagonal::new(diag, off)
}

/// Right-hand sides (x and y components) of the position solve.
pub fn position_rhs(state: &SimState, dt: f64, problem: &ProblemSpec) -> (Vec<f64>, Vec<f64>) {
    let n = state.positions.len();
    let q = &state.geom.q;
    let u = &state.positions;
    let t_next = (state.step + 1) as f64 * dt;
    let nodes = state.mesh.nodes();
    let mut bx = Vec::with_capacity(n);
    let mut by = Vec::with_capacity(n);
    for i in 0..n {
        let (p, k) = ((i + n - 1) % n, (i + 1) % n);
        let mass = 0.5 * (q[i] + q[k]);
        let b = mass * (u[i] / dt + problem.s_u(nodes[i], t_next))
            + 0.5 * problem.f(state.field[i]) * (u[k] - u[p]).perp();
        bx.push(b.x);
        by.push(b.y);
    }
    (bx, by)
}

/// New vertex positions `u^{(m+1)}`.
pub fn position_step(state: &SimState, config: &SolverConfig, problem: &ProblemSpec) -> Result<Vec<Vec2>> {
    let lu = position_matrix(&state.geom.q, config.dt)?.factorize()?;
    let (bx, by) = position_rhs(state, config.dt, problem);
    let (x, y) = (lu.solve(&bx), lu.solve(&by));
    Ok(x.into_iter().zip(y).map(|(x, y)| Vec2::new(x, y)).collect())
}

/// Consistent mass (`1/3`, `1/6` weights) over `δ` plus stiffness, on lengths `q`.
pub fn field_matrix(q: &[f64], dt: f64) -> Result<CyclicTridiagonal> {
    let n = q.len();
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n);
    for j in 0..n {
        let qn = q[(j + 1) % n];
        diag.push((q[j] + qn) / (3.0 * dt) + 1.0 / qn + 1.0 / q[j]);
        off.push(qn / (6.0 * dt) - 1.0 / qn);
    }
    CyclicTridiagonal::new(diag, off)
}

/// Old mass matrix over `δ` applied to `c^{(m)} + δ I_h s_c(·, t^{(m+1)})`.
pub fn field_rhs(state: &SimState, dt: f64, problem: &ProblemSpec) -> Vec<f64> {
    let n = state.field.len();
    let q = &state.geom.q;
    let t_next = (state.step + 1) as f64 * dt;
    let nodes = state.mesh.nodes();
    let w: Vec<f64> = match &problem.source_c {
        Some(s) => state
            .field
            .iter()
            .zip(nodes)
            .map(|(&c, &x)| c + dt * s(x, t_next))
            .collect(),
        None => state.field.clone(),
    };
    (0..n)
        .map(|j| {
            let (p, k) = ((j + n - 1) % n, (j + 1) % n);
            ((q[k] + q[j]) * w[j] / 3.0 + q[k] * w[k] / 6.0 + q[j] * w[p] / 6.0) / dt
        })
        .collect()
}

/// New field values `c^{(m+1)}` given the new segment lengths.
pub fn field_step(state: &SimState, q_new: &[f64], config: &SolverConfig, problem: &ProblemSpec) -> Result<Vec<f64>> {
    let a = field_matrix(q_new, config.dt)?;
    let b = field_rhs(state, config.dt, problem);
    a.solve(&b)
}

pub enum StepOutcome {
    Advanced,
    Aborted(AbortInfo),
}

/// Stepper holding the current state; see [`run`] for the driver.
pub struct Simulation<'a> {
    problem: &'a ProblemSpec,
    config: SolverConfig,
    state: SimState,
}

impl<'a> Simulation<'a> {
    pub fn new(problem: &'a ProblemSpec, config: SolverConfig) -> Result<Self> {
        let state = initialize(problem, &config)?;
        Ok(Self { problem, config, state })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    /// Advances one step. On a guard violation the state is left unchanged.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let positions = position_step(&self.state, &self.config, self.problem)?;
        let q_new = segment_lengths(&positions);
        let min_len = q_new.iter().copied().fold(f64::INFINITY, f64::min);
        let step = self.state.step + 1;
        let time = step as f64 * self.config.dt;
        if !(min_len >= self.config.tol) {
            return Ok(StepOutcome::Aborted(AbortInfo {
                step,
                time,
                min_len,
                tol: self.config.tol,
            }));
        }
        let field = field_step(&self.state, &q_new, &self.config, self.problem)?;
        let geom = PolygonGeometry::from_positions(&positions)?;
        self.state = SimState {
            step,
            time,
            mesh: self.state.mesh.clone(),
            positions,
            field,
            geom,
        };
        Ok(StepOutcome::Advanced)
    }
}

/// Runs `M = round(T/δ)` steps, invoking every observer after each
/// completed step. A guard violation ends the run early and is reported in
/// [`RunResult::abort`].
pub fn run(problem: &ProblemSpec, config: &SolverConfig, observers: &mut [&mut dyn Observer]) -> Result<RunResult> {
    let mut sim = Simulation::new(problem, *config)?;
    for obs in observers.iter_mut() {
        obs.on_start(sim.state());
    }
    let total = config.steps();
    let mut abort = None;
    while sim.state().step < total {
        let prev = sim.state().clone();
        match sim.step()? {
            StepOutcome::Advanced => {
                for obs in observers.iter_mut() {
                    obs.on_step(&prev, sim.state());
                }
            }
            StepOutcome::Aborted(info) => {
                abort = Some(info);
                break;
            }
        }
    }
    let final_state = sim.into_state();
    Ok(RunResult {
        steps_completed: final_state.step,
        final_state,
        abort,
    })
}
