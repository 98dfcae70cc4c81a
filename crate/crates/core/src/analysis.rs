//! Error functionals against exact solutions, experimental orders of
//! convergence and the spatial/temporal convergence studies.
//!
//! For a run with steps `m = 0..M` the monitored errors are
//!
//! ```text
//! E1 = max_m ∫ |c - c_h|²                 E2 = max_m ∫ |τ - τ_h|²
//! E3 = max_m ∫ (|u_x| - |u_hx|)²
//! E4 = Σ_{m<M} δ ∫ |u_t(t^{m+1}) - (u_h^{m+1} - u_h^m)/δ|²
//! E5 = Σ_{m<M} δ ∫ |c_x(t^{m+1}) - c_hx^{m+1}|²
//! ```
//!
//! with every integral evaluated segment-wise by a selectable quadrature rule.
//! The optional E6 is `max_m ∫ |u - u_h|² + |u_x - u_hx|²`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::problems::{ExactSolution, ProblemSpec};
use crate::quadrature::{QuadRule, Quadrature};
use crate::scheme::{run, Observer, SimState, SolverConfig};
use crate::{Error, Result};

pub use crate::quadrature::{gauss_segment_integrate, segment_integrate};

pub const DEFAULT_QUADRATURE: Quadrature = Quadrature::Gauss(5);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SnapshotErrors {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

/// Visits every quadrature point as `(segment, left node, right node, λ, x, weight·h)`.
fn for_each_point(state: &SimState, rule: &QuadRule, mut f: impl FnMut(usize, usize, f64, f64, f64)) {
    let n = state.mesh.len();
    for j in 0..n {
        let (a, b) = state.mesh.segment(j);
        let h = b - a;
        let left = if j == 0 { n - 1 } else { j - 1 };
        for (&lam, &w) in rule.points.iter().zip(&rule.weights) {
            f(j, left, lam, a + lam * h, w * h);
        }
    }
}

/// `∫|c - c_h|²`, `∫|τ - τ_h|²` and `∫(|u_x| - |u_hx|)²` at the state's time.
pub fn snapshot_errors(state: &SimState, exact: &ExactSolution, rule: &QuadRule) -> SnapshotErrors {
    let t = state.time;
    let seg = state.mesh.segment_lengths();
    let mut out = SnapshotErrors::default();
    for_each_point(state, rule, |j, left, lam, x, wh| {
        let ch = (1.0 - lam) * state.field[left] + lam * state.field[j];
        let ux = (exact.u_x)(x, t);
        let len = ux.norm();
        let dc = (exact.c)(x, t) - ch;
        out.e1 += wh * dc * dc;
        out.e2 += wh * (ux / len - state.geom.tau[j]).norm_sq();
        let dl = len - state.geom.q[j] / seg[j];
        out.e3 += wh * dl * dl;
    });
    out
}

/// `(∫|u_t - Δu_h/δ|², ∫|c_x - c_hx|²)` for the step `prev → next`, with
/// the exact derivatives taken at the new time.
pub fn step_integrals(prev: &SimState, next: &SimState, exact: &ExactSolution, dt: f64, rule: &QuadRule) -> (f64, f64) {
    let t = next.time;
    let seg = next.mesh.segment_lengths();
    let (mut e4, mut e5) = (0.0, 0.0);
    for_each_point(next, rule, |j, left, lam, x, wh| {
        let dl = (next.positions[left] - prev.positions[left]) / dt;
        let dr = (next.positions[j] - prev.positions[j]) / dt;
        let vh = dl * (1.0 - lam) + dr * lam;
        e4 += wh * ((exact.u_t)(x, t) - vh).norm_sq();
        let chx = (next.field[j] - next.field[left]) / seg[j];
        let d = (exact.c_x)(x, t) - chx;
        e5 += wh * d * d;
    });
    (e4, e5)
}

/// `∫ |u - u_h|² + |u_x - u_hx|²`.
pub fn h1_position_error(state: &SimState, exact: &ExactSolution, rule: &QuadRule) -> f64 {
    let t = state.time;
    let seg = state.mesh.segment_lengths();
    let mut acc = 0.0;
    for_each_point(state, rule, |j, left, lam, x, wh| {
        let uh = state.positions[left] * (1.0 - lam) + state.positions[j] * lam;
        let uhx = (state.positions[j] - state.positions[left]) / seg[j];
        acc += wh * (((exact.u)(x, t) - uh).norm_sq() + ((exact.u_x)(x, t) - uhx).norm_sq());
    });
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub problem: String,
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    pub steps: usize,
    /// `E1..E5`.
    pub errors: [f64; 5],
    pub e6: Option<f64>,
}

/// Observer accumulating the error functionals along a run.
pub struct ErrorAccumulator<'a> {
    exact: &'a ExactSolution,
    rule: QuadRule,
    dt: f64,
    with_e6: bool,
    sup: SnapshotErrors,
    e4: f64,
    e5: f64,
    e6: f64,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(exact: &'a ExactSolution, dt: f64, quadrature: Quadrature, with_e6: bool) -> Self {
        Self {
            exact,
            rule: quadrature.rule(),
            dt,
            with_e6,
            sup: SnapshotErrors::default(),
            e4: 0.0,
            e5: 0.0,
            e6: 0.0,
        }
    }

    fn record_snapshot(&mut self, state: &SimState) {
        let s = snapshot_errors(state, self.exact, &self.rule);
        self.sup.e1 = self.sup.e1.max(s.e1);
        self.sup.e2 = self.sup.e2.max(s.e2);
        self.sup.e3 = self.sup.e3.max(s.e3);
        if self.with_e6 {
            self.e6 = self.e6.max(h1_position_error(state, self.exact, &self.rule));
        }
    }

    pub fn errors(&self) -> [f64; 5] {
        [self.sup.e1, self.sup.e2, self.sup.e3, self.e4, self.e5]
    }

    pub fn e6(&self) -> Option<f64> {
        self.with_e6.then_some(self.e6)
    }
}

impl Observer for ErrorAccumulator<'_> {
    fn on_start(&mut self, state: &SimState) {
        self.record_snapshot(state);
    }

    fn on_step(&mut self, prev: &SimState, next: &SimState) {
        self.record_snapshot(next);
        let (e4, e5) = step_integrals(prev, next, self.exact, self.dt, &self.rule);
        self.e4 += self.dt * e4;
        self.e5 += self.dt * e5;
    }
}

/// Runs the scheme and accumulates `E1..E5` (and `E6` if requested). An
/// aborted run is an error here since the functionals would be incomplete.
pub fn accumulate_run_errors(
    problem: &ProblemSpec,
    config: &SolverConfig,
    quadrature: Quadrature,
    with_e6: bool,
) -> Result<ErrorReport> {
    quadrature.validate().map_err(Error::InvalidConfig)?;
    let exact = problem.exact()?;
    let mut acc = ErrorAccumulator::new(exact, config.dt, quadrature, with_e6);
    let res = run(problem, config, &mut [&mut acc])?;
    if let Some(abort) = res.abort {
        return Err(abort.into());
    }
    Ok(ErrorReport {
        problem: problem.name.clone(),
        n: config.n,
        dt: config.dt,
        t_max: config.t_max,
        steps: res.steps_completed,
        errors: acc.errors(),
        e6: acc.e6(),
    })
}

/// `eoc_k = ln(E_{k-1}/E_k) / ln(s_{k-1}/s_k)`; the first entry is `None`.
pub fn eoc(errors: &[f64], steps: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != steps.len() {
        return Err(Error::DimensionMismatch {
            expected: steps.len(),
            got: errors.len(),
        });
    }
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonPositiveError { index, value });
    }
    if steps.windows(2).any(|w| !(w[1] < w[0]) || !(w[1] > 0.0)) {
        return Err(Error::InvalidConfig(
            "resolution steps must be positive and strictly decreasing".into(),
        ));
    }
    let mut out = vec![None];
    out.extend(
        errors
            .windows(2)
            .zip(steps.windows(2))
            .map(|(e, s)| Some((e[0] / e[1]).ln() / (s[0] / s[1]).ln())),
    );
    Ok(out)
}

/// Least-squares slope of `ln E` against `ln s`.
pub fn loglog_slope(errors: &[f64], steps: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// Rows labelled by `N`, resolution `h = 1/N`.
    Space,
    /// Rows labelled by level `m`, resolution `δ`.
    Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// `N` for spatial studies, `m` for temporal ones.
    pub label: u64,
    pub n: usize,
    pub delta: f64,
    pub errors: [f64; 5],
    pub eoc: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub kind: StudyKind,
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    /// Builds rows from reports and attaches EOCs computed on the full
    /// (unrounded) errors.
    pub fn from_reports(kind: StudyKind, labels: &[u64], reports: &[ErrorReport]) -> Result<Self> {
        let steps: Vec<f64> = reports
            .iter()
            .map(|r| match kind {
                StudyKind::Space => 1.0 / r.n as f64,
                StudyKind::Time => r.dt,
            })
            .collect();
        let mut eocs = vec![[f64::NAN; 5]; reports.len()];
        for k in 0..5 {
            let col: Vec<f64> = reports.iter().map(|r| r.errors[k]).collect();
            for (row, v) in eoc(&col, &steps)?.into_iter().enumerate() {
                eocs[row][k] = v.unwrap_or(f64::NAN);
            }
        }
        let rows = reports
            .iter()
            .zip(labels)
            .zip(eocs)
            .enumerate()
            .map(|(i, ((r, &label), e))| TableRow {
                label,
                n: r.n,
                delta: r.dt,
                errors: r.errors,
                eoc: (i > 0).then_some(e),
            })
            .collect();
        Ok(Self { kind, rows })
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors[k]).collect()
    }

    /// Resolution parameter per row (`h` or `δ`).
    pub fn resolutions(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match self.kind {
                StudyKind::Space => 1.0 / r.n as f64,
                StudyKind::Time => r.delta,
            })
            .collect()
    }

    /// CSV with raw (unscaled) errors at 17 significant digits; EOC cells of
    /// the first row are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(match self.kind {
            StudyKind::Space => "N",
            StudyKind::Time => "m",
        });
        s.push_str(",delta,E1,E2,E3,E4,E5,eoc1,eoc2,eoc3,eoc4,eoc5\n");
        for row in &self.rows {
            write!(s, "{},{}", row.label, fmt_f64(row.delta)).unwrap();
            for e in row.errors {
                write!(s, ",{}", fmt_f64(e)).unwrap();
            }
            for k in 0..5 {
                match row.eoc {
                    Some(e) => write!(s, ",{}", fmt_f64(e[k])).unwrap(),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// 17 significant digits, round-trip exact for `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Spatial study with `δ = h²` and `T = problem.t_max`. Resolutions run in
/// parallel on the current rayon pool.
pub fn convergence_study_space(problem: &ProblemSpec, node_counts: &[usize], quadrature: Quadrature) -> Result<ConvergenceTable> {
    if node_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("node counts must be strictly increasing".into()));
    }
    let reports = node_counts
        .par_iter()
        .map(|&n| {
            let cfg = SolverConfig::with_h2_step(n, problem.t_max)?;
            accumulate_run_errors(problem, &cfg, quadrature, false)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u64> = node_counts.iter().map(|&n| n as u64).collect();
    ConvergenceTable::from_reports(StudyKind::Space, &labels, &reports)
}

/// `δ = base · 2^{-m}` for each level.
pub fn halving_levels(base: f64, levels: impl IntoIterator<Item = u32>) -> Vec<(u32, f64)> {
    levels.into_iter().map(|m| (m, base * 0.5f64.powi(m as i32))).collect()
}

/// Temporal study at fixed `n`; `levels` pairs a row label with its step size.
pub fn convergence_study_time(problem: &ProblemSpec, n: usize, levels: &[(u32, f64)], quadrature: Quadrature) -> Result<ConvergenceTable> {
    if levels.windows(2).any(|w| !(w[1].1 < w[0].1)) {
        return Err(Error::InvalidConfig("time steps must be strictly decreasing".into()));
    }
    let reports = levels
        .par_iter()
        .map(|&(_, dt)| {
            let cfg = SolverConfig::new(n, dt, problem.t_max)?;
            accumulate_run_errors(problem, &cfg, quadrature, false)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u64> = levels.iter().map(|&(m, _)| m as u64).collect();
    ConvergenceTable::from_reports(StudyKind::Time, &labels, &reports)
}
