//! Problem library: forcing functions, initial data, manufactured solutions
//! and the radially symmetric reference ODE.
//!
//! A problem prescribes the data of
//!
//! ```text
//! u_t - (1/|u_x|) (u_x/|u_x|)_x - f(c) u_x^⊥/|u_x| = s_u
//! c_t + c |u_x|_t/|u_x| - (1/|u_x|) (c_x/|u_x|)_x   = s_c
//! ```
//!
//! on the parameter domain `[0, 1)`. The normal `u_x^⊥/|u_x|` points
//! inward for counter-clockwise parametrizations and outward for clockwise
//! ones.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::geometry::Vec2;
use crate::scheme::SimState;
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type CurveFn = Arc<dyn Fn(f64) -> Vec2 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type VectorFieldFn = Arc<dyn Fn(f64, f64) -> Vec2 + Send + Sync>;

/// Coupling function `f(c)`, optionally cut off to `[lo, hi]`.
#[derive(Clone)]
pub struct Forcing {
    func: ScalarFn,
    clamp: Option<(f64, f64)>,
}

impl Forcing {
    pub fn new(func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            func: Arc::new(func),
            clamp: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0)
    }

    pub fn with_clamp(mut self, lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "clamp bounds out of order: [{lo}, {hi}]");
        self.clamp = Some((lo, hi));
        self
    }

    pub fn clamp(&self) -> Option<(f64, f64)> {
        self.clamp
    }

    #[inline]
    pub fn eval(&self, c: f64) -> f64 {
        let v = (self.func)(c);
        match self.clamp {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("clamp", &self.clamp).finish_non_exhaustive()
    }
}

/// Closed-form solution with the derivatives the error functionals need.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: VectorFieldFn,
    pub u_t: VectorFieldFn,
    pub u_x: VectorFieldFn,
    pub c: FieldFn,
    pub c_x: FieldFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub forcing: Forcing,
    /// `None` means `s_u ≡ 0`.
    pub source_u: Option<VectorFieldFn>,
    /// `None` means `s_c ≡ 0`.
    pub source_c: Option<FieldFn>,
    pub u0: CurveFn,
    pub c0: ScalarFn,
    pub exact: Option<ExactSolution>,
    pub t_max: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("forcing", &self.forcing)
            .field("source_u", &self.source_u.is_some())
            .field("source_c", &self.source_c.is_some())
            .field("exact", &self.exact.is_some())
            .field("t_max", &self.t_max)
            .finish()
    }
}

impl ProblemSpec {
    #[inline]
    pub fn f(&self, c: f64) -> f64 {
        self.forcing.eval(c)
    }

    #[inline]
    pub fn s_u(&self, x: f64, t: f64) -> Vec2 {
        self.source_u.as_ref().map_or(Vec2::ZERO, |s| s(x, t))
    }

    #[inline]
    pub fn s_c(&self, x: f64, t: f64) -> f64 {
        self.source_c.as_ref().map_or(0.0, |s| s(x, t))
    }

    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::MissingExactSolution(self.name.clone()))
    }

    /// Largest deviation between the initial data and the exact solution at
    /// `t = 0` over `samples` equispaced points; `None` without exact data.
    pub fn initial_consistency(&self, samples: usize) -> Option<f64> {
        let ex = self.exact.as_ref()?;
        let dev = (0..samples)
            .map(|k| {
                let x = k as f64 / samples as f64;
                let du = ((self.u0)(x) - (ex.u)(x, 0.0)).norm();
                let dc = ((self.c0)(x) - (ex.c)(x, 0.0)).abs();
                du.max(dc)
            })
            .fold(0.0, f64::max);
        Some(dev)
    }
}

/// Circle of radius `r` traversed clockwise, starting at `(-r, 0)`.
///
/// With `ν = u_x^⊥/|u_x|` this orientation makes `ν` the outer normal, so a
/// positive forcing expands the circle.
fn clockwise_circle(r: f64) -> CurveFn {
    Arc::new(move |x| {
        let th = 2.0 * PI * x;
        Vec2::new(-r * th.cos(), r * th.sin())
    })
}

fn counter_clockwise_circle(r: f64) -> CurveFn {
    Arc::new(move |x| {
        let th = 2.0 * PI * x;
        Vec2::new(r * th.cos(), r * th.sin())
    })
}

pub const RADIAL_R0: f64 = 1.25;
pub const RADIAL_B0: f64 = 0.8;

/// Forcing `f(B) = 2B - 1` on a circle of radius 1.25 with constant field
/// 0.8; `(R, B) = (1, 1)` is the stable stationary state.
pub fn radial_problem() -> ProblemSpec {
    ProblemSpec {
        name: "radial".into(),
        forcing: Forcing::new(|b| 2.0 * b - 1.0),
        source_u: None,
        source_c: None,
        u0: clockwise_circle(RADIAL_R0),
        c0: Arc::new(|_| RADIAL_B0),
        exact: None,
        t_max: 3.0,
    }
}

/// Unforced flow (`f ≡ 0`, no sources) of a circle of radius `r0`; the
/// circle shrinks as `R(t) = sqrt(r0² - 2t)`.
pub fn pure_csf_problem(r0: f64) -> Result<ProblemSpec> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::InvalidConfig(format!("radius must be positive, got {r0}")));
    }
    Ok(ProblemSpec {
        name: "pure-csf".into(),
        forcing: Forcing::zero(),
        source_u: None,
        source_c: None,
        u0: counter_clockwise_circle(r0),
        c0: Arc::new(|_| 1.0),
        exact: None,
        t_max: 0.5 * r0 * r0,
    })
}

/// Unit circle at rest: clockwise orientation, `c ≡ 1`, `f(c) = 2c - 1`,
/// curvature and forcing cancel.
pub fn stationary_circle_problem() -> ProblemSpec {
    let u = clockwise_circle(1.0);
    let u_exact = u.clone();
    ProblemSpec {
        name: "stationary-circle".into(),
        forcing: Forcing::new(|c| 2.0 * c - 1.0),
        source_u: None,
        source_c: None,
        u0: u,
        c0: Arc::new(|_| 1.0),
        exact: Some(ExactSolution {
            u: Arc::new(move |x, _| u_exact(x)),
            u_t: Arc::new(|_, _| Vec2::ZERO),
            u_x: Arc::new(|x, _| {
                let th = 2.0 * PI * x;
                Vec2::new(2.0 * PI * th.sin(), 2.0 * PI * th.cos())
            }),
            c: Arc::new(|_, _| 1.0),
            c_x: Arc::new(|_, _| 0.0),
        }),
        t_max: 1.0,
    }
}

/// Which manufactured-source term to corrupt (sign flip), for negative
/// controls of the residual oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMutation {
    /// Flip term `k` of `s_u1` (0..3).
    Su1(usize),
    /// Flip term `k` of `s_u2` (0..3).
    Su2(usize),
    /// Flip term `k` of `s_c` (0..5; terms 0 and 1 are `cos 8πx` and `-sin 6πx`).
    Sc(usize),
}

impl SourceMutation {
    pub const CONTROLS: [SourceMutation; 5] = [
        SourceMutation::Su1(1),
        SourceMutation::Su2(2),
        SourceMutation::Sc(2),
        SourceMutation::Sc(3),
        SourceMutation::Sc(4),
    ];

    fn sign(self, which: fn(usize) -> SourceMutation, k: usize) -> f64 {
        if self == which(k) {
            -1.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for SourceMutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceMutation::Su1(k) => write!(f, "su1:{k}"),
            SourceMutation::Su2(k) => write!(f, "su2:{k}"),
            SourceMutation::Sc(k) => write!(f, "sc:{k}"),
        }
    }
}

impl std::str::FromStr for SourceMutation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (comp, term) = s
            .split_once(':')
            .ok_or_else(|| format!("expected <su1|su2|sc>:<term>, got `{s}`"))?;
        let k: usize = term.parse().map_err(|_| format!("bad term index `{term}`"))?;
        let (ctor, count): (fn(usize) -> SourceMutation, usize) = match comp {
            "su1" => (SourceMutation::Su1, 3),
            "su2" => (SourceMutation::Su2, 3),
            "sc" => (SourceMutation::Sc, 5),
            _ => return Err(format!("unknown source component `{comp}`")),
        };
        if k >= count {
            return Err(format!("{comp} has {count} terms, got index {k}"));
        }
        Ok(ctor(k))
    }
}

mod oscillating {
    use super::*;

    /// `9 - cos 4πt - 4 sin 2π(t-2x) - 4 sin 2π(t+2x)`, which equals
    /// `8 |u_x|² / (2π)²`.
    #[inline]
    fn denom(x: f64, t: f64) -> f64 {
        9.0 - (4.0 * PI * t).cos()
            - 4.0 * (2.0 * PI * (t - 2.0 * x)).sin()
            - 4.0 * (2.0 * PI * (t + 2.0 * x)).sin()
    }

    #[inline]
    pub fn c(x: f64, t: f64) -> f64 {
        t * (8.0 * PI * x).cos() + (1.0 - t) * (6.0 * PI * x).sin()
    }

    #[inline]
    pub fn c_x(x: f64, t: f64) -> f64 {
        -8.0 * PI * t * (8.0 * PI * x).sin() + 6.0 * PI * (1.0 - t) * (6.0 * PI * x).cos()
    }

    #[inline]
    pub fn u(x: f64, t: f64) -> Vec2 {
        let s = (2.0 * PI * t).sin();
        let (sx, cx) = (2.0 * PI * x).sin_cos();
        Vec2::new((1.0 + 0.5 * s) * cx, (1.0 - 0.5 * s) * sx)
    }

    #[inline]
    pub fn u_t(x: f64, t: f64) -> Vec2 {
        let ct = (2.0 * PI * t).cos();
        let (sx, cx) = (2.0 * PI * x).sin_cos();
        Vec2::new(PI * ct * cx, -PI * ct * sx)
    }

    #[inline]
    pub fn u_x(x: f64, t: f64) -> Vec2 {
        let s = (2.0 * PI * t).sin();
        let (sx, cx) = (2.0 * PI * x).sin_cos();
        Vec2::new(-2.0 * PI * (1.0 + 0.5 * s) * sx, 2.0 * PI * (1.0 - 0.5 * s) * cx)
    }

    pub fn su1_terms(x: f64, t: f64) -> [f64; 3] {
        let s = (2.0 * PI * t).sin();
        let ct = (2.0 * PI * t).cos();
        let cx = (2.0 * PI * x).cos();
        let d = denom(x, t);
        [
            PI * ct * cx,
            -2.0 * 2f64.sqrt() * cx * (s - 2.0) * c(x, t) / d.sqrt(),
            8.0 * cx * (s - 2.0).powi(2) * (2.0 + s) / (d * d),
        ]
    }

    pub fn su2_terms(x: f64, t: f64) -> [f64; 3] {
        let s = (2.0 * PI * t).sin();
        let ct = (2.0 * PI * t).cos();
        let sx = (2.0 * PI * x).sin();
        let d = denom(x, t);
        [
            -PI * ct * sx,
            2.0 * 2f64.sqrt() * sx * (2.0 + s) * c(x, t) / d.sqrt(),
            // sign corrected: the curvature term of the second component
            // carries -8 sin 2πx (sin 2πt - 2)(2 + sin 2πt)² / D²
            -8.0 * sx * (s - 2.0) * (2.0 + s).powi(2) / (d * d),
        ]
    }

    pub fn sc_terms(x: f64, t: f64) -> [f64; 5] {
        let s = (2.0 * PI * t).sin();
        let ct = (2.0 * PI * t).cos();
        let (sx, cx) = (2.0 * PI * x).sin_cos();
        let (c8, s8) = ((8.0 * PI * x).cos(), (8.0 * PI * x).sin());
        let (c6, s6) = ((6.0 * PI * x).cos(), (6.0 * PI * x).sin());
        let d = denom(x, t);
        [
            c8,
            -s6,
            8.0 * (16.0 * t * c8 + 9.0 * (1.0 - t) * s6) / d,
            -128.0 * cx * s * sx * (3.0 * (t - 1.0) * c6 + 4.0 * t * s8) / (d * d),
            4.0 * PI * ct * (-2.0 * (4.0 * PI * x).cos() + s) * (t * c8 - (t - 1.0) * s6) / d,
        ]
    }
}

/// Manufactured oscillating solution on `[0, 1] × [0, 1]` with `f(c) = 2c`:
///
/// ```text
/// u(x,t) = ((1 + ½ sin 2πt) cos 2πx, (1 - ½ sin 2πt) sin 2πx)
/// c(x,t) = t cos 8πx + (1 - t) sin 6πx
/// ```
pub fn oscillating_problem() -> ProblemSpec {
    build_oscillating(None)
}

/// [`oscillating_problem`] with one source term sign-flipped.
pub fn oscillating_problem_mutated(mutation: SourceMutation) -> ProblemSpec {
    build_oscillating(Some(mutation))
}

fn build_oscillating(mutation: Option<SourceMutation>) -> ProblemSpec {
    let name = match mutation {
        None => "oscillating".to_string(),
        Some(m) => format!("oscillating[mutated {m}]"),
    };
    let source_u: VectorFieldFn = Arc::new(move |x, t| {
        let a = oscillating::su1_terms(x, t);
        let b = oscillating::su2_terms(x, t);
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..3 {
            let (f1, f2) = match mutation {
                Some(m) => (m.sign(SourceMutation::Su1, k), m.sign(SourceMutation::Su2, k)),
                None => (1.0, 1.0),
            };
            s1 += f1 * a[k];
            s2 += f2 * b[k];
        }
        Vec2::new(s1, s2)
    });
    let source_c: FieldFn = Arc::new(move |x, t| {
        oscillating::sc_terms(x, t)
            .iter()
            .enumerate()
            .map(|(k, v)| mutation.map_or(1.0, |m| m.sign(SourceMutation::Sc, k)) * v)
            .sum()
    });
    ProblemSpec {
        name,
        forcing: Forcing::new(|c| 2.0 * c),
        source_u: Some(source_u),
        source_c: Some(source_c),
        u0: Arc::new(|x| oscillating::u(x, 0.0)),
        c0: Arc::new(|x| oscillating::c(x, 0.0)),
        exact: Some(ExactSolution {
            u: Arc::new(oscillating::u),
            u_t: Arc::new(oscillating::u_t),
            u_x: Arc::new(oscillating::u_x),
            c: Arc::new(oscillating::c),
            c_x: Arc::new(oscillating::c_x),
        }),
        t_max: 1.0,
    }
}

/// Radius and (spatially constant) field value of a circular state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialState {
    pub r: f64,
    pub b: f64,
}

impl RadialState {
    pub fn new(r: f64, b: f64) -> Self {
        Self { r, b }
    }
}

/// `R' = -1/R + f(B)`, `B' = -B R'/R`.
fn radial_rhs(s: RadialState, forcing: &Forcing) -> RadialState {
    let dr = -1.0 / s.r + forcing.eval(s.b);
    RadialState::new(dr, -s.b * dr / s.r)
}

fn rk4_step(s: RadialState, dt: f64, forcing: &Forcing) -> RadialState {
    let add = |a: RadialState, k: RadialState, w: f64| RadialState::new(a.r + w * k.r, a.b + w * k.b);
    let k1 = radial_rhs(s, forcing);
    let k2 = radial_rhs(add(s, k1, 0.5 * dt), forcing);
    let k3 = radial_rhs(add(s, k2, 0.5 * dt), forcing);
    let k4 = radial_rhs(add(s, k3, dt), forcing);
    RadialState::new(
        s.r + dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
        s.b + dt / 6.0 * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b),
    )
}

/// Classical RK4 solution of the radial ODE, sampled at `output_times`
/// (non-decreasing, starting at or after zero). Steps are `dt_ref` long
/// except where shortened to land on an output time.
pub fn radial_reference(
    initial: RadialState,
    forcing: &Forcing,
    output_times: &[f64],
    dt_ref: f64,
) -> Result<Vec<RadialState>> {
    if !(initial.r > 0.0) {
        return Err(Error::InvalidConfig(format!("initial radius must be positive, got {}", initial.r)));
    }
    if !(dt_ref > 0.0) {
        return Err(Error::InvalidConfig(format!("reference step must be positive, got {dt_ref}")));
    }
    let mut out = Vec::with_capacity(output_times.len());
    let mut state = initial;
    let mut t = 0.0;
    // integrate on the fixed grid k·dt_ref; output times off the grid get a
    // short step from the last grid state
    let mut k: u64 = 0;
    for &target in output_times {
        if target < t - 1e-12 * dt_ref.max(t) {
            return Err(Error::InvalidConfig("output times must be non-decreasing".into()));
        }
        loop {
            let next = (k + 1) as f64 * dt_ref;
            if next > target * (1.0 + 1e-12) {
                break;
            }
            state = rk4_step(state, next - t, forcing);
            t = next;
            k += 1;
            if !(state.r > 0.0) {
                return Err(Error::BlowDown { time: t, radius: state.r });
            }
        }
        let rest = target - t;
        let sample = if rest > 1e-12 * dt_ref {
            rk4_step(state, rest, forcing)
        } else {
            state
        };
        if !(sample.r > 0.0) {
            return Err(Error::BlowDown { time: target, radius: sample.r });
        }
        out.push(sample);
    }
    Ok(out)
}

/// `R_δh = Σ q_j / 2π` and `B_δh = mean(c_j)`.
pub fn radial_observables(state: &SimState) -> RadialState {
    let n = state.field.len() as f64;
    RadialState::new(
        state.geom.q.iter().sum::<f64>() / (2.0 * PI),
        state.field.iter().sum::<f64>() / n,
    )
}
