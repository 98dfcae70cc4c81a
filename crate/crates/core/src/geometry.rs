//! Polygon quantities of a discrete closed curve.
//!
//! With `q_j = |u_j - u_{j-1}|`, `τ_j = (u_j - u_{j-1}) / q_j` and
//! `ν_j = τ_j^⊥` (counter-clockwise rotation), the averaged normal at node
//! `j` is the length-weighted mean of the normals of the two adjacent
//! segments,
//!
//! ```text
//! ν̄_j = (q_j ν_j + q_{j+1} ν_{j+1}) / (q_j + q_{j+1}).
//! ```

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use crate::mesh::PeriodicMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Counter-clockwise rotation by 90 degrees: `(a, b)^⊥ = (-b, a)`.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn component(self, k: usize) -> f64 {
        match k {
            0 => self.x,
            1 => self.y,
            _ => panic!("Vec2 has two components, asked for {k}"),
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Nodal positions `u_j` of a closed polygon over a periodic mesh.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    pub mesh: Arc<PeriodicMesh>,
    pub positions: Vec<Vec2>,
}

impl DiscreteCurve {
    pub fn new(mesh: Arc<PeriodicMesh>, positions: Vec<Vec2>) -> Result<Self> {
        if positions.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: positions.len(),
            });
        }
        Ok(Self { mesh, positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Nodal values `c_j` of a scalar field over a periodic mesh.
#[derive(Debug, Clone)]
pub struct SurfaceField {
    pub mesh: Arc<PeriodicMesh>,
    pub values: Vec<f64>,
}

impl SurfaceField {
    pub fn new(mesh: Arc<PeriodicMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        Ok(Self { mesh, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonGeometry {
    pub q: Vec<f64>,
    pub tau: Vec<Vec2>,
    pub nu: Vec<Vec2>,
    pub nubar: Vec<Vec2>,
}

#[inline]
fn prev(j: usize, n: usize) -> usize {
    if j == 0 {
        n - 1
    } else {
        j - 1
    }
}

#[inline]
fn next(j: usize, n: usize) -> usize {
    if j + 1 == n {
        0
    } else {
        j + 1
    }
}

/// `q_j = |u_j - u_{j-1}|` for all `j`.
pub fn segment_lengths(positions: &[Vec2]) -> Vec<f64> {
    let n = positions.len();
    (0..n)
        .map(|j| (positions[j] - positions[prev(j, n)]).norm())
        .collect()
}

impl PolygonGeometry {
    pub fn from_positions(positions: &[Vec2]) -> Result<Self> {
        let n = positions.len();
        if n < 3 {
            return Err(Error::InvalidMesh(format!(
                "a closed polygon needs at least 3 nodes, got {n}"
            )));
        }
        let mut q = Vec::with_capacity(n);
        let mut tau = Vec::with_capacity(n);
        for j in 0..n {
            let d = positions[j] - positions[prev(j, n)];
            let len = d.norm();
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::DegenerateSegment { index: j, length: len });
            }
            q.push(len);
            tau.push(d / len);
        }
        let nu: Vec<Vec2> = tau.iter().map(|t| t.perp()).collect();
        let nubar = (0..n)
            .map(|j| {
                let k = next(j, n);
                (q[j] * nu[j] + q[k] * nu[k]) / (q[j] + q[k])
            })
            .collect();
        Ok(Self { q, tau, nu, nubar })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn min_segment(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn compute_geometry(curve: &DiscreteCurve) -> Result<PolygonGeometry> {
    PolygonGeometry::from_positions(&curve.positions)
}

/// `r_j = f(c_j) ν̄_j`.
pub fn forcing_vectors<F: Fn(f64) -> f64>(geom: &PolygonGeometry, c: &[f64], f: F) -> Vec<Vec2> {
    assert_eq!(geom.len(), c.len(), "geometry and field live on different meshes");
    geom.nubar
        .iter()
        .zip(c)
        .map(|(&nb, &cj)| f(cj) * nb)
        .collect()
}

/// Right-hand side of the semi-discrete node equations,
/// `u̇_j = r_j - 2 (τ_j - τ_{j+1}) / (q_j + q_{j+1})`.
pub fn semi_discrete_velocity(geom: &PolygonGeometry, r: &[Vec2]) -> Vec<Vec2> {
    let n = geom.len();
    (0..n)
        .map(|j| {
            let k = next(j, n);
            r[j] - (geom.tau[j] - geom.tau[k]) * (2.0 / (geom.q[j] + geom.q[k]))
        })
        .collect()
}

/// Residual of the discrete length-rate identity
///
/// ```text
/// τ_j·(u̇_j - u̇_{j-1}) = τ_j·(r_j - r_{j-1})
///                        - |τ_{j+1} - τ_j|² / (q_j + q_{j+1})
///                        - |τ_{j-1} - τ_j|² / (q_j + q_{j-1})
/// ```
///
/// with `u̇` from [`semi_discrete_velocity`]. Vanishes up to rounding.
pub fn length_rate_identity_residual(geom: &PolygonGeometry, r: &[Vec2]) -> Vec<f64> {
    let n = geom.len();
    let v = semi_discrete_velocity(geom, r);
    (0..n)
        .map(|j| {
            let (p, k) = (prev(j, n), next(j, n));
            let t = geom.tau[j];
            let lhs = t.dot(v[j] - v[p]);
            let rhs = t.dot(r[j] - r[p])
                - (geom.tau[k] - t).norm_sq() / (geom.q[j] + geom.q[k])
                - (geom.tau[p] - t).norm_sq() / (geom.q[j] + geom.q[p]);
            lhs - rhs
        })
        .collect()
}

/// Same identity in its velocity form,
/// `q̇_j = τ_j·(r_j - r_{j-1}) - (q_j+q_{j+1})/4 |u̇_j - r_j|² - (q_j+q_{j-1})/4 |u̇_{j-1} - r_{j-1}|²`.
pub fn length_rate_energy_residual(geom: &PolygonGeometry, r: &[Vec2]) -> Vec<f64> {
    let n = geom.len();
    let v = semi_discrete_velocity(geom, r);
    (0..n)
        .map(|j| {
            let (p, k) = (prev(j, n), next(j, n));
            let t = geom.tau[j];
            let lhs = t.dot(v[j] - v[p]);
            let rhs = t.dot(r[j] - r[p])
                - 0.25 * (geom.q[j] + geom.q[k]) * (v[j] - r[j]).norm_sq()
                - 0.25 * (geom.q[j] + geom.q[p]) * (v[p] - r[p]).norm_sq();
            lhs - rhs
        })
        .collect()
}

pub fn total_length(geom: &PolygonGeometry) -> f64 {
    geom.q.iter().sum()
}

/// `∫ c_h |u_hx| dx = Σ_j q_j (c_{j-1} + c_j) / 2`.
pub fn discrete_mass(geom: &PolygonGeometry, c: &[f64]) -> f64 {
    discrete_mass_from_lengths(&geom.q, c)
}

pub(crate) fn discrete_mass_from_lengths(q: &[f64], c: &[f64]) -> f64 {
    let n = q.len();
    assert_eq!(n, c.len(), "geometry and field live on different meshes");
    (0..n).map(|j| 0.5 * q[j] * (c[prev(j, n)] + c[j])).sum()
}
