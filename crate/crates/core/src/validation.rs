//! Independent checks of the discretisation: a finite-difference residual
//! of the strong equations for manufactured solutions, a weak-form
//! re-assembly of the node equations, and audits of the per-step systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cyclic::CyclicTridiagonal;
use crate::geometry::{discrete_mass_from_lengths, forcing_vectors, semi_discrete_velocity, PolygonGeometry, Vec2};
use crate::mesh::PeriodicMesh;
use crate::problems::{ExactSolution, ProblemSpec};
use crate::scheme::{field_matrix, position_matrix, run, SimState, SolverConfig};
use crate::Result;

/// Finite-difference steps; each derivative is Richardson-extrapolated
/// from central differences at both.
pub const FD_STEPS: [f64; 2] = [1e-3, 5e-4];

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max_rel_residual_geo: f64,
    pub max_rel_residual_field: f64,
    pub samples: usize,
    pub fd_steps: [f64; 2],
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_rel_residual_geo.max(self.max_rel_residual_field)
    }
}

#[inline]
fn richardson(d: impl Fn(f64) -> f64) -> f64 {
    let [h, h2] = FD_STEPS;
    debug_assert!((h / h2 - 2.0).abs() < 1e-12);
    (4.0 * d(h2) - d(h)) / 3.0
}

#[inline]
fn richardson_vec(d: impl Fn(f64) -> Vec2) -> Vec2 {
    Vec2::new(richardson(|h| d(h).x), richardson(|h| d(h).y))
}

/// Derivatives of the exact fields at one point, all by finite differences.
struct Jet {
    u_t: Vec2,
    u_x: Vec2,
    u_xx: Vec2,
    u_xt: Vec2,
    c: f64,
    c_t: f64,
    c_x: f64,
    c_xx: f64,
}

fn jet(ex: &ExactSolution, x: f64, t: f64) -> Jet {
    let u = |x: f64, t: f64| (ex.u)(x, t);
    let c = |x: f64, t: f64| (ex.c)(x, t);
    Jet {
        u_t: richardson_vec(|h| (u(x, t + h) - u(x, t - h)) / (2.0 * h)),
        u_x: richardson_vec(|h| (u(x + h, t) - u(x - h, t)) / (2.0 * h)),
        u_xx: richardson_vec(|h| (u(x + h, t) - u(x, t) * 2.0 + u(x - h, t)) / (h * h)),
        u_xt: richardson_vec(|h| {
            (u(x + h, t + h) - u(x + h, t - h) - u(x - h, t + h) + u(x - h, t - h)) / (4.0 * h * h)
        }),
        c: c(x, t),
        c_t: richardson(|h| (c(x, t + h) - c(x, t - h)) / (2.0 * h)),
        c_x: richardson(|h| (c(x + h, t) - c(x - h, t)) / (2.0 * h)),
        c_xx: richardson(|h| (c(x + h, t) - 2.0 * c(x, t) + c(x - h, t)) / (h * h)),
    }
}

/// Relative residuals of both strong equations at one point.
fn point_residual(problem: &ProblemSpec, ex: &ExactSolution, x: f64, t: f64) -> (f64, f64) {
    let j = jet(ex, x, t);
    let l = j.u_x.norm();
    let ux_dot_uxx = j.u_x.dot(j.u_xx);

    // u_t - (1/|u_x|)(u_x/|u_x|)_x - f(c) u_x^⊥/|u_x| - s_u
    let curv = (j.u_xx / l - j.u_x * (ux_dot_uxx / (l * l * l))) / l;
    let forcing = j.u_x.perp() * (problem.f(j.c) / l);
    let s_u = problem.s_u(x, t);
    let geo = j.u_t - curv - forcing - s_u;
    let geo_scale = [j.u_t, curv, forcing, s_u].iter().map(|v| v.norm()).fold(0.0, f64::max);

    // c_t + c |u_x|_t/|u_x| - (1/|u_x|)(c_x/|u_x|)_x - s_c
    let stretch = j.c * j.u_x.dot(j.u_xt) / (l * l);
    let diff = (j.c_xx / l - j.c_x * ux_dot_uxx / (l * l * l)) / l;
    let s_c = problem.s_c(x, t);
    let field = j.c_t + stretch - diff - s_c;
    let field_scale = [j.c_t, stretch, diff, s_c].iter().map(|v| v.abs()).fold(0.0, f64::max);

    (rel(geo.norm(), geo_scale), rel(field.abs(), field_scale))
}

fn rel(r: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// Checks that the exact bundle, forcing and sources of `problem` solve the
/// strong equations, at `samples` pseudo-random points of `[0,1) × (0,T)`.
pub fn pde_residual_oracle(problem: &ProblemSpec, samples: usize, seed: u64) -> Result<ResidualReport> {
    let ex = problem.exact()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport {
        max_rel_residual_geo: 0.0,
        max_rel_residual_field: 0.0,
        samples,
        fd_steps: FD_STEPS,
    };
    for _ in 0..samples {
        let x: f64 = rng.gen_range(0.0..1.0);
        let t: f64 = rng.gen_range(0.0..problem.t_max);
        let (g, f) = point_residual(problem, ex, x, t);
        report.max_rel_residual_geo = report.max_rel_residual_geo.max(g);
        report.max_rel_residual_field = report.max_rel_residual_field.max(f);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosscheckReport {
    /// Largest weak-form residual over all basis functions and components.
    pub discrepancy: f64,
    /// Largest magnitude among the individual assembled terms.
    pub scale: f64,
}

impl CrosscheckReport {
    pub fn relative(&self) -> f64 {
        rel(self.discrepancy, self.scale)
    }
}

/// Assembles the lumped weak form of the position equation element by
/// element, tested with every nodal basis function per coordinate, with the
/// nodal velocity `velocity` inserted for `u_ht`.
///
/// Per segment every integrand is a product of a constant and an affine
/// function, so the integrals are evaluated in closed form.
pub fn weak_form_residual(
    mesh: &PeriodicMesh,
    positions: &[Vec2],
    field: &[f64],
    f: impl Fn(f64) -> f64,
    velocity: &[Vec2],
) -> Result<CrosscheckReport> {
    let n = mesh.len();
    let geom = PolygonGeometry::from_positions(positions)?;
    let mut res = vec![Vec2::ZERO; n];
    let mut scale: f64 = 0.0;
    for s in 0..n {
        let (a, b) = mesh.segment(s);
        let h = b - a;
        let l = if s == 0 { n - 1 } else { s - 1 };
        let len_elem = geom.q[s] / h;
        let u_x = (positions[s] - positions[l]) / h;
        let tau = u_x / u_x.norm();
        // test functions: left node (ψ = 1 at l, slope -1/h) and right node (ψ = 1 at s, slope 1/h)
        for (node, slope) in [(l, -1.0 / h), (s, 1.0 / h)] {
            // ∫ I_h(v ψ) |u_hx| = |u_hx| · h · v_node / 2
            let mass = velocity[node] * (len_elem * h * 0.5);
            let stiff = tau * (slope * h);
            let rhs = u_x.perp() * (f(field[node]) * h * 0.5);
            res[node] = res[node] + mass + stiff - rhs;
            scale = scale.max(mass.norm()).max(stiff.norm()).max(rhs.norm());
        }
    }
    let discrepancy = res
        .iter()
        .map(|r| r.x.abs().max(r.y.abs()))
        .fold(0.0, f64::max);
    Ok(CrosscheckReport { discrepancy, scale })
}

/// Weak-form residual of the node equations' velocity.
pub fn weak_form_crosscheck(
    mesh: &PeriodicMesh,
    positions: &[Vec2],
    field: &[f64],
    f: impl Fn(f64) -> f64,
) -> Result<CrosscheckReport> {
    let geom = PolygonGeometry::from_positions(positions)?;
    let r = forcing_vectors(&geom, field, &f);
    let v = semi_discrete_velocity(&geom, &r);
    weak_form_residual(mesh, positions, field, f, &v)
}

/// Node-equation velocity with the mass coefficient `(q_j + q_{j+1})/2`
/// multiplied by `mass_scale`; `1.0` gives the unperturbed velocity.
pub fn velocity_with_mass_scale(geom: &PolygonGeometry, r: &[Vec2], mass_scale: f64) -> Vec<Vec2> {
    semi_discrete_velocity(geom, r)
        .into_iter()
        .map(|v| v / mass_scale)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub n: usize,
    pub symmetric: bool,
    /// Smallest `vᵀAv` over the probe vectors, per matrix.
    pub min_quadratic_form: [f64; 2],
    /// Smallest `diag - Σ|off|` of the position matrix.
    pub min_dominance_margin: f64,
    /// Largest relative deviation of position row sums from `(q_i + q_{i+1})/(2δ)`.
    pub row_sum_defect: f64,
    /// Largest row sum of the field stiffness relative to its diagonal.
    pub stiffness_constant_defect: f64,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const AUDIT_PROBES: usize = 50;
const ROW_SUM_RTOL: f64 = 1e-12;

fn structurally_symmetric(a: &CyclicTridiagonal) -> bool {
    let n = a.len();
    (0..n).all(|i| {
        let k = (i + 1) % n;
        a.entry(i, k) == a.entry(k, i)
    })
}

fn min_quadratic_form(a: &CyclicTridiagonal, rng: &mut ChaCha8Rng) -> f64 {
    let n = a.len();
    (0..AUDIT_PROBES)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            a.quadratic_form(&v)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Assembles both step matrices on the state's segment lengths and checks
/// symmetry, positivity on random unit vectors, diagonal dominance and the
/// row-sum identities. Violations are reported, not raised.
pub fn audit_step_systems(state: &SimState, config: &SolverConfig, seed: u64) -> Result<AuditReport> {
    let q = &state.geom.q;
    let n = q.len();
    let dt = config.dt;
    let pos = position_matrix(q, dt)?;
    let fld = field_matrix(q, dt)?;
    let stiff = field_matrix(q, f64::INFINITY)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();

    let symmetric = structurally_symmetric(&pos) && structurally_symmetric(&fld);
    if !symmetric {
        violations.push("step matrix is not symmetric".into());
    }

    let min_qf = [min_quadratic_form(&pos, &mut rng), min_quadratic_form(&fld, &mut rng)];
    for (name, v) in ["position", "field"].iter().zip(min_qf) {
        if !(v > 0.0) {
            violations.push(format!("{name} matrix quadratic form {v:e} is not positive"));
        }
    }

    let mut margin = f64::INFINITY;
    let mut row_defect: f64 = 0.0;
    let sums = pos.row_sums();
    for i in 0..n {
        let k = (i + 1) % n;
        let p = (i + n - 1) % n;
        let off_abs = pos.entry(i, k).abs() + pos.entry(i, p).abs();
        margin = margin.min(pos.diag()[i] - off_abs);
        let mass = (q[i] + q[k]) / (2.0 * dt);
        row_defect = row_defect.max((sums[i] - mass).abs() / pos.diag()[i]);
    }
    if !(margin > 0.0) {
        violations.push(format!("position matrix not strictly diagonally dominant (margin {margin:e})"));
    }
    if !(row_defect <= ROW_SUM_RTOL) {
        violations.push(format!("position row sums deviate from the mass term by {row_defect:e}"));
    }

    let stiff_defect = stiff
        .row_sums()
        .iter()
        .zip(stiff.diag())
        .map(|(s, d)| s.abs() / d)
        .fold(0.0, f64::max);
    if !(stiff_defect <= ROW_SUM_RTOL) {
        violations.push(format!("field stiffness does not annihilate constants ({stiff_defect:e})"));
    }

    Ok(AuditReport {
        n,
        symmetric,
        min_quadratic_form: min_qf,
        min_dominance_margin: margin,
        row_sum_defect: row_defect,
        stiffness_constant_defect: stiff_defect,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalanceReport {
    pub steps: usize,
    /// Largest `|M^{m+1} - M^m - δ·Σ_j q_j^m (s_{j-1} + s_j)/2|` relative to
    /// the discrete mass of `|c^m|` (the signed mass may vanish).
    pub max_rel_defect: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
}

/// Runs `problem` and checks the discrete mass budget at every step: without
/// a source the mass is constant, with one it grows by `δ` times the old
/// discrete mass of `I_h s_c(·, t^{m+1})`.
pub fn mass_balance_check(problem: &ProblemSpec, config: &SolverConfig) -> Result<MassBalanceReport> {
    let mut max_rel: f64 = 0.0;
    let mut first = None;
    let mut last = 0.0;
    let mut obs = |prev: &SimState, next: &SimState| {
        let m0 = discrete_mass_from_lengths(&prev.geom.q, &prev.field);
        let m1 = discrete_mass_from_lengths(&next.geom.q, &next.field);
        let src: Vec<f64> = prev.mesh.nodes().iter().map(|&x| problem.s_c(x, next.time)).collect();
        let gain = config.dt * discrete_mass_from_lengths(&prev.geom.q, &src);
        let abs: Vec<f64> = prev.field.iter().map(|c| c.abs()).collect();
        let scale = discrete_mass_from_lengths(&prev.geom.q, &abs).max(f64::MIN_POSITIVE);
        max_rel = max_rel.max((m1 - m0 - gain).abs() / scale);
        first.get_or_insert(m0);
        last = m1;
    };
    let res = run(problem, config, &mut [&mut obs])?;
    if let Some(abort) = res.abort {
        return Err(abort.into());
    }
    let initial_mass = first.unwrap_or(last);
    Ok(MassBalanceReport {
        steps: res.steps_completed,
        max_rel_defect: max_rel,
        initial_mass,
        final_mass: last,
    })
}

/// Random star-shaped polygon with `n` vertices around the origin (radii in
/// `[0.5, 1.5]`, angles jittered), clockwise or not at random, plus a random
/// field in `[-1, 1]`.
pub fn random_polygon(rng: &mut impl Rng, n: usize) -> (Vec<Vec2>, Vec<f64>) {
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let positions = (0..n)
        .map(|j| {
            let th = sign * 2.0 * std::f64::consts::PI * (j as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
            let r = rng.gen_range(0.5..1.5);
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    let field = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (positions, field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub polygons: usize,
    /// Largest length-rate identity residual over its scale, both forms.
    pub max_length_rate: f64,
    pub max_weak_form: f64,
    pub max_nubar_norm: f64,
}

/// Checks the algebraic identities of the semi-discrete equations on
/// `count` random polygons with `f(c) = 2c - 1` style affine forcing.
pub fn identity_suite(count: usize, seed: u64) -> Result<IdentityReport> {
    use crate::geometry::{length_rate_energy_residual, length_rate_identity_residual};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = IdentityReport {
        polygons: count,
        max_length_rate: 0.0,
        max_weak_form: 0.0,
        max_nubar_norm: 0.0,
    };
    for _ in 0..count {
        let n = rng.gen_range(3..=40);
        let (pos, c) = random_polygon(&mut rng, n);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let f = move |c: f64| a * c + b;
        let geom = PolygonGeometry::from_positions(&pos)?;
        let r = forcing_vectors(&geom, &c, f);
        let v = semi_discrete_velocity(&geom, &r);
        let scale = length_rate_scale(&geom, &r, &v);
        for res in [length_rate_identity_residual(&geom, &r), length_rate_energy_residual(&geom, &r)] {
            let m = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            out.max_length_rate = out.max_length_rate.max(m / scale);
        }
        let mesh = PeriodicMesh::uniform(n)?;
        out.max_weak_form = out.max_weak_form.max(weak_form_crosscheck(&mesh, &pos, &c, f)?.relative());
        out.max_nubar_norm = geom.nubar.iter().map(|v| v.norm()).fold(out.max_nubar_norm, f64::max);
    }
    Ok(out)
}

/// Magnitude of the individual terms of the length-rate identity.
pub fn length_rate_scale(geom: &PolygonGeometry, r: &[Vec2], v: &[Vec2]) -> f64 {
    let n = geom.len();
    (0..n)
        .map(|j| {
            let k = (j + 1) % n;
            let t = (geom.tau[k] - geom.tau[j]).norm_sq() / (geom.q[j] + geom.q[k]);
            v[j].norm().max(r[j].norm()).max(t)
        })
        .fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        oscillating_problem, oscillating_problem_mutated, radial_problem, stationary_circle_problem, SourceMutation,
    };
    use crate::scheme::initialize;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn oscillating_sources_solve_the_equations() {
        let r = pde_residual_oracle(&oscillating_problem(), 200, 7).unwrap();
        assert!(r.max() <= 1e-6, "{r:?}");
        assert_eq!(r.samples, 200);
    }

    #[test]
    fn stationary_circle_residual() {
        let r = pde_residual_oracle(&stationary_circle_problem(), 200, 3).unwrap();
        assert!(r.max() <= 1e-10, "{r:?}");
    }

    #[test]
    fn mutated_sources_are_detected() {
        for m in SourceMutation::CONTROLS {
            let r = pde_residual_oracle(&oscillating_problem_mutated(m), 200, 7).unwrap();
            assert!(r.max() > 1e-2, "{m}: {r:?}");
        }
    }

    #[test]
    fn oracle_requires_exact_solution() {
        let p = crate::problems::pure_csf_problem(0.5).unwrap();
        let mut p = p;
        p.exact = None;
        assert!(pde_residual_oracle(&p, 10, 0).is_err());
    }

    #[test]
    fn regular_polygon_crosscheck() {
        let n = 16;
        let mesh = PeriodicMesh::uniform(n).unwrap();
        let pos = mesh.interpolate(|x| {
            let th = 2.0 * std::f64::consts::PI * x;
            Vec2::new(th.cos(), th.sin())
        });
        let r = weak_form_crosscheck(&mesh, &pos, &vec![0.3; n], |_| 0.0).unwrap();
        assert!(r.discrepancy <= 1e-14, "{r:?}");
    }

    #[test]
    fn mass_mutation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(3..30);
            let (pos, c) = random_polygon(&mut rng, n);
            let mesh = PeriodicMesh::uniform(n).unwrap();
            let geom = PolygonGeometry::from_positions(&pos).unwrap();
            let f = |c: f64| 2.0 * c - 1.0;
            let r = forcing_vectors(&geom, &c, f);
            let v = velocity_with_mass_scale(&geom, &r, 1.01);
            let rep = weak_form_residual(&mesh, &pos, &c, f, &v).unwrap();
            assert!(rep.relative() > 1e-4, "{rep:?}");
            let v = velocity_with_mass_scale(&geom, &r, 1.0);
            assert!(weak_form_residual(&mesh, &pos, &c, f, &v).unwrap().relative() <= 1e-12);
        }
    }

    #[test]
    fn identity_suite_on_random_polygons() {
        let r = identity_suite(100, 5).unwrap();
        assert!(r.max_length_rate <= 1e-12, "{r:?}");
        assert!(r.max_weak_form <= 1e-12, "{r:?}");
        assert!(r.max_nubar_norm <= 1.0 + 1e-15, "{r:?}");
    }

    #[test]
    fn audit_radial_states() {
        let p = radial_problem();
        let cfg = SolverConfig::new(64, 1e-3, 0.05).unwrap();
        let mut checked = 0;
        let mut obs = |_: &SimState, next: &SimState| {
            let a = audit_step_systems(next, &cfg, next.step as u64).unwrap();
            assert!(a.passed(), "{a:?}");
            checked += 1;
        };
        run(&p, &cfg, &mut [&mut obs]).unwrap();
        assert_eq!(checked, 50);
    }

    #[test]
    fn audit_reports_rather_than_raises() {
        let p = radial_problem();
        let cfg = SolverConfig::new(16, 1e-3, 0.01).unwrap();
        let s = initialize(&p, &cfg).unwrap();
        let a = audit_step_systems(&s, &cfg, 0).unwrap();
        assert!(a.passed());
        assert!(a.row_sum_defect <= 1e-12);
        assert!(a.stiffness_constant_defect <= 1e-12);
        assert!(a.min_dominance_margin > 0.0);
    }

    #[test]
    fn mass_is_conserved_without_source() {
        let cfg = SolverConfig::new(40, 1e-3, 0.2).unwrap();
        let r = mass_balance_check(&radial_problem(), &cfg).unwrap();
        assert_eq!(r.steps, 200);
        assert!(r.max_rel_defect <= 1e-12, "{r:?}");
        assert!((r.final_mass / r.initial_mass - 1.0).abs() <= 1e-11);
    }

    #[test]
    fn mass_budget_with_source() {
        let cfg = SolverConfig::new(41, 1e-3, 0.2).unwrap();
        let r = mass_balance_check(&oscillating_problem(), &cfg).unwrap();
        assert!(r.max_rel_defect <= 1e-12, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn crosscheck_random_polygons(seed in any::<u64>(), n in 3usize..50, a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (pos, c) = random_polygon(&mut rng, n);
            let mesh = PeriodicMesh::uniform(n).unwrap();
            let rep = weak_form_crosscheck(&mesh, &pos, &c, |c| a * c + b).unwrap();
            prop_assert!(rep.relative() <= 1e-12, "{:?}", rep);
        }
    }
}
