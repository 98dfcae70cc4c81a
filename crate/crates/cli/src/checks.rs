//! The `validate` command's self-checks. Each check returns a verdict with a
//! one-line detail; none of them panics on a failed comparison.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use curveflow::cyclic::CyclicTridiagonal;
use curveflow::geometry::PolygonGeometry;
use curveflow::mesh::PeriodicMesh;
use curveflow::problems::{oscillating_problem, oscillating_problem_mutated, radial_problem, SourceMutation};
use curveflow::scheme::{run, SimState, SolverConfig};
use curveflow::validation::{
    audit_step_systems, identity_suite, mass_balance_check, pde_residual_oracle, random_polygon,
    weak_form_crosscheck,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RESIDUAL_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const MASS_TOL: f64 = 1e-12;
const RESIDUAL_SAMPLES: usize = 200;
const POLYGONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Residual,
    Crosscheck,
    Audit,
    Identities,
    Mass,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::Residual, Check::Crosscheck, Check::Audit, Check::Identities, Check::Mass];
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Residual => "residual",
            Check::Crosscheck => "crosscheck",
            Check::Audit => "audit",
            Check::Identities => "identities",
            Check::Mass => "mass",
        })
    }
}

impl FromStr for Check {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Check::ALL.iter().find(|c| c.to_string() == s.trim()) {
            Some(c) => Ok(*c),
            None => bail!("unknown check `{s}` (expected residual, crosscheck, audit, identities or mass)"),
        }
    }
}

/// `su1:k`, `su2:k` or `sc:k`.
pub fn parse_mutation(s: &str) -> Result<SourceMutation> {
    s.trim().parse::<SourceMutation>().map_err(anyhow::Error::msg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{}: {tag} ({})", self.check, self.detail)
    }
}

pub fn run_check(check: Check, mutation: Option<SourceMutation>, seed: u64) -> Result<Verdict> {
    let (passed, detail) = match check {
        Check::Residual => residual(mutation, seed)?,
        Check::Crosscheck => crosscheck(seed)?,
        Check::Audit => audit(seed)?,
        Check::Identities => identities(seed)?,
        Check::Mass => mass()?,
    };
    Ok(Verdict { check, passed, detail })
}

fn residual(mutation: Option<SourceMutation>, seed: u64) -> Result<(bool, String)> {
    let problem = match mutation {
        Some(m) => oscillating_problem_mutated(m),
        None => oscillating_problem(),
    };
    let r = pde_residual_oracle(&problem, RESIDUAL_SAMPLES, seed)?;
    let label = mutation.map(|m| format!(", mutated {m}")).unwrap_or_default();
    Ok((
        r.max() <= RESIDUAL_TOL,
        format!(
            "geo {:.2e}, field {:.2e}, tol {RESIDUAL_TOL:.0e}{label}",
            r.max_rel_residual_geo, r.max_rel_residual_field
        ),
    ))
}

fn crosscheck(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..POLYGONS {
        let n = rng.gen_range(3..=64);
        let (pos, c) = random_polygon(&mut rng, n);
        let mesh = PeriodicMesh::uniform(n)?;
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        worst = worst.max(weak_form_crosscheck(&mesh, &pos, &c, |c| a * c + b)?.relative());
    }
    // residual of the cyclic solver on random dominant systems
    let mut solver: f64 = 0.0;
    for _ in 0..POLYGONS {
        let n = rng.gen_range(3..=64);
        let off: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| off[i].abs() + off[(i + n - 1) % n].abs() + rng.gen_range(0.1..2.0))
            .collect();
        let a = CyclicTridiagonal::new(diag, off)?;
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = a.solve(&b)?;
        let ax = a.apply(&x);
        let num = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let den = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        solver = solver.max(num / den);
    }
    Ok((
        worst <= IDENTITY_TOL && solver <= IDENTITY_TOL,
        format!("{POLYGONS} polygons, weak form {worst:.2e}, cyclic solve residual {solver:.2e}, tol {IDENTITY_TOL:.0e}"),
    ))
}

fn audit(seed: u64) -> Result<(bool, String)> {
    let mut states = 0usize;
    let mut violations = Vec::new();
    for (problem, cfg) in [
        (radial_problem(), SolverConfig::new(64, 1e-3, 0.05)?),
        (oscillating_problem(), SolverConfig::with_h2_step(41, 0.05)?),
    ] {
        let mut err = None;
        let mut obs = |_: &SimState, s: &SimState| {
            if err.is_some() {
                return;
            }
            match audit_step_systems(s, &cfg, seed ^ s.step as u64) {
                Ok(a) => {
                    states += 1;
                    violations.extend(a.violations.into_iter().map(|v| format!("{} step {}: {v}", problem.name, s.step)));
                }
                Err(e) => err = Some(e),
            }
        };
        run(&problem, &cfg, &mut [&mut obs])?;
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    let detail = match violations.first() {
        None => format!("{states} states, all matrices symmetric and positive definite"),
        Some(v) => format!("{} violations, first: {v}", violations.len()),
    };
    Ok((violations.is_empty(), detail))
}

fn identities(seed: u64) -> Result<(bool, String)> {
    let ids = identity_suite(POLYGONS, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut nubar = ids.max_nubar_norm;
    for _ in 0..POLYGONS {
        let n = rng.gen_range(3..=64);
        let (pos, _) = random_polygon(&mut rng, n);
        let g = PolygonGeometry::from_positions(&pos)?;
        nubar = g.nubar.iter().map(|v| v.norm()).fold(nubar, f64::max);
    }
    Ok((
        ids.max_length_rate <= IDENTITY_TOL && ids.max_weak_form <= IDENTITY_TOL && nubar <= 1.0,
        format!(
            "length rate {:.2e}, weak form {:.2e}, max |nubar| {nubar:.15}",
            ids.max_length_rate, ids.max_weak_form
        ),
    ))
}

fn mass() -> Result<(bool, String)> {
    let without = mass_balance_check(&radial_problem(), &SolverConfig::new(64, 1e-3, 0.2)?)?;
    let with = mass_balance_check(&oscillating_problem(), &SolverConfig::new(41, 1e-3, 0.2)?)?;
    let worst = without.max_rel_defect.max(with.max_rel_defect);
    Ok((
        worst <= MASS_TOL,
        format!(
            "budget defect {:.2e} without source, {:.2e} with source, tol {MASS_TOL:.0e}",
            without.max_rel_defect, with.max_rel_defect
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_names_roundtrip() {
        for c in Check::ALL {
            assert_eq!(c.to_string().parse::<Check>().unwrap(), c);
        }
        assert!("all".parse::<Check>().is_err());
    }

    #[test]
    fn mutation_flips_residual() {
        let clean = run_check(Check::Residual, None, 3).unwrap();
        assert!(clean.passed, "{clean}");
        let bad = run_check(Check::Residual, Some(parse_mutation("sc:2").unwrap()), 3).unwrap();
        assert!(!bad.passed, "{bad}");
        assert!(parse_mutation("sc:9").is_err());
    }
}
