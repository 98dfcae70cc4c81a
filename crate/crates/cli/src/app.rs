use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use curveflow::analysis::{
    convergence_study_space, convergence_study_time, fmt_f64, halving_levels, ErrorAccumulator, DEFAULT_QUADRATURE,
};
use curveflow::geometry::{discrete_mass, total_length};
use curveflow::problems::{
    oscillating_problem, pure_csf_problem, radial_observables, radial_problem, radial_reference, ProblemSpec,
    RadialState, RADIAL_B0, RADIAL_R0,
};
use curveflow::quadrature::Quadrature;
use curveflow::scheme::{run, Observer, SimState, SolverConfig};

use crate::checks::{parse_mutation, run_check, Check};
use crate::config::ConfigFile;
use crate::parse::{
    parse_m_range, parse_node_list, parse_nodes, parse_positive_f64, DtRule, ProblemName,
};

/// Radius used for `pure-csf` when none is given.
pub const DEFAULT_CSF_RADIUS: f64 = 0.5;
pub const DEFAULT_BASE_DT: f64 = 0.02;
/// Step of the RK4 reference for the radial problem.
const RADIAL_REFERENCE_DT: f64 = 1e-5;
/// Worker threads for the study commands; unset means one per core.
pub const THREADS_ENV: &str = "CURVEFLOW_THREADS";

/// How a command ended, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Aborted,
    ValidationFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Aborted => 2,
            Status::ValidationFailed => 3,
        }
    }
}

/// Exit code for configuration and I/O errors.
pub const CONFIG_ERROR: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "curveflow", version, about = "Curve shortening flow coupled to a diffusing surface field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one problem and report the final state.
    Run(RunArgs),
    /// Error table over refinements of the oscillating problem.
    Convergence(ConvergenceArgs),
    /// Self-checks of the discretisation.
    Validate(ValidateArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// radial, oscillating or pure-csf
    #[arg(long)]
    pub problem: Option<String>,
    /// Number of nodes N.
    #[arg(long)]
    pub nodes: Option<String>,
    /// Time step, or `h2` for 1/N².
    #[arg(long)]
    pub dt: Option<String>,
    /// Final time; defaults to the problem's own.
    #[arg(long)]
    pub tmax: Option<String>,
    /// Minimum segment length; defaults to 1e-3/N.
    #[arg(long)]
    pub tol: Option<String>,
    /// Initial radius for pure-csf.
    #[arg(long)]
    pub radius: Option<String>,
    /// Quadrature for the error functionals, e.g. gauss5 or trapezoid5.
    #[arg(long)]
    pub quad: Option<String>,
    /// Write the final state as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one CSV row of observables per step.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ConvergenceArgs {
    /// space (vary N, δ = h²) or time (fixed N, halve δ)
    #[arg(long)]
    pub mode: Option<String>,
    /// Node counts for space mode, or the single N for time mode.
    #[arg(long)]
    pub nodes: Option<String>,
    /// Halving levels `a..b` for time mode.
    #[arg(long = "m-range")]
    pub m_range: Option<String>,
    /// Step at level 0 for time mode.
    #[arg(long = "base-dt")]
    pub base_dt: Option<String>,
    #[arg(long)]
    pub tmax: Option<String>,
    #[arg(long)]
    pub quad: Option<String>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    /// Run a single check: residual, crosscheck, audit, identities or mass.
    #[arg(long)]
    pub only: Option<String>,
    /// Flip one source term (`su1:k`, `su2:k`, `sc:k`) in the residual check.
    #[arg(long)]
    pub mutate: Option<String>,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG_ERROR } else { 0 });
        }
    };
    match execute(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

pub fn execute(cli: Cli) -> Result<Status> {
    init_threads()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run(a) => cmd_run(a, &mut out),
        Command::Convergence(a) => cmd_convergence(a, &mut out),
        Command::Validate(a) => cmd_validate(a, &mut out),
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
    // a second call in the same process (tests) finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    path.map(ConfigFile::load).transpose().map(Option::unwrap_or_default)
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing --{key}"))
}

fn parse_quad(s: &str) -> Result<Quadrature> {
    s.parse::<Quadrature>().map_err(anyhow::Error::msg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Resolved settings of a single run.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub problem: ProblemName,
    pub radius: Option<f64>,
    pub config: SolverConfig,
    pub quad: Quadrature,
}

pub fn plan_run(a: &RunArgs) -> Result<(RunPlan, ProblemSpec)> {
    let file = load_config(a.config.as_deref())?;
    let problem = need(file.merge(a.problem.clone(), "problem", |s| Ok(s.to_string()))?, "problem")?;
    let problem: ProblemName = problem.parse()?;
    let nodes = need(file.merge(a.nodes.as_deref().map(parse_nodes).transpose()?, "nodes", parse_nodes)?, "nodes")?;
    let dt = need(file.merge(a.dt.as_deref().map(str::parse).transpose()?, "dt", str::parse::<DtRule>)?, "dt")?;
    let pos = |v: &Option<String>, key: &str| -> Result<Option<f64>> {
        let flag = v.as_deref().map(parse_positive_f64).transpose().with_context(|| format!("--{key}"))?;
        file.merge(flag, key, parse_positive_f64)
    };
    let tmax = pos(&a.tmax, "tmax")?;
    let tol = pos(&a.tol, "tol")?;
    let radius = pos(&a.radius, "radius")?;
    let quad = file
        .merge(a.quad.as_deref().map(parse_quad).transpose()?, "quad", parse_quad)?
        .unwrap_or(DEFAULT_QUADRATURE);

    if radius.is_some() && problem != ProblemName::PureCsf {
        bail!("--radius applies to pure-csf only");
    }
    let spec = match problem {
        ProblemName::Radial => radial_problem(),
        ProblemName::Oscillating => oscillating_problem(),
        ProblemName::PureCsf => pure_csf_problem(radius.unwrap_or(DEFAULT_CSF_RADIUS))?,
    };
    let mut config = SolverConfig::new(nodes, dt.resolve(nodes), tmax.unwrap_or(spec.t_max))?;
    if let Some(tol) = tol {
        config = config.with_tol(tol)?;
    }
    let radius = (problem == ProblemName::PureCsf).then(|| radius.unwrap_or(DEFAULT_CSF_RADIUS));
    Ok((RunPlan { problem, radius, config, quad }, spec))
}

/// Writes `t,[R,B,]length,mass,min_q` per state.
pub struct TraceObserver<W: Write> {
    writer: csv::Writer<W>,
    radial: bool,
    error: Option<csv::Error>,
}

impl<W: Write> TraceObserver<W> {
    pub fn new(inner: W, radial: bool) -> Self {
        Self {
            writer: csv::Writer::from_writer(inner),
            radial,
            error: None,
        }
    }

    fn record(&mut self, s: &SimState) {
        if self.error.is_some() {
            return;
        }
        let mut row = vec![fmt_f64(s.time)];
        if self.radial {
            let o = radial_observables(s);
            row.extend([fmt_f64(o.r), fmt_f64(o.b)]);
        }
        row.extend([
            fmt_f64(total_length(&s.geom)),
            fmt_f64(discrete_mass(&s.geom, &s.field)),
            fmt_f64(s.min_segment()),
        ]);
        if let Err(e) = self.writer.write_record(&row) {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e).context("writing trace");
        }
        self.writer.flush().context("writing trace")
    }
}

impl<W: Write> Observer for TraceObserver<W> {
    fn on_start(&mut self, s: &SimState) {
        let mut header = vec!["t"];
        if self.radial {
            header.extend(["R", "B"]);
        }
        header.extend(["length", "mass", "min_q"]);
        if let Err(e) = self.writer.write_record(&header) {
            self.error = Some(e);
        }
        self.record(s);
    }

    fn on_step(&mut self, _prev: &SimState, next: &SimState) {
        self.record(next);
    }
}

/// Final state as `j,x,u1,u2,c`.
pub fn write_state<W: Write>(inner: W, s: &SimState) -> Result<()> {
    let mut w = csv::Writer::from_writer(inner);
    w.write_record(["j", "x", "u1", "u2", "c"])?;
    for (j, (p, c)) in s.positions.iter().zip(&s.field).enumerate() {
        w.write_record([j.to_string(), fmt_f64(s.mesh.nodes()[j]), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(*c)])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_run(a: RunArgs, out: &mut impl Write) -> Result<Status> {
    let (plan, spec) = plan_run(&a)?;
    let cfg = plan.config;
    plan.quad.validate().map_err(anyhow::Error::msg)?;

    let mut trace = a
        .trace
        .as_deref()
        .map(|p| create(p).map(|w| TraceObserver::new(w, plan.problem == ProblemName::Radial)))
        .transpose()?;
    let mut errors = spec.exact.as_ref().map(|ex| ErrorAccumulator::new(ex, cfg.dt, plan.quad, false));

    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if let Some(t) = trace.as_mut() {
        observers.push(t);
    }
    if let Some(e) = errors.as_mut() {
        observers.push(e);
    }
    let res = run(&spec, &cfg, &mut observers)?;
    drop(observers);
    if let Some(t) = trace {
        t.finish()?;
    }
    if let Some(p) = a.out.as_deref() {
        write_state(create(p)?, &res.final_state)?;
    }

    let s = &res.final_state;
    writeln!(out, "problem: {}", plan.problem)?;
    writeln!(out, "nodes: {}", cfg.n)?;
    writeln!(out, "dt: {}", fmt_f64(cfg.dt))?;
    writeln!(out, "tol: {}", fmt_f64(cfg.tol))?;
    writeln!(out, "steps: {} of {}", res.steps_completed, cfg.steps())?;
    writeln!(out, "t: {}", fmt_f64(s.time))?;
    writeln!(out, "length: {}", fmt_f64(total_length(&s.geom)))?;
    writeln!(out, "mass: {}", fmt_f64(discrete_mass(&s.geom, &s.field)))?;
    writeln!(out, "min_q: {}", fmt_f64(s.min_segment()))?;
    match plan.problem {
        ProblemName::Radial => {
            let o = radial_observables(s);
            let init = RadialState::new(RADIAL_R0, RADIAL_B0);
            let r = radial_reference(init, &spec.forcing, &[s.time], RADIAL_REFERENCE_DT)?[0];
            writeln!(out, "R: {} (reference {})", fmt_f64(o.r), fmt_f64(r.r))?;
            writeln!(out, "B: {} (reference {})", fmt_f64(o.b), fmt_f64(r.b))?;
        }
        ProblemName::PureCsf => {
            let r0 = plan.radius.unwrap_or(DEFAULT_CSF_RADIUS);
            let exact = (r0 * r0 - 2.0 * s.time).max(0.0).sqrt();
            let r = total_length(&s.geom) / (2.0 * std::f64::consts::PI);
            writeln!(out, "R: {} (exact {})", fmt_f64(r), fmt_f64(exact))?;
        }
        ProblemName::Oscillating => {}
    }
    match (res.abort, errors) {
        (Some(ab), _) => {
            writeln!(
                out,
                "aborted: step {} at t = {} with min segment {} < tol {}",
                ab.step,
                fmt_f64(ab.time),
                fmt_f64(ab.min_len),
                fmt_f64(ab.tol)
            )?;
            out.flush()?;
            return Ok(Status::Aborted);
        }
        (None, Some(acc)) => {
            for (k, e) in acc.errors().iter().enumerate() {
                writeln!(out, "E{}: {}", k + 1, fmt_f64(*e))?;
            }
        }
        (None, None) => {}
    }
    Ok(Status::Ok)
}

fn cmd_convergence(a: ConvergenceArgs, out: &mut impl Write) -> Result<Status> {
    let file = load_config(a.config.as_deref())?;
    let str_of = |s: &str| Ok(s.to_string());
    let mode = file.merge(a.mode.clone(), "mode", str_of)?.unwrap_or_else(|| "space".into());
    let nodes = file.merge(a.nodes.clone(), "nodes", str_of)?;
    let tmax = file
        .merge(a.tmax.as_deref().map(parse_positive_f64).transpose()?, "tmax", parse_positive_f64)?;
    let quad = file
        .merge(a.quad.as_deref().map(parse_quad).transpose()?, "quad", parse_quad)?
        .unwrap_or(DEFAULT_QUADRATURE);

    let mut problem = oscillating_problem();
    if let Some(t) = tmax {
        problem.t_max = t;
    }
    let table = match mode.trim() {
        "space" => {
            let nodes = parse_node_list(nodes.as_deref().unwrap_or("21,61,121,241"))?;
            convergence_study_space(&problem, &nodes, quad)?
        }
        "time" => {
            let n = parse_nodes(nodes.as_deref().unwrap_or("2001"))?;
            let levels = file
                .merge(a.m_range.as_deref().map(parse_m_range).transpose()?, "m-range", parse_m_range)?
                .unwrap_or_else(|| (0..=4).collect());
            let base = file
                .merge(a.base_dt.as_deref().map(parse_positive_f64).transpose()?, "base-dt", parse_positive_f64)?
                .unwrap_or(DEFAULT_BASE_DT);
            convergence_study_time(&problem, n, &halving_levels(base, levels), quad)?
        }
        other => bail!("unknown mode `{other}` (expected space or time)"),
    };
    let csv = table.to_csv();
    match a.out.as_deref() {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(csv.as_bytes())?;
            w.flush()?;
        }
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(Status::Ok)
}

fn cmd_validate(a: ValidateArgs, out: &mut impl Write) -> Result<Status> {
    let checks = match a.only.as_deref() {
        Some(s) => vec![s.parse::<Check>()?],
        None => Check::ALL.to_vec(),
    };
    let mutation = a.mutate.as_deref().map(parse_mutation).transpose()?;
    if mutation.is_some() && !checks.contains(&Check::Residual) {
        bail!("--mutate only affects the residual check");
    }
    let mut all = true;
    for c in checks {
        let v = run_check(c, mutation, a.seed)?;
        all &= v.passed;
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(if all { Status::Ok } else { Status::ValidationFailed })
}
