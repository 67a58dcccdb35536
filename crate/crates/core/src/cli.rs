//! Command-line front end.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code, writing to the given streams so the whole front end can be
//! driven in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::chain::{classify, compare_reference, run_chain, ChainReport, ReferenceCheck, Status};
use crate::dynamics::{action_residual, integrate, start_parameters, DynamicsError, ParameterPath, PhasePoint};
use crate::expr::{Expr, Symbol, DEFAULT_SEED};
use crate::legendre::{build_hj_system, HJSystem, LegendreError};
use crate::model::{builtin_model, load_model, Model};
use crate::pathint::{kernel_comparison, sliced_kernel};
use crate::quantize::{reduced_spectrum, Grid, QuantizeError, Stencil};

/// Version of the JSON report layout.
pub const SCHEMA: u32 = 1;

/// Environment variable overriding the zero-test seed.
pub const SEED_VAR: &str = "HJRED_SEED";

/// Prefix selecting a bundled model instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Integrable = 0,
    Error = 1,
    Inconsistent = 2,
    Undecided = 3,
    Unrecognized = 4,
}

#[derive(Debug, Parser)]
#[command(name = "hjred", version, about = "Hamilton-Jacobi analysis of singular Lagrangians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive the Hamilton-Jacobi system and run the integrability chain.
    Analyze {
        /// Model file, or `builtin:<name>`.
        model: String,
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
        /// Constant values, `name=value,...`.
        #[arg(long)]
        set: Option<String>,
    },
    /// Integrate the total differential equations and write a CSV trajectory.
    #[command(allow_negative_numbers = true)]
    Simulate {
        model: String,
        /// Initial point, `name=value,...`.
        #[arg(long)]
        init: String,
        /// Distance travelled along the chosen parameter.
        #[arg(long, default_value_t = 10.0)]
        span: f64,
        /// Largest parameter-space step.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Parameter to move; defaults to the evolution parameter.
        #[arg(long)]
        along: Option<String>,
        /// Trajectory CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        set: Option<String>,
    },
    /// Spectrum of the reduced Hamiltonian on a uniform grid.
    #[command(allow_negative_numbers = true)]
    Spectrum {
        model: String,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long, default_value_t = 10.0)]
        extent: f64,
        #[arg(long, value_enum, default_value_t = StencilArg::Sinc)]
        stencil: StencilArg,
        /// Spectrum CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        set: Option<String>,
    },
    /// Compare the sliced path integral with the operator exponential.
    #[command(allow_negative_numbers = true)]
    Kernel {
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        e: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 256)]
        slices: usize,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 8.0)]
        extent: f64,
        #[arg(long)]
        json: bool,
        /// Sliced kernel CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StencilArg {
    ThreePoint,
    Sinc,
}

impl From<StencilArg> for Stencil {
    fn from(s: StencilArg) -> Self {
        match s {
            StencilArg::ThreePoint => Stencil::ThreePoint,
            StencilArg::Sinc => Stencil::Sinc,
        }
    }
}

// A failure with its exit code and message.
struct Failure {
    exit: Exit,
    message: String,
}

fn fail(exit: Exit, message: impl ToString) -> Failure {
    Failure { exit, message: message.to_string() }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        fail(Exit::Error, e)
    }
}

/// Zero-test seed from the environment, or the default.
pub fn seed_from_env() -> Result<u64, String> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_VAR} must be an unsigned integer, got `{v}`")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                Exit::Error as i32
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = seed_from_env().map_err(|m| fail(Exit::Error, m)).and_then(|seed| match cli.command {
        Command::Analyze { model, json, set } => analyze(&model, json, set.as_deref(), seed, out),
        Command::Simulate { model, init, span, step, along, out: path, set } => {
            simulate(&model, &init, span, step, along.as_deref(), path, set.as_deref(), seed, out)
        }
        Command::Spectrum { model, grid, extent, stencil, out: path, set } => {
            spectrum(&model, grid, extent, stencil.into(), path, set.as_deref(), seed, out)
        }
        Command::Kernel { mass, e, beta, slices, grid, extent, json, out: path } => {
            kernel(mass, e, beta, slices, grid, extent, json, path, out)
        }
    });
    match result {
        Ok(exit) => exit as i32,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.exit as i32
        }
    }
}

fn load(spec: &str, set: Option<&str>) -> Result<Model, Failure> {
    let mut model = match spec.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => builtin_model(name).ok_or_else(|| fail(Exit::Error, format!("no builtin model `{name}`")))?,
        None => load_model(spec).map_err(|e| fail(Exit::Error, format!("{spec}: {e}")))?,
    };
    if let Some(set) = set {
        let values = PhasePoint::parse(set).map_err(|m| fail(Exit::Error, m))?;
        for (k, v) in &values.values {
            model.set_constant(k, *v).map_err(|e| fail(Exit::Error, e))?;
        }
    }
    Ok(model)
}

fn analysis(model: &Model, seed: u64) -> Result<(HJSystem, ChainReport), Failure> {
    let sys = build_hj_system(model, seed).map_err(|e| match e {
        LegendreError::UndecidedMinor { .. } => fail(Exit::Undecided, e),
        _ => fail(Exit::Error, e),
    })?;
    let mut report = run_chain(&sys, seed).map_err(|e| fail(Exit::Error, e))?;
    classify(&mut report, &sys, seed).map_err(|e| fail(Exit::Error, e))?;
    Ok((sys, report))
}

fn status_exit(status: Status) -> Exit {
    match status {
        Status::Integrable => Exit::Integrable,
        Status::Inconsistent => Exit::Inconsistent,
        Status::Undecided => Exit::Undecided,
    }
}

fn require_integrable(report: &ChainReport) -> Result<(), Failure> {
    match report.status {
        Status::Integrable => Ok(()),
        s => Err(fail(status_exit(s), format!("the chain is {}", status_name(s)))),
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Integrable => "integrable",
        Status::Inconsistent => "inconsistent",
        Status::Undecided => "undecided",
    }
}

#[derive(Debug, Serialize)]
struct ModelEcho {
    name: String,
    coordinates: Vec<Symbol>,
    time: Symbol,
    constants: Vec<(Symbol, Option<f64>)>,
    assumptions: Vec<String>,
    lagrangian: Expr,
    expect_reduced: Option<Expr>,
}

#[derive(Debug, Serialize)]
struct PairEcho {
    coordinate: Symbol,
    momentum: Symbol,
    velocity: Symbol,
    solved_velocity: Expr,
}

#[derive(Debug, Serialize)]
struct HamiltonianEcho {
    label: String,
    parameter: Symbol,
    momentum: Symbol,
    expr: Expr,
}

#[derive(Debug, Serialize)]
struct SystemEcho {
    rank: usize,
    dynamical: Vec<PairEcho>,
    h0: Expr,
    hamiltonians: Vec<HamiltonianEcho>,
}

#[derive(Debug, Serialize)]
struct ReducedEcho {
    parameter: Symbol,
    sign: String,
    value: Expr,
    admissible: bool,
    reduced_h0: Expr,
    reference: Option<ReferenceCheck>,
}

/// Machine-readable analysis of one model.
#[derive(Debug, Serialize)]
struct AnalysisReport {
    schema: u32,
    version: &'static str,
    seed: u64,
    model: ModelEcho,
    system: SystemEcho,
    chain: ChainReport,
    reduced: Vec<ReducedEcho>,
}

fn build_report(sys: &HJSystem, chain: ChainReport, seed: u64) -> AnalysisReport {
    let m = &sys.model;
    let model = ModelEcho {
        name: m.name.clone(),
        coordinates: m.coordinates.clone(),
        time: m.time.clone(),
        constants: m.constants.clone(),
        assumptions: m.assumptions.iter().map(|a| a.to_string()).collect(),
        lagrangian: m.lagrangian.clone(),
        expect_reduced: m.expect_reduced.clone(),
    };
    let system = SystemEcho {
        rank: sys.rank,
        dynamical: sys
            .dynamical
            .iter()
            .map(|d| PairEcho {
                coordinate: d.coordinate.clone(),
                momentum: d.momentum.clone(),
                velocity: d.velocity.clone(),
                solved_velocity: d.solved.clone(),
            })
            .collect(),
        h0: sys.h0.clone(),
        hamiltonians: sys
            .parameters
            .iter()
            .zip(&sys.extended)
            .enumerate()
            .map(|(i, (p, e))| HamiltonianEcho {
                label: format!("H'{i}"),
                parameter: p.symbol.clone(),
                momentum: p.momentum.clone(),
                expr: e.clone(),
            })
            .collect(),
    };
    let reduced = chain
        .branches
        .iter()
        .map(|b| ReducedEcho {
            parameter: b.parameter.clone(),
            sign: b.sign.clone(),
            value: b.value.clone(),
            admissible: b.admissible,
            reduced_h0: b.reduced_h0.clone(),
            reference: m.expect_reduced.as_ref().map(|r| compare_reference(&b.reduced_h0, r)),
        })
        .collect();
    AnalysisReport { schema: SCHEMA, version: env!("CARGO_PKG_VERSION"), seed, model, system, chain, reduced }
}

fn write_text(r: &AnalysisReport, out: &mut dyn Write) -> std::io::Result<()> {
    let m = &r.model;
    writeln!(out, "model: {}", m.name)?;
    writeln!(out, "lagrangian: {}", m.lagrangian)?;
    writeln!(out, "rank: {}", r.system.rank)?;
    for d in &r.system.dynamical {
        writeln!(out, "  {} = {}", d.velocity, d.solved_velocity)?;
    }
    writeln!(out, "H0 = {}", r.system.h0)?;
    for h in &r.system.hamiltonians {
        writeln!(out, "{} = {}  [{}]", h.label, h.expr, h.parameter)?;
    }
    writeln!(out, "status: {}", status_name(r.chain.status))?;
    writeln!(out, "rounds: {}", r.chain.rounds)?;
    writeln!(out, "constraints:")?;
    for c in &r.chain.constraints {
        let class = match c.classification {
            Some(k) => serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            None => "unclassified".into(),
        };
        writeln!(out, "  {} = {}  ({class})", c.label, c.expr)?;
    }
    for f in &r.chain.frozen {
        writeln!(out, "frozen: {}  (coefficient {} in d{})", f.parameter, f.coefficient, f.source)?;
    }
    for b in &r.reduced {
        writeln!(
            out,
            "branch {} {} = {}{}",
            b.sign,
            b.parameter,
            b.value,
            if b.admissible { "" } else { "  (violates assumptions)" }
        )?;
        writeln!(out, "  reduced H0 = {}", b.reduced_h0)?;
        if let Some(check) = b.reference {
            let word = match check {
                ReferenceCheck::Agrees => "agrees with",
                ReferenceCheck::OppositeSign => "has the opposite sign of",
                ReferenceCheck::Differs => "differs from",
            };
            writeln!(out, "  {word} the expected reduced Hamiltonian")?;
        }
    }
    for i in &r.chain.issues {
        writeln!(out, "note: {i}")?;
    }
    writeln!(out, "seed: {}", r.seed)
}

fn analyze(spec: &str, json: bool, set: Option<&str>, seed: u64, out: &mut dyn Write) -> Result<Exit, Failure> {
    let model = load(spec, set)?;
    let (sys, chain) = analysis(&model, seed)?;
    let exit = status_exit(chain.status);
    let report = build_report(&sys, chain, seed);
    if json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| fail(Exit::Error, e))?;
        writeln!(out, "{text}")?;
    } else {
        write_text(&report, out)?;
    }
    Ok(exit)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    spec: &str,
    init: &str,
    span: f64,
    step: f64,
    along: Option<&str>,
    path: Option<PathBuf>,
    set: Option<&str>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<Exit, Failure> {
    let model = load(spec, set)?;
    let (sys, report) = analysis(&model, seed)?;
    require_integrable(&report)?;
    let init = PhasePoint::parse(init).map_err(|m| fail(Exit::Error, m))?;
    let dyn_fail = |e: DynamicsError| match e {
        DynamicsError::OffSurface { .. } => fail(Exit::Inconsistent, e),
        _ => fail(Exit::Error, e),
    };
    let start = start_parameters(&sys, &init).map_err(dyn_fail)?;
    let index = match along {
        None => 0,
        Some(name) => sys
            .parameters
            .iter()
            .position(|p| p.symbol.name() == name)
            .ok_or_else(|| fail(Exit::Error, format!("`{name}` is not a parameter")))?,
    };
    if !span.is_finite() {
        return Err(fail(Exit::Error, "span must be finite"));
    }
    let traj = integrate(&sys, &report, &init, &ParameterPath::along(start, index, span), step).map_err(dyn_fail)?;
    if let Some(p) = path {
        std::fs::write(&p, traj.to_csv()).map_err(|e| fail(Exit::Error, format!("{}: {e}", p.display())))?;
    }
    writeln!(out, "samples: {}", traj.samples.len())?;
    for (label, d) in &traj.drift {
        writeln!(out, "drift {label}: {d:e}")?;
    }
    writeln!(out, "max drift: {:e}", traj.max_drift())?;
    match action_residual(&traj, &sys) {
        Ok(r) => writeln!(out, "action residual: {r:e}")?,
        Err(DynamicsError::NotTimePath) => writeln!(out, "action residual: n/a")?,
        Err(e) => return Err(fail(Exit::Error, e)),
    }
    writeln!(out, "z: {:e}", traj.last().z)?;
    Ok(Exit::Integrable)
}

#[allow(clippy::too_many_arguments)]
fn spectrum(
    spec: &str,
    n: usize,
    extent: f64,
    stencil: Stencil,
    path: Option<PathBuf>,
    set: Option<&str>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<Exit, Failure> {
    let model = load(spec, set)?;
    let grid = Grid::new(n, extent).map_err(|e| fail(Exit::Error, e))?;
    let (sys, report) = analysis(&model, seed)?;
    require_integrable(&report)?;
    let pairs = sys.dynamical_pairs();
    let branch = report.branches.iter().find(|b| b.admissible);
    let (Some(branch), [pair]) = (branch, pairs.as_slice()) else {
        return Err(fail(Exit::Unrecognized, "no one-dimensional reduced Hamiltonian to quantize"));
    };
    let s = reduced_spectrum(&branch.reduced_h0, pair, &sys.model.constant_values(), &grid, stencil)
        .map_err(|e| match e {
            QuantizeError::Unrecognized(_) => fail(Exit::Unrecognized, e),
            _ => fail(Exit::Error, e),
        })?;
    if let Some(p) = path {
        std::fs::write(&p, s.to_csv()).map_err(|e| fail(Exit::Error, format!("{}: {e}", p.display())))?;
    }
    writeln!(out, "reduced H0 = {}", branch.reduced_h0)?;
    writeln!(out, "g(lambda) = {}", s.g)?;
    writeln!(out, "resolved levels: {}", s.levels.len())?;
    writeln!(out, "admissible count: {}", s.count())?;
    for l in s.admissible().take(10) {
        writeln!(out, "  n={} lambda={} g={}", l.n, l.lambda, l.g.unwrap_or(f64::NAN))?;
    }
    Ok(Exit::Integrable)
}

#[allow(clippy::too_many_arguments)]
fn kernel(
    mass: f64,
    e: f64,
    beta: f64,
    slices: usize,
    n: usize,
    extent: f64,
    json: bool,
    path: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<Exit, Failure> {
    let grid = Grid::new(n, extent).map_err(|e| fail(Exit::Error, e))?;
    let c = kernel_comparison(mass, e, beta, slices, &grid).map_err(|e| fail(Exit::Error, e))?;
    if let Some(p) = path {
        let k = sliced_kernel(mass, e, beta, slices, &grid).map_err(|e| fail(Exit::Error, e))?;
        std::fs::write(&p, k.to_csv()).map_err(|e| fail(Exit::Error, format!("{}: {e}", p.display())))?;
    }
    if json {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            version: &'static str,
            comparison: &'a crate::pathint::KernelComparison,
        }
        let doc = Doc { schema: SCHEMA, version: env!("CARGO_PKG_VERSION"), comparison: &c };
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(|e| fail(Exit::Error, e))?)?;
    } else {
        writeln!(out, "slices: {}", c.slices)?;
        writeln!(out, "max error: {:e}", c.error)?;
        writeln!(out, "max error ({} slices): {:e}", 2 * c.slices, c.error_doubled)?;
        match c.ratio {
            Some(r) => writeln!(out, "ratio: {r}")?,
            None => writeln!(out, "ratio: n/a")?,
        }
    }
    Ok(Exit::Integrable)
}
