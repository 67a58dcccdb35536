//! Numerical integration of the total differential equations.
//!
//! A [`ParameterPath`] is a polyline through parameter space. Along each leg
//! the Pfaffian system `dv = sum_alpha F_alpha(v) dt_alpha` becomes an ODE in
//! the arc length, integrated with fixed-step classical RK4. The action `z`
//! is carried as one more state component.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::chain::ChainReport;
use crate::expr::{CompiledExpr, Expr, ExprError, Symbol};
use crate::legendre::{equations_of_motion, HJSystem};

/// Largest constraint violation accepted at the initial point.
pub const SURFACE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("initial point is off the constraint surface: {label} = {value:e}")]
    OffSurface { label: String, value: f64 },
    #[error("path varies the frozen parameter `{0}`")]
    FrozenVaries(String),
    #[error("no value for `{0}`")]
    Missing(String),
    #[error("`{0}` is not a phase-space variable of this system")]
    Unknown(String),
    #[error("invalid path: {0}")]
    BadPath(String),
    #[error("step must be positive and finite")]
    BadStep,
    #[error("expected a system with exactly one parameter besides the time")]
    NotGaugeShaped,
    #[error("action check needs a path along the time parameter only")]
    NotTimePath,
    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// Piecewise-linear path through parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPath {
    pub waypoints: Vec<Vec<f64>>,
}

impl ParameterPath {
    pub fn new(waypoints: Vec<Vec<f64>>) -> Result<Self, DynamicsError> {
        let Some(first) = waypoints.first() else {
            return Err(DynamicsError::BadPath("no waypoints".into()));
        };
        if waypoints.iter().any(|w| w.len() != first.len()) {
            return Err(DynamicsError::BadPath("waypoints differ in dimension".into()));
        }
        if waypoints.iter().flatten().any(|x| !x.is_finite()) {
            return Err(DynamicsError::BadPath("non-finite waypoint".into()));
        }
        Ok(ParameterPath { waypoints })
    }

    /// Straight line from `start` moving parameter `index` by `delta`.
    pub fn along(start: Vec<f64>, index: usize, delta: f64) -> Self {
        let mut end = start.clone();
        end[index] += delta;
        ParameterPath { waypoints: vec![start, end] }
    }

    /// Append a leg moving parameter `index` by `delta`.
    pub fn then(mut self, index: usize, delta: f64) -> Self {
        let mut end = self.waypoints.last().unwrap().clone();
        end[index] += delta;
        self.waypoints.push(end);
        self
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Arc-length fraction along the path, in `[0, 1]`.
    pub s: f64,
    pub parameters: Vec<f64>,
    pub q: Vec<f64>,
    /// Dynamical momenta, then parameter momenta.
    pub p: Vec<f64>,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub parameter_names: Vec<Symbol>,
    pub q_names: Vec<Symbol>,
    pub p_names: Vec<Symbol>,
    pub samples: Vec<Sample>,
    /// Largest `|c|` seen along the trajectory for each constraint label.
    pub drift: Vec<(String, f64)>,
    pub constants: BTreeMap<Symbol, f64>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().unwrap()
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().map(|(_, d)| *d).fold(0.0, f64::max)
    }

    pub fn drift_of(&self, label: &str) -> Option<f64> {
        self.drift.iter().find(|(l, _)| l == label).map(|(_, d)| *d)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(i) = self.parameter_names.iter().position(|s| s.name() == name) {
            return Some(self.samples.iter().map(|x| x.parameters[i]).collect());
        }
        if let Some(i) = self.q_names.iter().position(|s| s.name() == name) {
            return Some(self.samples.iter().map(|x| x.q[i]).collect());
        }
        if let Some(i) = self.p_names.iter().position(|s| s.name() == name) {
            return Some(self.samples.iter().map(|x| x.p[i]).collect());
        }
        (name == "z").then(|| self.samples.iter().map(|x| x.z).collect())
    }

    /// CSV with header `s,<parameters>,<q>,<p>,z`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for n in self.parameter_names.iter().chain(&self.q_names).chain(&self.p_names) {
            out.push(',');
            out.push_str(n.name());
        }
        out.push_str(",z\n");
        for x in &self.samples {
            let _ = write!(out, "{:.16e}", x.s);
            for v in x.parameters.iter().chain(&x.q).chain(&x.p) {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{:.16e}", x.z);
        }
        out
    }
}

/// Initial phase-space point. Parameter momenta that are not given are
/// placed on the surface `H'_alpha = 0`; the evolution parameter defaults to 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhasePoint {
    pub values: BTreeMap<String, f64>,
}

impl PhasePoint {
    pub fn new<'a>(values: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        PhasePoint { values: values.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }

    /// Parse `name=value,name=value`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("expected name=value, found `{item}`"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("`{}` is not a number", v.trim()))?;
            values.insert(k.trim().to_string(), v);
        }
        Ok(PhasePoint { values })
    }
}

// Compiled flow: slot layout is parameters, q, p (dynamical then parameter
// momenta), constants.
struct Flow {
    n_q: usize,
    n_p: usize,
    slots: Vec<Symbol>,
    constants: Vec<f64>,
    // rhs[v][alpha] for v over q then p; action[alpha].
    rhs: Vec<Vec<CompiledExpr>>,
    action: Vec<CompiledExpr>,
    constraints: Vec<(String, CompiledExpr)>,
}

impl Flow {
    fn new(sys: &HJSystem, report: &ChainReport, constants: &BTreeMap<Symbol, f64>) -> Result<Self, DynamicsError> {
        let table = equations_of_motion(sys);
        let params = sys.parameter_symbols();
        let qs: Vec<Symbol> = sys.dynamical.iter().map(|d| d.coordinate.clone()).collect();
        let ps: Vec<Symbol> = sys
            .dynamical
            .iter()
            .map(|d| d.momentum.clone())
            .chain(sys.parameters.iter().map(|p| p.momentum.clone()))
            .collect();
        let consts: Vec<Symbol> = sys.model.constant_symbols();
        let mut values = Vec::new();
        for c in &consts {
            values.push(*constants.get(c).ok_or_else(|| DynamicsError::Missing(c.to_string()))?);
        }
        let slots: Vec<Symbol> = params.iter().chain(&qs).chain(&ps).chain(&consts).cloned().collect();
        let compile = |e: &Expr| CompiledExpr::new(e, &slots);
        let mut rhs = Vec::new();
        for v in qs.iter().chain(&ps) {
            let row = table.rows.iter().find(|r| r.variable == *v).expect("row for every phase variable");
            rhs.push(row.coefficients.iter().map(compile).collect::<Result<Vec<_>, _>>()?);
        }
        let action = table.action.iter().map(compile).collect::<Result<Vec<_>, _>>()?;
        let constraints = report
            .constraints
            .iter()
            .map(|c| Ok((c.label.clone(), compile(&c.expr)?)))
            .collect::<Result<Vec<_>, ExprError>>()?;
        Ok(Flow {
            n_q: qs.len(),
            n_p: ps.len(),
            slots,
            constants: values,
            rhs,
            action,
            constraints,
        })
    }

    fn point(&self, params: &[f64], state: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.slots.len());
        v.extend_from_slice(params);
        v.extend_from_slice(&state[..self.n_q + self.n_p]);
        v.extend_from_slice(&self.constants);
        v
    }

    // d(state)/ds for parameter velocity `dir`; state is q, p, z.
    fn derivative(&self, params: &[f64], state: &[f64], dir: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let pt = self.point(params, state);
        for (k, row) in self.rhs.iter().enumerate() {
            let mut acc = 0.0;
            for (alpha, f) in row.iter().enumerate() {
                if dir[alpha] != 0.0 {
                    acc += f.eval(&pt)? * dir[alpha];
                }
            }
            out[k] = acc;
        }
        let mut z = 0.0;
        for (alpha, f) in self.action.iter().enumerate() {
            if dir[alpha] != 0.0 {
                z += f.eval(&pt)? * dir[alpha];
            }
        }
        out[self.n_q + self.n_p] = z;
        Ok(())
    }

    fn constraint_values(&self, params: &[f64], state: &[f64]) -> Result<Vec<f64>, ExprError> {
        let pt = self.point(params, state);
        self.constraints.iter().map(|(_, c)| c.eval(&pt)).collect()
    }
}

fn initial_state(
    sys: &HJSystem,
    init: &PhasePoint,
    start: &[f64],
    constants: &BTreeMap<Symbol, f64>,
) -> Result<Vec<f64>, DynamicsError> {
    let known: Vec<String> = sys
        .phase_symbols()
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in init.values.keys() {
        if !known.contains(k) {
            return Err(DynamicsError::Unknown(k.clone()));
        }
    }
    let mut point: BTreeMap<Symbol, f64> = constants.clone();
    for (p, v) in sys.parameters.iter().zip(start) {
        point.insert(p.symbol.clone(), *v);
    }
    let mut state = Vec::new();
    for d in &sys.dynamical {
        let v = *init.values.get(d.coordinate.name()).ok_or_else(|| DynamicsError::Missing(d.coordinate.to_string()))?;
        point.insert(d.coordinate.clone(), v);
        state.push(v);
    }
    for d in &sys.dynamical {
        let v = *init.values.get(d.momentum.name()).ok_or_else(|| DynamicsError::Missing(d.momentum.to_string()))?;
        point.insert(d.momentum.clone(), v);
        state.push(v);
    }
    for (p, h) in sys.parameters.iter().zip(&sys.hamiltonians) {
        let v = match init.values.get(p.momentum.name()) {
            Some(v) => *v,
            None => -crate::expr::eval_num(h, &point)?,
        };
        point.insert(p.momentum.clone(), v);
        state.push(v);
    }
    state.push(0.0);
    Ok(state)
}

/// Starting parameter values: the evolution parameter from `init` or 0, the
/// others from `init` (required).
pub fn start_parameters(sys: &HJSystem, init: &PhasePoint) -> Result<Vec<f64>, DynamicsError> {
    sys.parameters
        .iter()
        .enumerate()
        .map(|(i, p)| match init.values.get(p.symbol.name()) {
            Some(v) => Ok(*v),
            None if i == 0 => Ok(0.0),
            None => Err(DynamicsError::Missing(p.symbol.to_string())),
        })
        .collect()
}

/// Integrate along `path` with RK4 steps of parameter-space length at most
/// `step`.
pub fn integrate(
    sys: &HJSystem,
    report: &ChainReport,
    init: &PhasePoint,
    path: &ParameterPath,
    step: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate_with(sys, report, init, path, step, &sys.model.constant_values())
}

/// [`integrate`] with explicit constant values.
pub fn integrate_with(
    sys: &HJSystem,
    report: &ChainReport,
    init: &PhasePoint,
    path: &ParameterPath,
    step: f64,
    constants: &BTreeMap<Symbol, f64>,
) -> Result<Trajectory, DynamicsError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(DynamicsError::BadStep);
    }
    let params = sys.parameter_symbols();
    if path.start().len() != params.len() {
        return Err(DynamicsError::BadPath(format!(
            "expected {} parameter values, got {}",
            params.len(),
            path.start().len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if report.is_frozen(p) && path.waypoints.iter().any(|w| w[i] != path.start()[i]) {
            return Err(DynamicsError::FrozenVaries(p.to_string()));
        }
    }
    let flow = Flow::new(sys, report, constants)?;
    let mut state = initial_state(sys, init, path.start(), constants)?;
    let c0 = flow.constraint_values(path.start(), &state)?;
    for ((label, _), v) in flow.constraints.iter().zip(&c0) {
        if !(v.abs() <= SURFACE_TOLERANCE) {
            return Err(DynamicsError::OffSurface { label: label.clone(), value: *v });
        }
    }

    let total = path.length();
    let mut drift: Vec<f64> = c0.iter().map(|v| v.abs()).collect();
    let n = flow.n_q + flow.n_p;
    let sample = |s: f64, params: &[f64], state: &[f64]| Sample {
        s: if total > 0.0 { s / total } else { 0.0 },
        parameters: params.to_vec(),
        q: state[..flow.n_q].to_vec(),
        p: state[flow.n_q..n].to_vec(),
        z: state[n],
    };
    let mut samples = vec![sample(0.0, path.start(), &state)];
    let mut travelled = 0.0;
    let dim = state.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    for leg in path.waypoints.windows(2) {
        let (a, b) = (&leg[0], &leg[1]);
        let len = distance(a, b);
        if len == 0.0 {
            continue;
        }
        let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / len).collect();
        let steps = ((len / step) - 1e-9).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        let at = |s: f64| -> Vec<f64> { a.iter().zip(&dir).map(|(x, d)| x + d * s).collect() };
        for i in 0..steps {
            let s0 = i as f64 * h;
            let p0 = at(s0);
            let pm = at(s0 + h / 2.0);
            let p1 = if i + 1 == steps { b.clone() } else { at(s0 + h) };
            flow.derivative(&p0, &state, &dir, &mut k1)?;
            for j in 0..dim {
                tmp[j] = state[j] + h / 2.0 * k1[j];
            }
            flow.derivative(&pm, &tmp, &dir, &mut k2)?;
            for j in 0..dim {
                tmp[j] = state[j] + h / 2.0 * k2[j];
            }
            flow.derivative(&pm, &tmp, &dir, &mut k3)?;
            for j in 0..dim {
                tmp[j] = state[j] + h * k3[j];
            }
            flow.derivative(&p1, &tmp, &dir, &mut k4)?;
            for j in 0..dim {
                state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            for (d, v) in drift.iter_mut().zip(flow.constraint_values(&p1, &state)?) {
                *d = d.max(v.abs());
            }
            let s = travelled + if i + 1 == steps { len } else { s0 + h };
            samples.push(sample(s, &p1, &state));
        }
        travelled += len;
    }

    Ok(Trajectory {
        parameter_names: params,
        q_names: sys.dynamical.iter().map(|d| d.coordinate.clone()).collect(),
        p_names: sys
            .dynamical
            .iter()
            .map(|d| d.momentum.clone())
            .chain(sys.parameters.iter().map(|p| p.momentum.clone()))
            .collect(),
        samples,
        drift: flow.constraints.iter().map(|(l, _)| l.clone()).zip(drift).collect(),
        constants: constants.clone(),
    })
}

/// `|z(end) - integral of L dt|` for a trajectory along the evolution
/// parameter, with velocities rebuilt from `dq_a/dt = dH'_0/dp_a` and the
/// integral taken by composite Simpson quadrature over the samples.
pub fn action_residual(traj: &Trajectory, sys: &HJSystem) -> Result<f64, DynamicsError> {
    let n = traj.samples.len();
    if n < 2 {
        return Ok(0.0);
    }
    let first = &traj.samples[0];
    if traj.samples.iter().any(|x| x.parameters[1..] != first.parameters[1..]) {
        return Err(DynamicsError::NotTimePath);
    }
    let m = &sys.model;
    let mut lagrangian = m.lagrangian.clone();
    // Degenerate velocities vanish on a pure time path.
    for p in &sys.parameters[1..] {
        lagrangian = lagrangian.substitute_one(&m.velocity(&p.symbol), &Expr::zero());
    }
    let on_flow: crate::expr::Bindings = sys
        .dynamical
        .iter()
        .map(|d| (d.velocity.clone(), sys.extended[0].differentiate(&d.momentum)))
        .collect();
    let integrand = lagrangian.substitute(&on_flow);
    let slots: Vec<Symbol> = traj
        .parameter_names
        .iter()
        .chain(&traj.q_names)
        .chain(&traj.p_names)
        .chain(traj.constants.keys())
        .cloned()
        .collect();
    let f = CompiledExpr::new(&integrand, &slots)?;
    let consts: Vec<f64> = traj.constants.values().copied().collect();
    let mut ts = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    for x in &traj.samples {
        let pt: Vec<f64> = x.parameters.iter().chain(&x.q).chain(&x.p).chain(&consts).copied().collect();
        ts.push(x.parameters[0]);
        ls.push(f.eval(&pt)?);
    }
    let integral = simpson(&ts, &ls);
    Ok((traj.last().z - first.z - integral).abs())
}

// Composite Simpson over possibly uneven panels; an odd trailing interval is
// closed with the three-point formula on the last two intervals.
fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let panel = |i: usize| -> f64 {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        let h = h0 + h1;
        if h == 0.0 {
            return 0.0;
        }
        h / 6.0
            * ((2.0 - h1 / h0) * f[i] + h * h / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2])
    };
    let intervals = n - 1;
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n && (intervals - i) >= 2 {
        total += panel(i);
        i += 2;
    }
    if i + 1 < n {
        // One interval left: integrate the quadratic through the last three
        // points over the final interval only.
        let (a, b, c) = (n - 3, n - 2, n - 1);
        let (h0, h1) = (t[b] - t[a], t[c] - t[b]);
        let w2 = h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
        let w1 = h1 * (h1 + 3.0 * h0) / (6.0 * h0);
        let w0 = -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        total += w0 * f[a] + w1 * f[b] + w2 * f[c];
    }
    total
}

/// Outcome of comparing two orderings of a two-parameter evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeCheck {
    /// Largest difference between the two end states in momenta and
    /// constraint values.
    pub observable_mismatch: f64,
    /// Sine of the angle between `x_A - x_B` and `dH'_0/dp` at the end point;
    /// 0 when the end points coincide.
    pub alignment: f64,
    /// `|x_A - x_B|`.
    pub displacement: f64,
}

/// Evolve by `dtau` in the time and `de` in the second parameter in both
/// orders and compare the end points.
pub fn gauge_orbit_check(
    sys: &HJSystem,
    report: &ChainReport,
    init: &PhasePoint,
    dtau: f64,
    de: f64,
    step: f64,
) -> Result<GaugeCheck, DynamicsError> {
    if sys.parameters.len() != 2 || report.is_frozen(&sys.parameters[1].symbol) {
        return Err(DynamicsError::NotGaugeShaped);
    }
    let start = start_parameters(sys, init)?;
    let a = integrate(sys, report, init, &ParameterPath::along(start.clone(), 0, dtau).then(1, de), step)?;
    let b = integrate(sys, report, init, &ParameterPath::along(start, 1, de).then(0, dtau), step)?;
    let (ea, eb) = (a.last(), b.last());

    let n_dyn = sys.dynamical.len();
    let mut mismatch: f64 = ea.p[..n_dyn]
        .iter()
        .zip(&eb.p[..n_dyn])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let slots: Vec<Symbol> = a
        .parameter_names
        .iter()
        .chain(&a.q_names)
        .chain(&a.p_names)
        .chain(a.constants.keys())
        .cloned()
        .collect();
    let consts: Vec<f64> = a.constants.values().copied().collect();
    let point = |x: &Sample| -> Vec<f64> {
        x.parameters.iter().chain(&x.q).chain(&x.p).chain(&consts).copied().collect()
    };
    let (pa, pb) = (point(ea), point(eb));
    for c in &report.constraints {
        let f = CompiledExpr::new(&c.expr, &slots)?;
        mismatch = mismatch.max((f.eval(&pa)? - f.eval(&pb)?).abs());
    }

    let dx: Vec<f64> = ea.q.iter().zip(&eb.q).map(|(x, y)| x - y).collect();
    let norm = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut dir = Vec::new();
    for d in &sys.dynamical {
        let f = CompiledExpr::new(&sys.extended[0].differentiate(&d.momentum), &slots)?;
        dir.push(f.eval(&pa)?);
    }
    let alignment = if norm < 1e-14 {
        0.0
    } else {
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dn == 0.0 {
            1.0
        } else {
            let along: f64 = dx.iter().zip(&dir).map(|(x, u)| x * u / dn).sum();
            let perp: f64 = dx
                .iter()
                .zip(&dir)
                .map(|(x, u)| (x - along * u / dn).powi(2))
                .sum::<f64>()
                .sqrt();
            perp / norm
        }
    };
    Ok(GaugeCheck { observable_mismatch: mismatch, alignment, displacement: norm })
}

/// Hamilton's equations of a reduced Hamiltonian `h(q, p)` over `pairs`,
/// integrated with RK4 for `span` in steps of at most `step`. Returns
/// `(t, q, p)` samples.
pub fn integrate_reduced(
    h: &Expr,
    pairs: &[(Symbol, Symbol)],
    constants: &BTreeMap<Symbol, f64>,
    init: &[(f64, f64)],
    span: f64,
    step: f64,
) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>, DynamicsError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(DynamicsError::BadStep);
    }
    let slots: Vec<Symbol> = pairs
        .iter()
        .map(|(q, _)| q.clone())
        .chain(pairs.iter().map(|(_, p)| p.clone()))
        .chain(constants.keys().cloned())
        .collect();
    let mut rhs = Vec::new();
    for (_, p) in pairs {
        rhs.push(CompiledExpr::new(&h.differentiate(p), &slots)?);
    }
    for (q, _) in pairs {
        rhs.push(CompiledExpr::new(&h.differentiate(q).neg(), &slots)?);
    }
    let consts: Vec<f64> = constants.values().copied().collect();
    let n = pairs.len();
    let eval = |y: &[f64]| -> Result<Vec<f64>, ExprError> {
        let pt: Vec<f64> = y.iter().chain(&consts).copied().collect();
        rhs.iter().map(|f| f.eval(&pt)).collect()
    };
    let mut y: Vec<f64> = init.iter().map(|(q, _)| *q).chain(init.iter().map(|(_, p)| *p)).collect();
    let steps = if span == 0.0 { 0 } else { ((span.abs() / step) - 1e-9).ceil().max(1.0) as usize };
    let h_step = if steps == 0 { 0.0 } else { span / steps as f64 };
    let mut out = vec![(0.0, y[..n].to_vec(), y[n..].to_vec())];
    for i in 0..steps {
        let k1 = eval(&y)?;
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + h_step / 2.0 * k).collect();
        let k2 = eval(&y2)?;
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + h_step / 2.0 * k).collect();
        let k3 = eval(&y3)?;
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h_step * k).collect();
        let k4 = eval(&y4)?;
        for j in 0..y.len() {
            y[j] += h_step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push(((i + 1) as f64 * h_step, y[..n].to_vec(), y[n..].to_vec()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exactness() {
        let t: Vec<f64> = (0..=7).map(|i| i as f64 * 0.25).collect();
        let f: Vec<f64> = t.iter().map(|x| x * x - 2.0 * x).collect();
        let exact = 1.75f64.powi(3) / 3.0 - 1.75f64.powi(2);
        assert!((simpson(&t, &f) - exact).abs() < 1e-12);
        let t: Vec<f64> = (0..=6).map(|i| i as f64 * 0.25).collect();
        let f: Vec<f64> = t.iter().map(|x| x * x * x).collect();
        assert!((simpson(&t, &f) - 1.5f64.powi(4) / 4.0).abs() < 1e-12);
        assert_eq!(simpson(&[0.0], &[1.0]), 0.0);
    }

    #[test]
    fn phase_point_parsing() {
        let p = PhasePoint::parse("q1=0.6, p1=0,q2=0.8").unwrap();
        assert_eq!(p.values["q1"], 0.6);
        assert_eq!(p.values.len(), 3);
        assert!(PhasePoint::parse("q1").is_err());
        assert!(PhasePoint::parse("q1=x").is_err());
    }

    #[test]
    fn path_geometry() {
        let p = ParameterPath::along(vec![0.0, 1.0], 0, 1.0).then(1, 1.0);
        assert_eq!(p.waypoints, vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        assert!((p.length() - 2.0).abs() < 1e-15);
        assert!(ParameterPath::new(vec![]).is_err());
        assert!(ParameterPath::new(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
    }
}
