//! Singular Legendre transform.
//!
//! The velocity Hessian `W_ij = d2L/dv_i dv_j` splits the coordinates into a
//! dynamical block `q_a`, whose momenta can be solved for the velocities, and
//! degenerate coordinates `q_mu` that become evolution parameters next to the
//! time `t`. Each parameter `t_alpha` gets a Hamiltonian
//! `H'_alpha = p_alpha + H_alpha`.

use serde::Serialize;

use crate::expr::{is_zero, Assumption, Expr, ExprError, Symbol, ZeroTest};
use crate::model::{momentum_name, Model};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LegendreError {
    #[error("cannot decide whether the velocity Hessian minor over [{}] is invertible: det = {determinant}", coordinates.join(", "))]
    UndecidedMinor { coordinates: Vec<String>, determinant: String },
    #[error("momentum of `{coordinate}` is not linear in the velocities: {momentum}")]
    NonlinearMomentum { coordinate: String, momentum: String },
    #[error("primary constraint of `{coordinate}` still depends on velocities: {expr}")]
    VelocityDependentConstraint { coordinate: String, expr: String },
    #[error("canonical Hamiltonian retains velocity `{velocity}`: {expr}")]
    VelocityInHamiltonian { velocity: String, expr: String },
    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// Result of the Hessian rank analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub rank: usize,
    pub dynamical: Vec<Symbol>,
    pub degenerate: Vec<Symbol>,
    /// Determinant of the chosen invertible minor.
    pub determinant: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalPair {
    pub coordinate: Symbol,
    pub momentum: Symbol,
    pub velocity: Symbol,
    /// Solved velocity `w_a(q, p)`.
    pub solved: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub symbol: Symbol,
    pub momentum: Symbol,
}

/// The Hamilton–Jacobi form of a model.
#[derive(Debug, Clone)]
pub struct HJSystem {
    pub model: Model,
    pub rank: usize,
    pub dynamical: Vec<DynamicalPair>,
    /// The evolution parameter first, then the degenerate coordinates.
    pub parameters: Vec<Parameter>,
    /// Canonical Hamiltonian `H_0`.
    pub h0: Expr,
    /// `H_alpha` for each parameter (`H_0` first).
    pub hamiltonians: Vec<Expr>,
    /// `H'_alpha = p_alpha + H_alpha` for each parameter.
    pub extended: Vec<Expr>,
}

impl HJSystem {
    pub fn assumptions(&self) -> &[Assumption] {
        &self.model.assumptions
    }

    /// Canonical pairs of the extended phase space: dynamical pairs, then
    /// `(t_alpha, p_alpha)`.
    pub fn pairs(&self) -> Vec<(Symbol, Symbol)> {
        self.dynamical
            .iter()
            .map(|d| (d.coordinate.clone(), d.momentum.clone()))
            .chain(self.parameters.iter().map(|p| (p.symbol.clone(), p.momentum.clone())))
            .collect()
    }

    pub fn dynamical_pairs(&self) -> Vec<(Symbol, Symbol)> {
        self.dynamical
            .iter()
            .map(|d| (d.coordinate.clone(), d.momentum.clone()))
            .collect()
    }

    pub fn parameter_symbols(&self) -> Vec<Symbol> {
        self.parameters.iter().map(|p| p.symbol.clone()).collect()
    }

    /// Every coordinate and momentum of the extended phase space.
    pub fn phase_symbols(&self) -> Vec<Symbol> {
        self.pairs().into_iter().flat_map(|(q, p)| [q, p]).collect()
    }

    /// Primary constraints `H'_mu` (the extended Hamiltonians after `H'_0`).
    pub fn primaries(&self) -> &[Expr] {
        &self.extended[1..]
    }
}

/// Symbolic determinant by cofactor expansion along the first row.
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        n => Expr::add((0..n).filter(|&j| !m[0][j].is_zero_const()).map(|j| {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            Expr::mul([Expr::int(sign), m[0][j].clone(), determinant(&minor(m, 0, j))])
        })),
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|&(i, _)| i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|&(j, _)| j != col)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

/// Inverse through the adjugate; `det` must be nonzero.
pub fn inverse(m: &[Vec<Expr>], det: &Expr) -> Vec<Vec<Expr>> {
    let n = m.len();
    let inv_det = Expr::pow(det.clone(), crate::expr::Rational::from_integer((-1).into()));
    if n == 1 {
        return vec![vec![inv_det]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                    Expr::mul([Expr::int(sign), determinant(&minor(m, j, i)), inv_det.clone()])
                })
                .collect()
        })
        .collect()
}

fn hessian(m: &Model) -> Vec<Vec<Expr>> {
    let vs = m.velocities();
    let first: Vec<Expr> = vs.iter().map(|v| m.lagrangian.differentiate(v)).collect();
    first
        .iter()
        .map(|d| vs.iter().map(|v| d.differentiate(v)).collect())
        .collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Choose the largest set of coordinates with an invertible velocity Hessian
/// block, preferring earlier-declared coordinates.
pub fn hessian_partition(m: &Model, seed: u64) -> Result<Partition, LegendreError> {
    let w = hessian(m);
    let n = w.len();
    for k in (0..=n).rev() {
        for subset in combinations(n, k) {
            let block: Vec<Vec<Expr>> = subset
                .iter()
                .map(|&i| subset.iter().map(|&j| w[i][j].clone()).collect())
                .collect();
            let det = determinant(&block);
            match is_zero(&det, &m.assumptions, seed)? {
                ZeroTest::ProvablyZero => continue,
                ZeroTest::ProvablyNonzero => {
                    let dynamical: Vec<Symbol> = subset.iter().map(|&i| m.coordinates[i].clone()).collect();
                    let degenerate = m
                        .coordinates
                        .iter()
                        .filter(|q| !dynamical.contains(q))
                        .cloned()
                        .collect();
                    return Ok(Partition { rank: k, dynamical, degenerate, determinant: det });
                }
                ZeroTest::Undecided => {
                    return Err(LegendreError::UndecidedMinor {
                        coordinates: subset.iter().map(|&i| m.coordinates[i].to_string()).collect(),
                        determinant: det.to_string(),
                    })
                }
            }
        }
    }
    unreachable!("the empty minor has determinant 1")
}

/// Partition, invert the dynamical momenta, and build `H_0` and `H'_alpha`.
pub fn build_hj_system(m: &Model, seed: u64) -> Result<HJSystem, LegendreError> {
    let part = hessian_partition(m, seed)?;
    let vel = |q: &Symbol| m.velocity(q);
    let all_v: Vec<Symbol> = m.velocities();
    let dyn_v: Vec<Symbol> = part.dynamical.iter().map(vel).collect();
    let deg_v: Vec<Symbol> = part.degenerate.iter().map(vel).collect();
    let dyn_p: Vec<Symbol> = part.dynamical.iter().map(|q| m.momentum(q)).collect();

    let zero_v: crate::expr::Bindings = all_v.iter().map(|v| (v.clone(), Expr::zero())).collect();

    // p_a = sum_b W_ab v_b + sum_mu W_amu v_mu + c_a, with W velocity-free.
    let mut w_aa: Vec<Vec<Expr>> = Vec::new();
    let mut rhs: Vec<Expr> = Vec::new();
    for q in &part.dynamical {
        let pa = m.lagrangian.differentiate(&vel(q));
        let row: Vec<Expr> = all_v.iter().map(|u| pa.differentiate(u)).collect();
        if row.iter().any(|x| x.contains_any(&all_v)) {
            return Err(LegendreError::NonlinearMomentum {
                coordinate: q.to_string(),
                momentum: pa.to_string(),
            });
        }
        let c = pa.substitute(&zero_v);
        let mut r = Expr::symbol(&m.momentum(q)) - c;
        for (u, x) in all_v.iter().zip(&row) {
            if deg_v.contains(u) {
                r = r - x.clone() * Expr::symbol(u);
            }
        }
        w_aa.push(
            all_v
                .iter()
                .zip(&row)
                .filter(|(u, _)| dyn_v.contains(u))
                .map(|(_, x)| x.clone())
                .collect(),
        );
        rhs.push(r);
    }
    let inv = inverse(&w_aa, &part.determinant);
    let solved: Vec<Expr> = inv
        .iter()
        .map(|row| Expr::add(row.iter().zip(&rhs).map(|(a, b)| a.clone() * b.clone())))
        .collect();
    let on_w: crate::expr::Bindings = dyn_v.iter().cloned().zip(solved.iter().cloned()).collect();

    // Primary constraints from the degenerate momenta.
    let mut phis = Vec::new();
    for (q, v) in part.degenerate.iter().zip(&deg_v) {
        let phi = m.lagrangian.differentiate(v).substitute(&on_w);
        if phi.contains_any(&all_v) {
            return Err(LegendreError::VelocityDependentConstraint {
                coordinate: q.to_string(),
                expr: phi.to_string(),
            });
        }
        phis.push(phi);
    }

    let mut h0 = Expr::add(
        dyn_p
            .iter()
            .zip(&solved)
            .map(|(p, w)| Expr::symbol(p) * w.clone())
            .chain(phis.iter().zip(&deg_v).map(|(phi, v)| phi.clone() * Expr::symbol(v))),
    ) - m.lagrangian.substitute(&on_w);
    for v in &all_v {
        if !h0.contains(v) {
            continue;
        }
        match is_zero(&h0.differentiate(v), &m.assumptions, seed)? {
            ZeroTest::ProvablyZero => h0 = h0.substitute_one(v, &Expr::zero()),
            _ => {
                return Err(LegendreError::VelocityInHamiltonian {
                    velocity: v.to_string(),
                    expr: h0.to_string(),
                })
            }
        }
    }

    let dynamical = part
        .dynamical
        .iter()
        .zip(dyn_p)
        .zip(dyn_v)
        .zip(solved)
        .map(|(((q, p), v), w)| DynamicalPair { coordinate: q.clone(), momentum: p, velocity: v, solved: w })
        .collect();
    let parameters: Vec<Parameter> = std::iter::once(&m.time)
        .chain(part.degenerate.iter())
        .map(|s| Parameter { symbol: s.clone(), momentum: Symbol::new(&momentum_name(s.name())) })
        .collect();
    let hamiltonians: Vec<Expr> = std::iter::once(h0.clone())
        .chain(phis.iter().map(|phi| phi.neg()))
        .collect();
    let extended = parameters
        .iter()
        .zip(&hamiltonians)
        .map(|(p, h)| Expr::symbol(&p.momentum) + h.clone())
        .collect();
    Ok(HJSystem {
        model: m.clone(),
        rank: part.rank,
        dynamical,
        parameters,
        h0,
        hamiltonians,
        extended,
    })
}

/// One phase variable's differential: the coefficient of each `dt_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRow {
    pub variable: Symbol,
    pub coefficients: Vec<Expr>,
}

/// Coefficients of the total differential equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTable {
    pub parameters: Vec<Symbol>,
    /// Rows for `q_a`, then `p_a`, then the parameter momenta `p_alpha`.
    pub rows: Vec<FlowRow>,
    /// Coefficients of `dz`.
    pub action: Vec<Expr>,
}

impl FlowTable {
    pub fn row(&self, variable: &str) -> Option<&FlowRow> {
        self.rows.iter().find(|r| r.variable.name() == variable)
    }

    pub fn coefficient(&self, variable: &str, parameter: &str) -> Option<&Expr> {
        let j = self.parameters.iter().position(|p| p.name() == parameter)?;
        self.row(variable).map(|r| &r.coefficients[j])
    }
}

/// `dq_a = dH'/dp_a dt`, `dp_a = -dH'/dq_a dt`, `dp_beta = -dH'/dt_beta dt`,
/// `dz = (-H + p_a dH'/dp_a) dt`, summed over parameters.
pub fn equations_of_motion(sys: &HJSystem) -> FlowTable {
    let hs = &sys.extended;
    let mut rows = Vec::new();
    for d in &sys.dynamical {
        rows.push(FlowRow {
            variable: d.coordinate.clone(),
            coefficients: hs.iter().map(|h| h.differentiate(&d.momentum)).collect(),
        });
    }
    for d in &sys.dynamical {
        rows.push(FlowRow {
            variable: d.momentum.clone(),
            coefficients: hs.iter().map(|h| h.differentiate(&d.coordinate).neg()).collect(),
        });
    }
    for p in &sys.parameters {
        rows.push(FlowRow {
            variable: p.momentum.clone(),
            coefficients: hs.iter().map(|h| h.differentiate(&p.symbol).neg()).collect(),
        });
    }
    let action = hs
        .iter()
        .zip(&sys.hamiltonians)
        .map(|(hp, h)| {
            Expr::add(
                sys.dynamical
                    .iter()
                    .map(|d| Expr::symbol(&d.momentum) * hp.differentiate(&d.momentum)),
            ) - h.clone()
        })
        .collect();
    FlowTable { parameters: sys.parameter_symbols(), rows, action }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_free, DEFAULT_SEED};
    use crate::model::{builtin_model, parse_model};

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    fn system(name: &str) -> HJSystem {
        build_hj_system(&builtin_model(name).unwrap(), DEFAULT_SEED).unwrap()
    }

    #[test]
    fn determinants() {
        let m = vec![vec![p("a"), p("b")], vec![p("c"), p("d")]];
        assert_eq!(determinant(&m), p("a*d - b*c"));
        let inv = inverse(&m, &determinant(&m));
        let id = |i: usize, j: usize| Expr::add((0..2).map(|k| m[i][k].clone() * inv[k][j].clone()));
        assert!(crate::expr::numerically_zero(&(id(0, 0) - Expr::one()), &[], 1).unwrap());
        assert!(crate::expr::numerically_zero(&id(0, 1), &[], 1).unwrap());
    }

    #[test]
    fn partitions() {
        let rp = hessian_partition(&builtin_model("relativistic_particle").unwrap(), DEFAULT_SEED).unwrap();
        assert_eq!(rp.rank, 4);
        assert_eq!(rp.degenerate, vec![Symbol::new("e")]);
        let disc = hessian_partition(&builtin_model("disc").unwrap(), DEFAULT_SEED).unwrap();
        assert_eq!(disc.rank, 1);
        assert_eq!(disc.dynamical, vec![Symbol::new("q1")]);
        assert_eq!(disc.degenerate, vec![Symbol::new("q2")]);
        let regular = parse_model("coordinate q1\nlagrangian q1_d^2/2", "r").unwrap();
        let part = hessian_partition(&regular, DEFAULT_SEED).unwrap();
        assert_eq!((part.rank, part.degenerate.len()), (1, 0));
    }

    #[test]
    fn earliest_coordinates_are_dynamical() {
        // Only the combination q1_d + q2_d is dynamical; q1 is preferred.
        let m = parse_model("coordinate q1 q2\nlagrangian (q1_d + q2_d)^2/2", "m").unwrap();
        let part = hessian_partition(&m, DEFAULT_SEED).unwrap();
        assert_eq!(part.dynamical, vec![Symbol::new("q1")]);
        let sys = build_hj_system(&m, DEFAULT_SEED).unwrap();
        assert_eq!(sys.extended[1], p("p2 - p1"));
        assert_eq!(sys.h0, p("p1^2/2"));
    }

    #[test]
    fn disc_system() {
        let sys = system("disc");
        assert_eq!(sys.dynamical[0].solved, p("2*q2*p1"));
        assert_eq!(sys.h0, p("q2*p1^2 + q2*(q1^2 + q2^2/3 - R^2)"));
        assert_eq!(sys.extended[0], p("p_t + q2*p1^2 + q2*(q1^2 + q2^2/3 - R^2)"));
        assert_eq!(sys.extended[1], p("p2"));
    }

    #[test]
    fn relativistic_system() {
        let sys = system("relativistic_particle");
        assert_eq!(sys.h0, p("e/2*(-p0^2 + p1^2 + p2^2 + p3^2 + m^2)"));
        assert_eq!(sys.extended[1], p("p_e"));
        assert_eq!(sys.parameters[0].momentum, Symbol::new("p_tau"));
        assert_eq!(sys.dynamical[0].solved, p("-e*p0"));
    }

    #[test]
    fn legendre_identity() {
        for name in ["relativistic_particle", "disc", "punctured_plane"] {
            let sys = system(name);
            let on_w: crate::expr::Bindings =
                sys.dynamical.iter().map(|d| (d.velocity.clone(), d.solved.clone())).collect();
            for d in &sys.dynamical {
                let back = sys.model.lagrangian.differentiate(&d.velocity).substitute(&on_w);
                assert_eq!(back, Expr::symbol(&d.momentum), "{name}");
            }
            // p_a w_a - H0 = L on the flow.
            let pw = Expr::add(sys.dynamical.iter().map(|d| Expr::symbol(&d.momentum) * d.solved.clone()));
            assert_eq!(pw - sys.h0.clone() - sys.model.lagrangian.substitute(&on_w), Expr::zero(), "{name}");
        }
    }

    #[test]
    fn disc_flow_coefficients() {
        let f = equations_of_motion(&system("disc"));
        assert_eq!(f.coefficient("q1", "t").unwrap(), &p("2*p1*q2"));
        assert_eq!(f.coefficient("p1", "t").unwrap(), &p("-2*q1*q2"));
        assert_eq!(f.coefficient("p2", "t").unwrap(), &p("-(p1^2 + q1^2 + q2^2 - R^2)"));
        assert_eq!(f.coefficient("q1", "q2").unwrap(), &Expr::zero());
    }

    #[test]
    fn relativistic_flow_coefficients() {
        let f = equations_of_motion(&system("relativistic_particle"));
        assert_eq!(f.coefficient("x0", "tau").unwrap(), &p("-e*p0"));
        assert_eq!(f.coefficient("x1", "tau").unwrap(), &p("e*p1"));
        assert_eq!(f.coefficient("p1", "tau").unwrap(), &Expr::zero());
        assert_eq!(f.coefficient("p_e", "tau").unwrap(), &p("-(-p0^2 + p1^2 + p2^2 + p3^2 + m^2)/2"));
        assert_eq!(f.action[0], p("e/2*(-p0^2 + p1^2 + p2^2 + p3^2 - m^2)"));
        assert_eq!(f.action[1], Expr::zero());
    }

    #[test]
    fn action_at_zero_momentum() {
        for name in ["relativistic_particle", "disc", "punctured_plane"] {
            let sys = system(name);
            let f = equations_of_motion(&sys);
            let zero: crate::expr::Bindings = sys
                .pairs()
                .into_iter()
                .map(|(_, p)| (p, Expr::zero()))
                .collect();
            for (a, h) in f.action.iter().zip(&sys.hamiltonians) {
                assert_eq!(a.substitute(&zero), h.substitute(&zero).neg());
            }
        }
    }
}
