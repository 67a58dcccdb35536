//! Integrability chain.
//!
//! Every `H'_alpha` and every constraint must have a vanishing total
//! differential `dF = sum_alpha {F, H'_alpha} dt_alpha` on the constraint
//! surface. A surviving `dt_0` coefficient becomes a new constraint; a
//! surviving coefficient of a parameter differential that cannot vanish
//! freezes that parameter (`dt_mu = 0`). Frozen parameters are then solved
//! from a constraint quadratic in them, which gives the reduced Hamiltonian
//! on each branch.

use serde::Serialize;

use crate::expr::{draws, eval_num, is_zero, poisson_bracket, Bindings, Expr, ExprError, Rational, Symbol, ZeroTest};
use crate::legendre::{determinant, inverse, HJSystem};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("constraint bracket {{{left}, {right}}} = {value} is not a phase-space constant")]
    NotCentral { left: String, right: String, value: String },
    #[error("constraint bracket matrix is singular")]
    Singular,
    #[error(transparent)]
    Eval(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// Degenerate momentum definition of a parameter coordinate.
    Primary { parameter: Symbol },
    /// Non-vanishing coefficient of `d<parameter>` in the differential of
    /// `parent`.
    Generated { parent: String, parameter: Symbol },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    FirstClass,
    SecondClass,
    Central,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub label: String,
    pub expr: Expr,
    pub provenance: Provenance,
    pub classification: Option<Classification>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frozen {
    pub parameter: Symbol,
    /// The coefficient of `d<parameter>` that cannot vanish.
    pub coefficient: Expr,
    /// Label of the function whose differential carries the coefficient.
    pub source: String,
    pub verdict: ZeroTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub parameter: Symbol,
    /// `+` or `-`: the sign in front of the square root (or `=` for a linear
    /// solve).
    pub sign: String,
    pub value: Expr,
    /// Label of the constraint that was solved.
    pub constraint: String,
    /// Whether the branch respects the sign assumptions on the parameter.
    pub admissible: bool,
    pub reduced_h0: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Integrable,
    Inconsistent,
    Undecided,
}

/// Reduced coefficients of one total differential in the final round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Differential {
    pub target: String,
    pub coefficients: Vec<(Symbol, Expr)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Zero,
    Central,
    SecondClass,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketEntry {
    pub left: String,
    pub right: String,
    pub bracket: Expr,
    pub class: PairClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub status: Status,
    pub constraints: Vec<Constraint>,
    pub frozen: Vec<Frozen>,
    pub branches: Vec<Branch>,
    pub differentials: Vec<Differential>,
    pub brackets: Vec<BracketEntry>,
    /// Offending expressions and other diagnostics, in discovery order.
    pub issues: Vec<String>,
    pub rounds: usize,
}

impl ChainReport {
    pub fn constraint_exprs(&self) -> Vec<Expr> {
        self.constraints.iter().map(|c| c.expr.clone()).collect()
    }

    pub fn generated(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints
            .iter()
            .filter(|c| matches!(c.provenance, Provenance::Generated { .. }))
    }

    pub fn is_frozen(&self, s: &Symbol) -> bool {
        self.frozen.iter().any(|f| f.parameter == *s)
    }
}

/// Coefficient of each `dt_alpha` in `d(target)`: `{target, H'_alpha}` over
/// the extended phase space.
pub fn total_differential(target: &Expr, sys: &HJSystem) -> Vec<(Symbol, Expr)> {
    let pairs = sys.pairs();
    sys.parameters
        .iter()
        .zip(&sys.extended)
        .map(|(p, h)| (p.symbol.clone(), poisson_bracket(target, h, &pairs)))
        .collect()
}

#[derive(Debug, Clone)]
struct Rule {
    var: Symbol,
    degree: u32,
    value: Expr,
}

impl Rule {
    fn apply(&self, e: &Expr) -> Expr {
        if !e.contains(&self.var) {
            return e.clone();
        }
        use crate::expr::Node;
        match e.node() {
            Node::Sym(_) if self.degree == 1 => self.value.clone(),
            Node::Sym(_) | Node::Num(_) => e.clone(),
            Node::Pow(b, k) if b.as_symbol() == Some(&self.var) => {
                if self.degree == 1 {
                    return Expr::pow(self.value.clone(), k.clone());
                }
                if !k.is_integer() {
                    return e.clone();
                }
                let two = Rational::from_integer(2.into());
                let j = (k / &two).floor();
                let r = k - &j * &two;
                Expr::pow(self.value.clone(), j) * Expr::pow(Expr::symbol(&self.var), r)
            }
            _ => e.map_children(|c| self.apply(c)),
        }
    }
}

/// Rewrites expressions modulo a set of constraints. Each constraint
/// `a*v^d + rest` (`d` in {1, 2}, `a` a nonzero number, `rest` free of `v`)
/// becomes the rule `v^d -> -rest/a`; variables are chosen in a fixed
/// preference order and constraints are reduced by earlier rules first.
#[derive(Debug, Clone, Default)]
pub struct Reducer {
    rules: Vec<Rule>,
}

impl Reducer {
    pub fn new(constraints: &[Expr], order: &[Symbol]) -> Self {
        let mut r = Reducer::default();
        for c in constraints {
            r.add(c, order);
        }
        r
    }

    /// Variable preference: parameter coordinates, dynamical momenta,
    /// dynamical coordinates, parameter momenta, constants.
    pub fn order_for(sys: &HJSystem) -> Vec<Symbol> {
        let mut order: Vec<Symbol> = sys.parameters[1..].iter().map(|p| p.symbol.clone()).collect();
        order.extend(sys.dynamical.iter().map(|d| d.momentum.clone()));
        order.extend(sys.dynamical.iter().map(|d| d.coordinate.clone()));
        order.extend(sys.parameters.iter().map(|p| p.momentum.clone()));
        order.extend(sys.model.constant_symbols());
        order
    }

    pub fn for_system(constraints: &[Expr], sys: &HJSystem) -> Self {
        Reducer::new(constraints, &Reducer::order_for(sys))
    }

    fn add(&mut self, c: &Expr, order: &[Symbol]) -> bool {
        let c = self.reduce(c);
        if c.is_zero_const() {
            return false;
        }
        for v in order {
            if self.rules.iter().any(|r| r.var == *v) || !c.contains(v) {
                continue;
            }
            let Some(coeffs) = c.polynomial_coeffs(v) else { continue };
            let degree = coeffs.len() - 1;
            if !(1..=2).contains(&degree) || (degree == 2 && !coeffs[1].is_zero_const()) {
                continue;
            }
            let Some(a) = coeffs[degree].as_num().cloned() else { continue };
            let rest = coeffs[0].clone();
            let value = Expr::mul([Expr::num(-a.recip()), rest]);
            let rule = Rule { var: v.clone(), degree: degree as u32, value };
            for old in &mut self.rules {
                old.value = rule.apply(&old.value);
            }
            self.rules.push(rule);
            return true;
        }
        false
    }

    pub fn reduce(&self, e: &Expr) -> Expr {
        let mut cur = e.clone();
        for _ in 0..8 {
            let next = self.rules.iter().fold(cur.clone(), |acc, r| r.apply(&acc));
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

fn phase_free(e: &Expr, sys: &HJSystem) -> bool {
    !e.contains_any(&sys.phase_symbols())
}

/// Run the consistency chain to a fixed point.
pub fn run_chain(sys: &HJSystem, seed: u64) -> Result<ChainReport, ExprError> {
    let assumptions = sys.assumptions();
    let order = Reducer::order_for(sys);
    let limit = 2 * sys.model.coordinates.len();

    let mut constraints: Vec<Constraint> = sys
        .parameters
        .iter()
        .zip(&sys.extended)
        .skip(1)
        .enumerate()
        .map(|(i, (p, h))| Constraint {
            label: format!("H'{}", i + 1),
            expr: h.clone(),
            provenance: Provenance::Primary { parameter: p.symbol.clone() },
            classification: None,
        })
        .collect();
    let mut frozen: Vec<Frozen> = Vec::new();
    let mut issues = Vec::new();
    let mut status = Status::Integrable;
    let mut differentials = Vec::new();
    let mut rounds = 0;

    loop {
        rounds += 1;
        let exprs: Vec<Expr> = constraints.iter().map(|c| c.expr.clone()).collect();
        let reducer = Reducer::new(&exprs, &order);
        let targets: Vec<(String, Expr)> = std::iter::once(("H'0".to_string(), sys.extended[0].clone()))
            .chain(constraints.iter().map(|c| (c.label.clone(), c.expr.clone())))
            .collect();

        let mut fresh: Vec<(String, Symbol, Expr)> = Vec::new();
        let mut freeze: Vec<Frozen> = Vec::new();
        differentials.clear();
        for (label, target) in &targets {
            let mut coefficients = Vec::new();
            for (alpha, (param, coeff)) in total_differential(target, sys).into_iter().enumerate() {
                if frozen.iter().any(|f| f.parameter == param) {
                    continue;
                }
                let c = reducer.reduce(&coeff);
                let verdict = is_zero(&c, assumptions, seed)?;
                coefficients.push((param.clone(), c.clone()));
                match verdict {
                    ZeroTest::ProvablyZero => {}
                    ZeroTest::Undecided => {
                        status = Status::Undecided;
                        issues.push(format!("cannot decide whether the d{param} coefficient of d{label} vanishes: {c}"));
                    }
                    ZeroTest::ProvablyNonzero if alpha == 0 => {
                        if phase_free(&c, sys) {
                            status = Status::Inconsistent;
                            issues.push(format!("d{label} has the nonzero constant d{param} coefficient {c}"));
                        } else {
                            fresh.push((label.clone(), param, c.neg()));
                        }
                    }
                    ZeroTest::ProvablyNonzero => {
                        if !freeze.iter().any(|f| f.parameter == param) {
                            freeze.push(Frozen { parameter: param, coefficient: c, source: label.clone(), verdict });
                        }
                    }
                }
            }
            differentials.push(Differential { target: label.clone(), coefficients });
        }
        if status != Status::Integrable {
            break;
        }
        if !fresh.is_empty() {
            let mut check = reducer.clone();
            for (parent, parameter, expr) in fresh {
                if !check.add(&expr, &order) && check.reduce(&expr).is_zero_const() {
                    continue;
                }
                let label = format!("H'{}", constraints.len() + 1);
                constraints.push(Constraint {
                    label,
                    expr,
                    provenance: Provenance::Generated { parent, parameter },
                    classification: None,
                });
            }
            if constraints.len() > limit {
                status = Status::Undecided;
                issues.push(format!("more than {limit} constraints generated; giving up"));
                break;
            }
            continue;
        }
        if !freeze.is_empty() {
            frozen.extend(freeze);
            continue;
        }
        break;
    }

    let mut report = ChainReport {
        status,
        constraints,
        frozen,
        branches: Vec::new(),
        differentials,
        brackets: Vec::new(),
        issues,
        rounds,
    };
    if report.status == Status::Integrable {
        solve_branches(&mut report, sys, seed)?;
    }
    Ok(report)
}

fn solve_branches(report: &mut ChainReport, sys: &HJSystem, seed: u64) -> Result<(), ExprError> {
    let order = Reducer::order_for(sys);
    for f in report.frozen.clone() {
        let theta = &f.parameter;
        let found = report.constraints.iter().find_map(|c| {
            let coeffs = c.expr.polynomial_coeffs(theta)?;
            (2..=3).contains(&coeffs.len()).then(|| (c.label.clone(), coeffs))
        });
        let Some((label, coeffs)) = found else {
            report
                .issues
                .push(format!("no constraint is linear or quadratic in the frozen parameter {theta}"));
            continue;
        };
        let roots: Vec<(String, Expr)> = if coeffs.len() == 2 {
            vec![("=".into(), Expr::mul([coeffs[0].neg(), Expr::pow(coeffs[1].clone(), Rational::from_integer((-1).into()))]))]
        } else {
            let (c, b, a) = (&coeffs[0], &coeffs[1], &coeffs[2]);
            let disc = b.clone() * b.clone() - Expr::int(4) * a.clone() * c.clone();
            let root = Expr::sqrt(disc);
            let inv = Expr::pow(Expr::int(2) * a.clone(), Rational::from_integer((-1).into()));
            let plus = (b.neg() + root.clone()) * inv.clone();
            let minus = (b.neg() - root) * inv;
            let negative_a = a.as_num().is_some_and(|r| *r < Rational::from_integer(0.into()));
            if negative_a {
                vec![("+".into(), minus), ("-".into(), plus)]
            } else {
                vec![("+".into(), plus), ("-".into(), minus)]
            }
        };
        let rest: Vec<Expr> = report
            .constraints
            .iter()
            .filter(|c| !c.expr.contains(theta))
            .map(|c| c.expr.clone())
            .collect();
        let reducer = Reducer::new(&rest, &order);
        for (sign, value) in roots {
            let admissible = branch_admissible(theta, &value, sys, seed)?;
            let reduced_h0 = reducer.reduce(&sys.h0.substitute_one(theta, &value));
            report.branches.push(Branch {
                parameter: theta.clone(),
                sign,
                value,
                constraint: label.clone(),
                admissible,
                reduced_h0,
            });
        }
    }
    Ok(())
}

// A branch is admissible if, wherever it is real, it satisfies every
// assumption on the solved parameter.
fn branch_admissible(theta: &Symbol, value: &Expr, sys: &HJSystem, seed: u64) -> Result<bool, ExprError> {
    let own: Vec<_> = sys.assumptions().iter().filter(|a| a.symbol == *theta).cloned().collect();
    let syms = value.symbols();
    let others: Vec<_> = sys.assumptions().iter().filter(|a| a.symbol != *theta).cloned().collect();
    let mut real = 0;
    for point in draws(&syms, &others, seed).take(400).flatten() {
        let bindings = syms.iter().cloned().zip(point).collect();
        match eval_num(value, &bindings) {
            Ok(v) if v.is_finite() => {
                if !own.iter().all(|a| a.holds(v)) {
                    return Ok(false);
                }
                real += 1;
                if real == 16 {
                    break;
                }
            }
            Ok(_) | Err(ExprError::Domain(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(real > 0)
}

/// Pairwise brackets of all constraints, reduced on the constraint surface,
/// and the resulting per-constraint classification.
pub fn classify(report: &mut ChainReport, sys: &HJSystem, seed: u64) -> Result<(), ExprError> {
    let pairs = sys.pairs();
    let reducer = Reducer::for_system(&report.constraint_exprs(), sys);
    let n = report.constraints.len();
    let mut classes = vec![vec![PairClass::Zero; n]; n];
    report.brackets.clear();
    for i in 0..n {
        for j in i..n {
            let (a, b) = (&report.constraints[i], &report.constraints[j]);
            let br = reducer.reduce(&poisson_bracket(&a.expr, &b.expr, &pairs));
            let class = match is_zero(&br, sys.assumptions(), seed)? {
                ZeroTest::ProvablyZero => PairClass::Zero,
                ZeroTest::Undecided => PairClass::Unresolved,
                ZeroTest::ProvablyNonzero if phase_free(&br, sys) => PairClass::Central,
                ZeroTest::ProvablyNonzero => PairClass::SecondClass,
            };
            classes[i][j] = class;
            classes[j][i] = class;
            report.brackets.push(BracketEntry {
                left: a.label.clone(),
                right: b.label.clone(),
                bracket: br,
                class,
            });
        }
    }
    for (i, c) in report.constraints.iter_mut().enumerate() {
        let row = &classes[i];
        c.classification = Some(if row.contains(&PairClass::Unresolved) {
            Classification::Unresolved
        } else if row.iter().all(|k| *k == PairClass::Zero) {
            Classification::FirstClass
        } else if row.contains(&PairClass::SecondClass) {
            Classification::SecondClass
        } else {
            Classification::Central
        });
    }
    Ok(())
}

/// Dirac bracket `{a, b} - {a, phi_i} C^-1_ij {phi_j, b}` for constraints
/// whose bracket matrix `C_ij = {phi_i, phi_j}` is constant on phase space.
pub fn dirac_bracket(a: &Expr, b: &Expr, constraints: &[Expr], pairs: &[(Symbol, Symbol)]) -> Result<Expr, ChainError> {
    let phase: Vec<Symbol> = pairs.iter().flat_map(|(q, p)| [q.clone(), p.clone()]).collect();
    let mut c = Vec::new();
    for (i, x) in constraints.iter().enumerate() {
        let mut row = Vec::new();
        for (j, y) in constraints.iter().enumerate() {
            let v = poisson_bracket(x, y, pairs);
            if v.contains_any(&phase) {
                return Err(ChainError::NotCentral {
                    left: format!("phi{}", i + 1),
                    right: format!("phi{}", j + 1),
                    value: v.to_string(),
                });
            }
            row.push(v);
        }
        c.push(row);
    }
    let det = determinant(&c);
    if det.is_zero_const() {
        return Err(ChainError::Singular);
    }
    let inv = inverse(&c, &det);
    let left: Vec<Expr> = constraints.iter().map(|x| poisson_bracket(a, x, pairs)).collect();
    let right: Vec<Expr> = constraints.iter().map(|y| poisson_bracket(y, b, pairs)).collect();
    let mut terms = vec![poisson_bracket(a, b, pairs)];
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            terms.push(Expr::mul([Expr::int(-1), l.clone(), inv[i][j].clone(), r.clone()]));
        }
    }
    Ok(Expr::add(terms))
}

/// How a computed reduced Hamiltonian relates to a reference expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceCheck {
    Agrees,
    OppositeSign,
    Differs,
}

pub fn compare_reference(computed: &Expr, reference: &Expr) -> ReferenceCheck {
    if computed == reference {
        ReferenceCheck::Agrees
    } else if *computed == reference.neg() {
        ReferenceCheck::OppositeSign
    } else {
        ReferenceCheck::Differs
    }
}

/// Bindings that substitute a branch into an expression.
pub fn branch_bindings(branch: &Branch) -> Bindings {
    let mut b = Bindings::new();
    b.insert(branch.parameter.clone(), branch.value.clone());
    b
}

/// Every constraint with the branch substituted, reduced modulo the
/// constraints that do not involve the solved parameter. All zero for a
/// consistent branch.
pub fn branch_residuals(report: &ChainReport, branch: &Branch, sys: &HJSystem) -> Vec<Expr> {
    let rest: Vec<Expr> = report
        .constraints
        .iter()
        .filter(|c| !c.expr.contains(&branch.parameter))
        .map(|c| c.expr.clone())
        .collect();
    let reducer = Reducer::for_system(&rest, sys);
    let b = branch_bindings(branch);
    report.constraints.iter().map(|c| reducer.reduce(&c.expr.substitute(&b))).collect()
}
