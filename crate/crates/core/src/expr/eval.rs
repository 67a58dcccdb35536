use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::rational::to_f64;
use super::{Expr, ExprError, Node, Rational, Symbol};

/// Default seed of the sampling zero test.
pub const DEFAULT_SEED: u64 = 42;

/// Magnitude below which a sampled value does not count as nonzero.
pub const ZERO_TOLERANCE: f64 = 1e-8;

const SAMPLE_POINTS: usize = 8;
const MAX_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroTest {
    ProvablyZero,
    ProvablyNonzero,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "!=")]
    Ne,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Gt => ">",
            Relation::Lt => "<",
            Relation::Ne => "!=",
        }
    }
}

/// A sign or exclusion predicate on one symbol, e.g. `q2 > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption {
    pub symbol: Symbol,
    pub relation: Relation,
    pub value: f64,
}

impl Assumption {
    pub fn new(symbol: &str, relation: Relation, value: f64) -> Self {
        Assumption { symbol: Symbol::new(symbol), relation, value }
    }

    pub fn holds(&self, x: f64) -> bool {
        match self.relation {
            Relation::Gt => x > self.value,
            Relation::Lt => x < self.value,
            Relation::Ne => x != self.value,
        }
    }
}

impl serde::Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.symbol, self.relation.as_str(), self.value)
    }
}

fn pow_f64(b: f64, e: &Rational, tol: f64) -> Result<f64, ExprError> {
    if e.is_integer() {
        let n = e.to_integer().to_i32().unwrap_or(i32::MAX);
        if b == 0.0 && n < 0 {
            return Err(ExprError::Domain("division by zero".into()));
        }
        return Ok(b.powi(n));
    }
    let even_root = e.denom() % 2u32 == 0u32.into();
    let mut b = b;
    if b < 0.0 && even_root {
        if b >= -tol {
            b = 0.0;
        } else {
            return Err(ExprError::Domain(format!("negative radicand {b} under an even root")));
        }
    }
    if b == 0.0 && e.is_negative() {
        return Err(ExprError::Domain("division by zero".into()));
    }
    if *e.denom() == 2u32.into() {
        let n = e.numer().to_i32().unwrap_or(i32::MAX);
        return Ok(b.sqrt().powi(n));
    }
    let ef = to_f64(e);
    if b < 0.0 {
        let mag = (-b).powf(ef);
        return Ok(if e.numer() % 2u32 == 0u32.into() { mag } else { -mag });
    }
    Ok(b.powf(ef))
}

fn eval_rec(e: &Expr, lookup: &dyn Fn(&Symbol) -> Option<f64>, tol: f64) -> Result<f64, ExprError> {
    match e.node() {
        Node::Num(r) => Ok(to_f64(r)),
        Node::Sym(s) => lookup(s).ok_or_else(|| ExprError::Unbound(s.name().to_string())),
        Node::Add(xs) => xs.iter().try_fold(0.0, |acc, x| Ok(acc + eval_rec(x, lookup, tol)?)),
        Node::Mul(xs) => xs.iter().try_fold(1.0, |acc, x| Ok(acc * eval_rec(x, lookup, tol)?)),
        Node::Pow(b, ex) => pow_f64(eval_rec(b, lookup, tol)?, ex, tol),
    }
}

/// IEEE double evaluation of `e` at `point`.
pub fn eval_num(e: &Expr, point: &BTreeMap<Symbol, f64>) -> Result<f64, ExprError> {
    eval_rec(e, &|s| point.get(s).copied(), 0.0)
}

/// Like [`eval_num`], but radicands in `[-tol, 0)` under even roots are read
/// as zero.
pub fn eval_num_clamped(e: &Expr, point: &BTreeMap<Symbol, f64>, tol: f64) -> Result<f64, ExprError> {
    eval_rec(e, &|s| point.get(s).copied(), tol)
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Add(Vec<Op>),
    Mul(Vec<Op>),
    Pow(Box<Op>, Rational),
}

/// An expression compiled against a fixed slot layout for repeated numeric
/// evaluation.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    op: Op,
}

impl CompiledExpr {
    pub fn new(e: &Expr, slots: &[Symbol]) -> Result<Self, ExprError> {
        fn build(e: &Expr, slots: &[Symbol]) -> Result<Op, ExprError> {
            Ok(match e.node() {
                Node::Num(r) => Op::Const(to_f64(r)),
                Node::Sym(s) => Op::Var(
                    slots
                        .iter()
                        .position(|t| t == s)
                        .ok_or_else(|| ExprError::Unbound(s.name().to_string()))?,
                ),
                Node::Add(xs) => Op::Add(xs.iter().map(|x| build(x, slots)).collect::<Result<_, _>>()?),
                Node::Mul(xs) => Op::Mul(xs.iter().map(|x| build(x, slots)).collect::<Result<_, _>>()?),
                Node::Pow(b, ex) => Op::Pow(Box::new(build(b, slots)?), ex.clone()),
            })
        }
        Ok(CompiledExpr { op: build(e, slots)? })
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        fn run(op: &Op, v: &[f64]) -> Result<f64, ExprError> {
            match op {
                Op::Const(c) => Ok(*c),
                Op::Var(i) => Ok(v[*i]),
                Op::Add(xs) => xs.iter().try_fold(0.0, |a, x| Ok(a + run(x, v)?)),
                Op::Mul(xs) => xs.iter().try_fold(1.0, |a, x| Ok(a * run(x, v)?)),
                Op::Pow(b, e) => pow_f64(run(b, v)?, e, 0.0),
            }
        }
        run(&self.op, values)
    }
}

fn sample_interval(s: &Symbol, assumptions: &[Assumption]) -> (f64, f64) {
    let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
    for a in assumptions.iter().filter(|a| a.symbol == *s) {
        match a.relation {
            Relation::Gt => {
                lo = lo.max(a.value);
                if lo >= hi {
                    hi = lo + 4.0;
                }
            }
            Relation::Lt => {
                hi = hi.min(a.value);
                if hi <= lo {
                    lo = hi - 4.0;
                }
            }
            Relation::Ne => {}
        }
    }
    (lo, hi)
}

/// Seeded pseudo-random draws over `syms`, each inside the sampling box
/// narrowed by the assumptions. A draw that violates an assumption is
/// yielded as `None` so callers can bound the total number of draws.
pub fn draws<'a>(
    syms: &'a [Symbol],
    assumptions: &'a [Assumption],
    seed: u64,
) -> impl Iterator<Item = Option<Vec<f64>>> + 'a {
    let intervals: Vec<(f64, f64)> = syms.iter().map(|s| sample_interval(s, assumptions)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || {
        let point: Vec<f64> = intervals.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        let admissible = assumptions.iter().all(|a| match syms.iter().position(|s| *s == a.symbol) {
            Some(i) => a.holds(point[i]),
            None => true,
        });
        admissible.then_some(point)
    })
}

/// Evaluate `e` at up to eight admissible pseudo-random points; returns the
/// sampled magnitudes.
fn sample(e: &Expr, assumptions: &[Assumption], seed: u64) -> Result<Vec<f64>, ExprError> {
    let syms = e.symbols();
    let compiled = CompiledExpr::new(e, &syms)?;
    let mut values = Vec::with_capacity(SAMPLE_POINTS);
    for point in draws(&syms, assumptions, seed).take(MAX_DRAWS).flatten() {
        if values.len() == SAMPLE_POINTS {
            break;
        }
        match compiled.eval(&point) {
            Ok(v) if v.is_finite() => values.push(v.abs()),
            Ok(_) | Err(ExprError::Domain(_)) => continue,
            Err(other) => return Err(other),
        }
    }
    if values.is_empty() {
        return Err(ExprError::NoAdmissibleSample { expr: e.to_string(), draws: MAX_DRAWS });
    }
    Ok(values)
}

/// Tri-state zero test: normal form first, seeded numeric sampling second.
pub fn is_zero(e: &Expr, assumptions: &[Assumption], seed: u64) -> Result<ZeroTest, ExprError> {
    if e.is_zero_const() {
        return Ok(ZeroTest::ProvablyZero);
    }
    if e.as_num().is_some() {
        return Ok(ZeroTest::ProvablyNonzero);
    }
    let values = sample(e, assumptions, seed)?;
    if values.len() >= SAMPLE_POINTS && values.iter().all(|v| *v > ZERO_TOLERANCE) {
        Ok(ZeroTest::ProvablyNonzero)
    } else {
        Ok(ZeroTest::Undecided)
    }
}

/// True if `e` normalizes to zero or every admissible sample is below
/// [`ZERO_TOLERANCE`]. Used for internal consistency checks where the normal
/// form cannot cancel rational functions of sums.
pub fn numerically_zero(e: &Expr, assumptions: &[Assumption], seed: u64) -> Result<bool, ExprError> {
    if e.is_zero_const() {
        return Ok(true);
    }
    if e.as_num().is_some() {
        return Ok(false);
    }
    Ok(sample(e, assumptions, seed)?.iter().all(|v| *v <= ZERO_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::super::parse_free;
    use super::*;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn scalar_arithmetic() {
        let v = eval_num(&p("2/3*(9 - 1)^(3/2)"), &BTreeMap::new()).unwrap();
        assert!((v - 2.0 / 3.0 * 8f64.powf(1.5)).abs() < 1e-12);
        assert!((v - 15.084_944_7).abs() < 1e-7);
        let mut pt = BTreeMap::new();
        pt.insert(Symbol::new("q1"), 0.0);
        assert_eq!(eval_num(&p("q1"), &pt).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let mut pt = BTreeMap::new();
        pt.insert(Symbol::new("q"), -1.0);
        assert!(matches!(eval_num(&p("sqrt(q)"), &pt), Err(ExprError::Domain(_))));
        assert!(matches!(eval_num(&p("q + r"), &pt), Err(ExprError::Unbound(_))));
        pt.insert(Symbol::new("q"), -1e-9);
        assert_eq!(eval_num_clamped(&p("sqrt(q)"), &pt, 1e-6).unwrap(), 0.0);
        pt.insert(Symbol::new("q"), -8.0);
        assert!((eval_num(&p("q^(1/3)"), &pt).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_test_tri_state() {
        let none: [Assumption; 0] = [];
        assert_eq!(is_zero(&p("(p^2 + m^2) - p^2 - m^2"), &none, 42).unwrap(), ZeroTest::ProvablyZero);
        let m_pos = [Assumption::new("m", Relation::Gt, 0.0)];
        assert_eq!(is_zero(&p("1/2*(p^2 + m^2)"), &m_pos, 42).unwrap(), ZeroTest::ProvablyNonzero);
        // numerically zero but not cancelled by the normal form
        let e = p("1/(x - 1) + 1/(x + 1) - 2*x/(x^2 - 1)");
        assert_eq!(is_zero(&e, &none, 42).unwrap(), ZeroTest::Undecided);
        assert!(numerically_zero(&e, &none, 42).unwrap());
    }

    #[test]
    fn zero_test_respects_assumptions_and_domain() {
        let a = [Assumption::new("q2", Relation::Gt, 0.0)];
        assert_eq!(is_zero(&p("2*q2"), &a, 42).unwrap(), ZeroTest::ProvablyNonzero);
        // only a sliver of the box is admissible, but some samples land there
        let e = p("sqrt(1 - x^2 - y^2) + 1");
        assert_eq!(is_zero(&e, &[], 42).unwrap(), ZeroTest::ProvablyNonzero);
        let never = p("sqrt(-1 - x^2)");
        assert!(matches!(is_zero(&never, &[], 42), Err(ExprError::NoAdmissibleSample { .. })));
    }

    #[test]
    fn deterministic_given_seed() {
        let e = p("x*y - 1/1000000000");
        let a = is_zero(&e, &[], 7).unwrap();
        for _ in 0..3 {
            assert_eq!(is_zero(&e, &[], 7).unwrap(), a);
        }
    }
}
