//! Symbolic expression kernel.
//!
//! Every [`Expr`] is kept in a canonical normal form by its constructors: sums
//! and products are flat, numeric constants are folded, like terms are
//! collected, products are fully distributed over sums, and the children of
//! every sum and product are stored in a fixed total order. Two expressions
//! are equal as values iff their normal forms are structurally identical.
//!
//! Powers carry exact rational exponents. A power of a composite base (sum or
//! product) with a non-integer exponent `e > 1` is split into its integer part,
//! which is expanded, times the fractional part `0 < f < 1`, which stays an
//! atom. Positive rational content is pulled out of the base of a fractional
//! power, so `sqrt(4*a - 4*b)` and `2*sqrt(a - b)` share a normal form.

mod calculus;
mod eval;
mod parse;
mod print;
mod rational;
mod symbols;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub use calculus::{poisson_bracket, Bindings};
pub use eval::{
    draws, eval_num, eval_num_clamped, is_zero, numerically_zero, Assumption, CompiledExpr, Relation,
    ZeroTest, DEFAULT_SEED, ZERO_TOLERANCE,
};
pub use parse::{parse, parse_free, ParseError};
pub use rational::{to_f64 as rational_to_f64, Rational};
pub use symbols::{velocity_name, DuplicateSymbol, SymbolKind, SymbolTable, VELOCITY_SUFFIX};

use rational::{int, num_pow};

/// Errors raised by numeric evaluation and zero testing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no admissible sample point found in {draws} draws for `{expr}`")]
    NoAdmissibleSample { expr: String, draws: usize },
}

/// An interned symbol name.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    // Lower-case names sort before upper-case ones so that constants written
    // in capitals (R, M, ...) trail the phase-space variables.
    fn sort_key(&self) -> (bool, &str) {
        let upper = self.0.chars().next().is_some_and(|c| c.is_ascii_uppercase());
        (upper, &self.0)
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// Node of an expression tree. Only reachable through [`Expr::node`]; all
/// construction goes through the normalizing constructors on [`Expr`].
#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Num(Rational),
    Sym(Symbol),
    /// At least two terms, at most one numeric term (stored last).
    Add(Vec<Expr>),
    /// At least two factors; an optional leading numeric coefficient.
    Mul(Vec<Expr>),
    Pow(Expr, Rational),
}

/// Immutable, structurally shared symbolic expression in normal form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(r: Rational) -> Self {
        Expr::from_node(Node::Num(r))
    }

    pub fn int(i: i64) -> Self {
        Expr::num(int(i))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Expr::num(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn sym(name: &str) -> Self {
        Expr::from_node(Node::Sym(Symbol::new(name)))
    }

    pub fn symbol(s: &Symbol) -> Self {
        Expr::from_node(Node::Sym(s.clone()))
    }

    pub fn sqrt(e: Expr) -> Self {
        Expr::pow(e, Rational::new(BigInt::from(1), BigInt::from(2)))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    /// Top-level terms (a non-sum is a single term).
    pub fn terms(&self) -> Vec<Expr> {
        match self.node() {
            Node::Add(ts) => ts.clone(),
            _ if self.is_zero_const() => vec![],
            _ => vec![self.clone()],
        }
    }

    /// Split a term into its rational coefficient and its monomial part.
    pub fn split_coeff(&self) -> (Rational, Expr) {
        match self.node() {
            Node::Num(r) => (r.clone(), Expr::one()),
            Node::Mul(fs) => match fs[0].node() {
                Node::Num(c) => {
                    let rest = &fs[1..];
                    let mono = if rest.len() == 1 {
                        rest[0].clone()
                    } else {
                        Expr::from_node(Node::Mul(rest.to_vec()))
                    };
                    (c.clone(), mono)
                }
                _ => (int(1), self.clone()),
            },
            _ => (int(1), self.clone()),
        }
    }

    /// Non-numeric factors of a term.
    pub fn factors(&self) -> Vec<Expr> {
        match self.node() {
            Node::Num(_) => vec![],
            Node::Mul(fs) => fs.iter().filter(|f| f.as_num().is_none()).cloned().collect(),
            _ => vec![self.clone()],
        }
    }

    /// Base and exponent of a factor (`x` is `x^1`).
    pub fn base_exp(&self) -> (Expr, Rational) {
        match self.node() {
            Node::Pow(b, e) => (b.clone(), e.clone()),
            _ => (self.clone(), int(1)),
        }
    }

    /// All free symbols, sorted and deduplicated.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_symbols(&mut out);
        out.into_iter().collect()
    }

    fn collect_symbols(&self, out: &mut std::collections::BTreeSet<Symbol>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Add(xs) | Node::Mul(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Node::Pow(b, _) => b.collect_symbols(out),
        }
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(t) => t == s,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().any(|x| x.contains(s)),
            Node::Pow(b, _) => b.contains(s),
        }
    }

    pub fn contains_any(&self, syms: &[Symbol]) -> bool {
        syms.iter().any(|s| self.contains(s))
    }

    fn kind_rank(&self) -> u8 {
        match self.node() {
            Node::Num(_) => 0,
            Node::Sym(_) => 1,
            Node::Pow(..) => 2,
            Node::Mul(_) => 3,
            Node::Add(_) => 4,
        }
    }

    fn with_coeff(c: Rational, mono: Expr) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        if mono.is_one() {
            return Expr::num(c);
        }
        if c.is_one() {
            return mono;
        }
        let mut fs = vec![Expr::num(c)];
        match mono.node() {
            Node::Mul(xs) => fs.extend(xs.iter().cloned()),
            _ => fs.push(mono),
        }
        Expr::from_node(Node::Mul(fs))
    }

    /// Normalized sum.
    pub fn add<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        Expr::collect_terms(terms, true)
    }

    // Like terms merged; radical folding is skipped while folding computes
    // its own cofactors, which would otherwise recurse without bound.
    fn collect_terms<I: IntoIterator<Item = Expr>>(terms: I, fold: bool) -> Expr {
        let mut collected: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut constant = int(0);
        let mut push = |t: &Expr, collected: &mut BTreeMap<Expr, Rational>| {
            let (c, mono) = t.split_coeff();
            if mono.is_one() {
                constant += c;
            } else {
                *collected.entry(mono).or_insert_with(|| int(0)) += c;
            }
        };
        for t in terms {
            match t.node() {
                Node::Add(xs) => xs.iter().for_each(|x| push(x, &mut collected)),
                _ => push(&t, &mut collected),
            }
        }
        let mut out: Vec<Expr> = collected
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| Expr::with_coeff(c, m))
            .collect();
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        if fold && out.len() >= 2 {
            if let Some(folded) = fold_radical_terms(&out) {
                return folded;
            }
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Add(out)),
        }
    }

    /// Normalized product, distributing over sums.
    pub fn mul<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = int(1);
        let mut powers: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut sums: Vec<Expr> = Vec::new();
        let push = |f: &Expr,
                        coeff: &mut Rational,
                        powers: &mut BTreeMap<Expr, Rational>,
                        sums: &mut Vec<Expr>| match f.node() {
            Node::Num(c) => *coeff *= c,
            Node::Add(_) => sums.push(f.clone()),
            _ => {
                let (b, e) = f.base_exp();
                *powers.entry(b).or_insert_with(|| int(0)) += e;
            }
        };
        for f in factors {
            match f.node() {
                Node::Mul(xs) => xs
                    .iter()
                    .for_each(|x| push(x, &mut coeff, &mut powers, &mut sums)),
                _ => push(&f, &mut coeff, &mut powers, &mut sums),
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }

        // Rebuild atoms. A combined power may normalize into something that is
        // not an atom (a number, an expanded sum, or a product of atoms).
        let mut atoms: Vec<Expr> = Vec::new();
        let mut recombine = false;
        for (b, e) in powers {
            if e.is_zero() {
                continue;
            }
            let p = Expr::pow(b.clone(), e.clone());
            match p.node() {
                Node::Num(c) => coeff *= c,
                Node::Add(_) => sums.push(p.clone()),
                Node::Mul(xs) => {
                    for x in xs {
                        match x.node() {
                            Node::Num(c) => coeff *= c,
                            _ => atoms.push(x.clone()),
                        }
                    }
                    recombine = true;
                }
                _ => {
                    if p.base_exp().0 != b {
                        recombine = true;
                    }
                    atoms.push(p.clone())
                }
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        if recombine {
            let mut bases: Vec<Expr> = atoms.iter().map(|a| a.base_exp().0).collect();
            bases.sort();
            let before = bases.len();
            bases.dedup();
            if bases.len() != before {
                let mut all = vec![Expr::num(coeff)];
                all.extend(atoms);
                all.extend(sums);
                return Expr::mul(all);
            }
        }

        if !sums.is_empty() {
            let head = Expr::mul_atoms(coeff, atoms);
            let mut acc = vec![head];
            for s in sums {
                let mut next = Vec::new();
                for a in &acc {
                    for t in s.terms() {
                        next.push(Expr::mul([a.clone(), t]));
                    }
                }
                acc = vec![Expr::add(next)];
                if acc[0].is_zero_const() {
                    return Expr::zero();
                }
                // The running product may itself be a sum; keep distributing
                // its terms against the next factor.
                acc = acc[0].terms();
            }
            return Expr::add(acc);
        }
        Expr::mul_atoms(coeff, atoms)
    }

    fn mul_atoms(coeff: Rational, mut atoms: Vec<Expr>) -> Expr {
        atoms.sort();
        let mono = match atoms.len() {
            0 => Expr::one(),
            1 => atoms.pop().unwrap(),
            _ => Expr::from_node(Node::Mul(atoms)),
        };
        Expr::with_coeff(coeff, mono)
    }

    /// Normalized power with an exact rational exponent.
    pub fn pow(base: Expr, exp: Rational) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base;
        }
        match base.node() {
            Node::Num(c) => num_pow(c, &exp),
            Node::Sym(_) => Expr::from_node(Node::Pow(base, exp)),
            Node::Pow(b, e) => {
                if exp.is_integer() || e.denom().is_even() {
                    Expr::pow(b.clone(), e * &exp)
                } else {
                    Expr::from_node(Node::Pow(base, exp))
                }
            }
            Node::Mul(fs) => {
                if exp.is_integer() {
                    return Expr::mul(fs.iter().map(|f| Expr::pow(f.clone(), exp.clone())));
                }
                let (c, mono) = base.split_coeff();
                if c.is_positive() && !c.is_one() {
                    return Expr::mul([num_pow(&c, &exp), Expr::pow(mono, exp)]);
                }
                let whole = exp.floor();
                let frac = &exp - &whole;
                let atom = Expr::from_node(Node::Pow(base.clone(), frac));
                if whole.is_zero() {
                    atom
                } else {
                    Expr::mul([Expr::pow(base, whole), atom])
                }
            }
            Node::Add(_) => {
                if exp.is_integer() {
                    if exp.is_positive() {
                        let n = exp.to_integer();
                        let n: usize = n.try_into().expect("exponent too large to expand");
                        return Expr::mul(std::iter::repeat_n(base, n));
                    }
                    // Negative integer powers stay atoms; pull out signed content.
                    let c = sum_content(&base, true);
                    if !c.is_one() {
                        let prim = Expr::mul([Expr::num(c.recip()), base]);
                        return Expr::mul([num_pow(&c, &exp), Expr::pow(prim, exp)]);
                    }
                    return Expr::from_node(Node::Pow(base, exp));
                }
                let c = sum_content(&base, false);
                if !c.is_one() {
                    let prim = Expr::mul([Expr::num(c.recip()), base]);
                    return Expr::mul([num_pow(&c, &exp), Expr::pow(prim, exp)]);
                }
                if exp > int(1) {
                    let whole = exp.floor();
                    let frac = &exp - &whole;
                    return Expr::mul([
                        Expr::pow(base.clone(), whole),
                        Expr::from_node(Node::Pow(base, frac)),
                    ]);
                }
                Expr::from_node(Node::Pow(base, exp))
            }
        }
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr::pow(self.clone(), int(n))
    }

    pub fn neg(&self) -> Expr {
        Expr::mul([Expr::int(-1), self.clone()])
    }

    /// Apply `f` to every child and rebuild through the normalizing
    /// constructors.
    pub fn map_children<F: FnMut(&Expr) -> Expr>(&self, mut f: F) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => self.clone(),
            Node::Add(xs) => Expr::add(xs.iter().map(&mut f)),
            Node::Mul(xs) => Expr::mul(xs.iter().map(&mut f)),
            Node::Pow(b, e) => Expr::pow(f(b), e.clone()),
        }
    }

    /// Coefficients of `self` as a polynomial in `s`: `result[k]` multiplies
    /// `s^k`. Returns `None` if `s` occurs other than through non-negative
    /// integer powers at top level.
    pub fn polynomial_coeffs(&self, s: &Symbol) -> Option<Vec<Expr>> {
        let mut coeffs: BTreeMap<usize, Vec<Expr>> = BTreeMap::new();
        for t in self.terms() {
            let mut degree = 0usize;
            let mut rest = Vec::new();
            let (c, _) = t.split_coeff();
            rest.push(Expr::num(c));
            for f in t.factors() {
                let (b, e) = f.base_exp();
                if b.as_symbol() == Some(s) {
                    if !e.is_integer() || e.is_negative() {
                        return None;
                    }
                    degree += usize::try_from(e.to_integer()).ok()?;
                } else {
                    if f.contains(s) {
                        return None;
                    }
                    rest.push(f);
                }
            }
            coeffs.entry(degree).or_default().push(Expr::mul(rest));
        }
        let max = coeffs.keys().next_back().copied().unwrap_or(0);
        Some(
            (0..=max)
                .map(|k| coeffs.remove(&k).map(Expr::add).unwrap_or_else(Expr::zero))
                .collect(),
        )
    }
}

// Terms sharing a negative power `B^f` of a sum whose cofactors add
// up to an exact multiple `Q*B` are replaced by `Q*B^(f+1)`. Without this,
// `R^2*S^(-1/2) - x^2*S^(-1/2)` with `S = R^2 - x^2` would not reduce to
// `S^(1/2)`.
fn fold_radical_terms(terms: &[Expr]) -> Option<Expr> {
    let mut atoms = std::collections::BTreeSet::new();
    for t in terms {
        for f in t.factors() {
            if let Node::Pow(b, e) = f.node() {
                if matches!(b.node(), Node::Add(_)) && e.is_negative() {
                    atoms.insert(f.clone());
                }
            }
        }
    }
    for atom in atoms {
        let (base, e) = atom.base_exp();
        let (group, rest): (Vec<&Expr>, Vec<&Expr>) =
            terms.iter().partition(|t| t.factors().contains(&atom));
        if group.len() < 2 {
            continue;
        }
        // Dropping the factor keeps each term normal; multiplying by the
        // inverse power would split and distribute it.
        let cofactor = Expr::collect_terms(
            group.iter().map(|t| {
                let (c, _) = t.split_coeff();
                let mut fs: Vec<Expr> = t.factors().into_iter().filter(|f| *f != atom).collect();
                let mono = match fs.len() {
                    0 => Expr::one(),
                    1 => fs.pop().unwrap(),
                    _ => Expr::from_node(Node::Mul(fs)),
                };
                Expr::with_coeff(c, mono)
            }),
            false,
        );
        let (cofactor, atoms) = opaque_atoms(&cofactor);
        if let Some(q) = exact_quotient(&cofactor, &base) {
            let q = q.substitute(&atoms);
            let mut out: Vec<Expr> = rest.into_iter().cloned().collect();
            out.push(Expr::mul([q, Expr::pow(base, e + int(1))]));
            return Some(Expr::add(out));
        }
    }
    None
}

// Replaces radicals and powers of sums in the factors of `e` by placeholder
// symbols, so that `e` reads as a polynomial with opaque coefficients.
fn opaque_atoms(e: &Expr) -> (Expr, calculus::Bindings) {
    let mut atoms = calculus::Bindings::new();
    let mut names: BTreeMap<Expr, Symbol> = BTreeMap::new();
    let terms = e.terms().into_iter().map(|t| {
        let factors = t.factors().into_iter().map(|f| match f.node() {
            Node::Pow(b, x) if !x.is_integer() || matches!(b.node(), Node::Add(_)) => {
                let n = names.len();
                let s = names.entry(f.clone()).or_insert_with(|| Symbol::new(&format!("#{n}"))).clone();
                atoms.insert(s.clone(), f.clone());
                Expr::symbol(&s)
            }
            _ => f,
        });
        let (c, _) = t.split_coeff();
        Expr::mul(std::iter::once(Expr::num(c)).chain(factors).collect::<Vec<_>>())
    });
    let out = Expr::add(terms.collect::<Vec<_>>());
    (out, atoms)
}

/// `c / b` when `b` divides `c` exactly as a polynomial in one of the symbols
/// of `b` with a monomial leading coefficient.
pub(crate) fn exact_quotient(c: &Expr, b: &Expr) -> Option<Expr> {
    if c.is_zero_const() {
        return Some(Expr::zero());
    }
    for x in b.symbols() {
        let Some(bc) = b.polynomial_coeffs(&x) else { continue };
        let d = bc.len() - 1;
        let lc = &bc[d];
        if d == 0 || matches!(lc.node(), Node::Add(_)) {
            continue;
        }
        let Some(mut cc) = c.polynomial_coeffs(&x) else { continue };
        if cc.len() <= d {
            continue;
        }
        let inv = Expr::pow(lc.clone(), int(-1));
        let xs = Expr::symbol(&x);
        let mut q = Vec::new();
        for k in (d..cc.len()).rev() {
            let qk = Expr::mul([cc[k].clone(), inv.clone()]);
            if qk.is_zero_const() {
                continue;
            }
            for (j, bj) in bc.iter().enumerate() {
                let idx = k - d + j;
                cc[idx] = Expr::add([cc[idx].clone(), Expr::mul([qk.clone(), bj.clone()]).neg()]);
            }
            q.push(Expr::mul([qk, xs.powi((k - d) as i64)]));
        }
        if cc.iter().all(|r| r.is_zero_const()) {
            return Some(Expr::add(q));
        }
    }
    None
}

/// Rational content of a sum's coefficients. With `signed`, the sign is chosen
/// so the leading term of the primitive part is positive.
pub(crate) fn sum_content(e: &Expr, signed: bool) -> Rational {
    let terms = e.terms();
    let mut num = BigInt::zero();
    let mut den = BigInt::zero();
    for t in &terms {
        let (c, _) = t.split_coeff();
        num = num.gcd(c.numer());
        den = if den.is_zero() { c.denom().clone() } else { den.lcm(c.denom()) };
    }
    if num.is_zero() {
        return int(1);
    }
    let mut c = Rational::new(num, den);
    if signed && terms[0].split_coeff().0.is_negative() {
        c = -c;
    }
    c
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let a_pow = matches!(self.node(), Node::Pow(..));
        let b_pow = matches!(other.node(), Node::Pow(..));
        if a_pow || b_pow {
            let (ba, ea) = self.base_exp();
            let (bb, eb) = other.base_exp();
            return ba.cmp(&bb).then_with(|| eb.cmp(&ea));
        }
        self.kind_rank()
            .cmp(&other.kind_rank())
            .then_with(|| match (self.node(), other.node()) {
                (Node::Num(a), Node::Num(b)) => a.cmp(b),
                (Node::Sym(a), Node::Sym(b)) => a.cmp(b),
                (Node::Mul(a), Node::Mul(b)) | (Node::Add(a), Node::Add(b)) => a.cmp(b),
                _ => Ordering::Equal,
            })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::add([a, b]));
binop!(Sub, sub, |a, b| Expr::add([a, b.neg()]));
binop!(Mul, mul, |a, b| Expr::mul([a, b]));
binop!(Div, div, |a, b| Expr::mul([a, b.powi(-1)]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
