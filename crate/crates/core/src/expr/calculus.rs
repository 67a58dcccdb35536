use std::collections::BTreeMap;

use super::rational::int;
use super::{Expr, Node, Symbol};

/// Simultaneous substitution map.
pub type Bindings = BTreeMap<Symbol, Expr>;

impl Expr {
    /// Exact partial derivative with respect to `s`; every other symbol is
    /// independent.
    pub fn differentiate(&self, s: &Symbol) -> Expr {
        if !self.contains(s) {
            return Expr::zero();
        }
        match self.node() {
            Node::Num(_) => Expr::zero(),
            Node::Sym(t) => {
                if t == s {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(xs) => Expr::add(xs.iter().map(|x| x.differentiate(s))),
            Node::Mul(xs) => Expr::add((0..xs.len()).filter(|&i| xs[i].contains(s)).map(|i| {
                let mut fs: Vec<Expr> = xs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, x)| x.clone())
                    .collect();
                fs.push(xs[i].differentiate(s));
                Expr::mul(fs)
            })),
            Node::Pow(b, e) => Expr::mul([
                Expr::num(e.clone()),
                Expr::pow(b.clone(), e - int(1)),
                b.differentiate(s),
            ]),
        }
    }

    /// Simultaneous substitution followed by normalization.
    pub fn substitute(&self, bindings: &Bindings) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        match self.node() {
            Node::Sym(s) => bindings.get(s).cloned().unwrap_or_else(|| self.clone()),
            Node::Num(_) => self.clone(),
            _ => {
                if !bindings.keys().any(|k| self.contains(k)) {
                    return self.clone();
                }
                self.map_children(|c| c.substitute(bindings))
            }
        }
    }

    pub fn substitute_one(&self, s: &Symbol, value: &Expr) -> Expr {
        let mut b = Bindings::new();
        b.insert(s.clone(), value.clone());
        self.substitute(&b)
    }
}

/// `{a, b} = sum_i (da/dq_i db/dp_i - da/dp_i db/dq_i)` over the given
/// canonical pairs.
pub fn poisson_bracket(a: &Expr, b: &Expr, pairs: &[(Symbol, Symbol)]) -> Expr {
    Expr::add(pairs.iter().map(|(q, p)| {
        a.differentiate(q) * b.differentiate(p) - a.differentiate(p) * b.differentiate(q)
    }))
}

#[cfg(test)]
mod tests {
    use super::super::parse_free;
    use super::*;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    fn pairs(list: &[(&str, &str)]) -> Vec<(Symbol, Symbol)> {
        list.iter().map(|(q, p)| (Symbol::new(q), Symbol::new(p))).collect()
    }

    #[test]
    fn momentum_of_disc_lagrangian() {
        let l = p("q1_d^2/(4*q2)");
        assert_eq!(l.differentiate(&"q1_d".into()), p("q1_d/(2*q2)"));
        assert_eq!(p("R^2").differentiate(&"q1".into()), Expr::zero());
    }

    #[test]
    fn radical_derivative() {
        let e = p("(R^2 - x^2)^(3/2)");
        assert_eq!(e.differentiate(&"x".into()), p("-3*x*(R^2 - x^2)^(1/2)"));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut b = Bindings::new();
        b.insert("x".into(), p("y"));
        b.insert("y".into(), p("x"));
        assert_eq!(p("x - 2*y").substitute(&b), p("y - 2*x"));
        assert_eq!(p("x^2 + 1").substitute_one(&"x".into(), &p("x")), p("x^2 + 1"));
        assert_eq!(
            p("e/2*(p^2 + m^2)").substitute_one(&"m".into(), &Expr::zero()),
            p("e/2*p^2")
        );
    }

    #[test]
    fn canonical_brackets() {
        let pr = pairs(&[("q1", "p1"), ("q2", "p2")]);
        assert_eq!(poisson_bracket(&p("q1"), &p("p1"), &pr), Expr::one());
        assert_eq!(
            poisson_bracket(&p("p1^2 + q1^2 + q2^2 - R^2"), &p("p2"), &pr),
            p("2*q2")
        );
        assert_eq!(
            poisson_bracket(&p("p2"), &p("p1^2 + q1^2 + q2^2 - R^2"), &pr),
            p("-2*q2")
        );
    }
}
