//! Canonical printing.
//!
//! The printed form is a deterministic function of the normal form and is
//! accepted by the parser, which normalizes it back to the same expression.
//! Sums print positive terms first; a sum whose terms share rational content
//! or common factors prints in factored form (`1/2*e*(m^2 + p1^2 - p0^2)`),
//! and a common radical whose base matches the remaining factor is merged
//! (`-2/3*(R^2 - q^2)^(3/2)`).

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rational::int;
use super::{Expr, Node, Rational};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn render(e: &Expr) -> String {
    match e.node() {
        Node::Add(_) => render_factored(e).unwrap_or_else(|| render_terms(&e.terms())),
        _ => {
            let (neg, body) = render_term(e);
            if neg {
                format!("-{body}")
            } else {
                body
            }
        }
    }
}

fn render_terms(terms: &[Expr]) -> String {
    let (pos, neg): (Vec<&Expr>, Vec<&Expr>) =
        terms.iter().partition(|t| !t.split_coeff().0.is_negative());
    let mut out = String::new();
    for (i, t) in pos.iter().chain(neg.iter()).enumerate() {
        let (negative, body) = render_term(t);
        match (i, negative) {
            (0, false) => {}
            (0, true) => out.push('-'),
            (_, false) => out.push_str(" + "),
            (_, true) => out.push_str(" - "),
        }
        out.push_str(&body);
    }
    out
}

fn render_term(t: &Expr) -> (bool, String) {
    let (c, mono) = t.split_coeff();
    let items = mono
        .factors()
        .into_iter()
        .map(|f| {
            let (b, e) = f.base_exp();
            (render_base(&b), e)
        })
        .collect();
    render_product(c, items)
}

fn render_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn render_base(b: &Expr) -> String {
    match b.node() {
        Node::Sym(s) => s.name().to_string(),
        Node::Num(r) if r.is_integer() && !r.is_negative() => r.numer().to_string(),
        Node::Num(r) => format!("({})", render_rational(r)),
        _ => format!("({})", render(b)),
    }
}

fn render_power(base: &str, e: &Rational) -> String {
    if e.is_one() {
        base.to_string()
    } else if e.is_integer() && e.is_positive() {
        format!("{base}^{}", e.numer())
    } else {
        format!("{base}^({})", render_rational(e))
    }
}

fn render_product(c: Rational, items: Vec<(String, Rational)>) -> (bool, String) {
    let neg = c.is_negative();
    let c = c.abs();
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    // `1/(S)^2` and `1/(y*(S))` would read back as reciprocals of expanded
    // products, a different normal form, so a sum only goes below the bar
    // on its own and to the first power.
    let below = items.iter().filter(|(_, e)| e.is_negative()).count();
    for (b, e) in &items {
        if e.is_positive() || (b.starts_with('(') && (*e < int(-1) || below > 1)) {
            num.push(render_power(b, e));
        } else {
            den.push(render_power(b, &-e));
        }
    }
    if den.is_empty() {
        if !c.is_one() || num.is_empty() {
            num.insert(0, render_rational(&c));
        }
        return (neg, num.join("*"));
    }
    if !c.numer().is_one() {
        num.insert(0, c.numer().to_string());
    }
    if !c.denom().is_one() {
        den.insert(0, c.denom().to_string());
    }
    let num = if num.is_empty() { "1".to_string() } else { num.join("*") };
    let den = if den.len() == 1 { den.pop().unwrap() } else { format!("({})", den.join("*")) };
    (neg, format!("{num}/{den}"))
}

fn render_factored(e: &Expr) -> Option<String> {
    let terms = e.terms();
    let mut num = BigInt::zero();
    let mut den = BigInt::zero();
    for t in &terms {
        let (c, _) = t.split_coeff();
        num = num.gcd(c.numer());
        den = den.gcd(c.denom());
    }
    let mut content = Rational::new(num, den);
    if terms.iter().all(|t| t.split_coeff().0.is_negative()) {
        content = -content;
    }

    // Factors present with a positive exponent in every term, at their
    // minimal exponent.
    let mut common: Vec<(Expr, Rational)> = Vec::new();
    for f in terms[0].factors() {
        let (b, e0) = f.base_exp();
        if !e0.is_positive() {
            continue;
        }
        let mut min = e0;
        let mut everywhere = true;
        for t in &terms[1..] {
            match t.factors().into_iter().map(|g| g.base_exp()).find(|(bb, _)| *bb == b) {
                Some((_, e)) if e.is_positive() => {
                    if e < min {
                        min = e;
                    }
                }
                _ => {
                    everywhere = false;
                    break;
                }
            }
        }
        if everywhere {
            common.push((b, min));
        }
    }
    if content.is_one() && common.is_empty() {
        return None;
    }

    let divisor: Vec<Expr> = std::iter::once(Expr::num(content.recip()))
        .chain(common.iter().map(|(b, e)| Expr::pow(b.clone(), -e)))
        .collect();
    let inner = Expr::add(terms.iter().map(|t| {
        let mut fs = divisor.clone();
        fs.push(t.clone());
        Expr::mul(fs)
    }));

    let mut items: Vec<(String, Rational)> = Vec::new();
    let mut merged = false;
    for (b, e) in &common {
        if !merged && matches!(b.node(), Node::Add(_)) {
            if inner == *b {
                items.push((render_base(b), e + int(1)));
                merged = true;
                continue;
            }
            if inner == b.neg() {
                items.push((render_base(b), e + int(1)));
                content = -content;
                merged = true;
                continue;
            }
        }
        items.push((render_base(b), e.clone()));
    }
    if !merged {
        let inner_str = match inner.node() {
            Node::Add(_) => format!("({})", render_terms(&inner.terms())),
            _ => render_base(&inner),
        };
        items.push((inner_str, int(1)));
    }
    let (neg, body) = render_product(content, items);
    Some(if neg { format!("-{body}") } else { body })
}

#[cfg(test)]
mod tests {
    use super::super::parse_free;
    use super::*;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn simple_forms() {
        assert_eq!(p("2*q1 + 3").to_string(), "2*q1 + 3");
        assert_eq!(p("q1_d/(2*q2)").to_string(), "q1_d/(2*q2)");
        assert_eq!(p("-x").to_string(), "-x");
        assert_eq!(p("1/x").to_string(), "1/x");
        assert_eq!(p("x^(1/2)").to_string(), "x^(1/2)");
        assert_eq!(p("2/3").to_string(), "2/3");
    }

    #[test]
    fn positives_lead() {
        assert_eq!(p("q2^2 + p1^2 + q1^2 - R^2").to_string(), "p1^2 + q1^2 + q2^2 - R^2");
    }

    #[test]
    fn factored_sums() {
        assert_eq!(
            p("e/2*(-p0^2 + p1^2 + m^2)").to_string(),
            "1/2*e*(m^2 + p1^2 - p0^2)"
        );
        let e = p("-2/3*(R^2 - p1^2 - q1^2)^(3/2)");
        assert_eq!(e.to_string(), "-2/3*(R^2 - p1^2 - q1^2)^(3/2)");
        let e = p("2/3*(p1^2 + q1^2 - R^2)^(3/2)");
        assert_eq!(e.to_string(), "2/3*(p1^2 + q1^2 - R^2)^(3/2)");
    }

    #[test]
    fn printed_form_reparses() {
        for s in [
            "q1_d^2/(4*q2) - q2*(q1^2 + q2^2/3 - R^2)",
            "(x + y)^(-1/2) * x",
            "sqrt(8) * z",
            "(-8)^(1/2)",
            "(x*y)^(1/2) + 1/(a+b)",
            "1/((x^2 + 1)*(y^2 + 1))",
            "x/(y*(x + 1))",
        ] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} -> {e}");
        }
    }
}
