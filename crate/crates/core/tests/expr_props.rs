use std::collections::BTreeMap;

use hjred::expr::{eval_num, parse_free, poisson_bracket, rational_to_f64, Bindings, Expr, Node, Rational, Symbol};
use proptest::prelude::*;

const VARS: [&str; 3] = ["x", "y", "z"];

fn rational() -> impl Strategy<Value = Expr> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Expr::ratio(n, d))
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![rational(), (0..VARS.len()).prop_map(|i| Expr::sym(VARS[i]))]
}

// Polynomials plus radicals of strictly positive bases, so every member is
// finite and smooth on the whole sampling box.
fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::add),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::mul),
            (inner.clone(), 0i64..=3).prop_map(|(b, k)| b.powi(k)),
            (inner, prop_oneof![Just((1, 2)), Just((-1, 2)), Just((3, 2)), Just((-1, 1))]).prop_map(|(b, (n, d))| {
                let base = Expr::add([Expr::one(), b.powi(2)]);
                Expr::pow(base, Rational::new(n.into(), d.into()))
            }),
        ]
    })
}

fn polynomial(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    let monomial = (-3i64..=3, prop::collection::vec(0i64..=3, vars.len())).prop_map(move |(c, exps)| {
        let mut f = vec![Expr::int(c)];
        let mut degree = 0;
        for (v, k) in vars.iter().zip(exps) {
            if degree + k <= 3 {
                f.push(Expr::sym(v).powi(k));
                degree += k;
            }
        }
        Expr::mul(f)
    });
    prop::collection::vec(monomial, 1..4).prop_map(Expr::add)
}

fn radical_exponent() -> impl Strategy<Value = Rational> {
    (-3i64..=3).prop_map(|n| Rational::new(n.into(), 2.into()))
}

fn point() -> impl Strategy<Value = BTreeMap<Symbol, f64>> {
    prop::collection::vec(-1.5f64..1.5, VARS.len())
        .prop_map(|v| VARS.iter().zip(v).map(|(n, x)| (Symbol::new(n), x)).collect())
}

// Value of `e` with every sum replaced by the sum of absolute values, the
// scale of floating-point roundoff in evaluating `e`.
fn magnitude(e: &Expr, at: &BTreeMap<Symbol, f64>) -> f64 {
    match e.node() {
        Node::Num(r) => rational_to_f64(r).abs(),
        Node::Sym(s) => at[s].abs(),
        Node::Add(ts) => ts.iter().map(|t| magnitude(t, at)).sum(),
        Node::Mul(fs) => fs.iter().map(|f| magnitude(f, at)).product(),
        Node::Pow(b, k) if rational_to_f64(k) < 0.0 => eval_num(b, at).unwrap().abs().powf(rational_to_f64(k)),
        Node::Pow(b, k) => magnitude(b, at).powf(rational_to_f64(k)),
    }
}

const PHASE: [&str; 4] = ["q1", "p1", "q2", "p2"];

fn pairs() -> Vec<(Symbol, Symbol)> {
    vec![(Symbol::new("q1"), Symbol::new("p1")), (Symbol::new("q2"), Symbol::new("p2"))]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_idempotent(e in expr()) {
        let again = e.map_children(|c| c.clone());
        prop_assert_eq!(again.to_string(), e.to_string());
        prop_assert_eq!(again, e);
    }

    #[test]
    fn printing_round_trips(e in expr()) {
        let back = parse_free(&e.to_string()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn derivative_is_linear(a in expr(), b in expr()) {
        let x = Symbol::new("x");
        let lhs = (a.clone() + b.clone()).differentiate(&x);
        let rhs = a.differentiate(&x) + b.differentiate(&x);
        prop_assert!((lhs - rhs).is_zero_const());
    }

    // Cancellation across distinct denominators is beyond the normal form,
    // so the general rule is checked by value.
    #[test]
    fn derivative_obeys_leibniz(a in expr(), b in expr(), at in point()) {
        let x = Symbol::new("x");
        let lhs = (a.clone() * b.clone()).differentiate(&x);
        let rhs = a.differentiate(&x) * b.clone() + a * b.differentiate(&x);
        let residual = lhs - rhs;
        if !residual.is_zero_const() {
            let v = eval_num(&residual, &at).unwrap();
            prop_assert!(v.abs() <= 1e-12 * (1.0 + magnitude(&residual, &at)), "{} at {:?}", residual, at);
        }
    }

    #[test]
    fn leibniz_cancels_exactly_over_one_radical(
        pa in polynomial(&VARS),
        pb in polynomial(&VARS),
        base in polynomial(&VARS),
        ra in radical_exponent(),
        rb in radical_exponent(),
    ) {
        let x = Symbol::new("x");
        let s = Expr::add([Expr::one(), base.powi(2)]);
        let a = pa * Expr::pow(s.clone(), ra);
        let b = pb * Expr::pow(s, rb);
        let lhs = (a.clone() * b.clone()).differentiate(&x);
        let rhs = a.differentiate(&x) * b.clone() + a * b.differentiate(&x);
        prop_assert!((lhs - rhs).is_zero_const());
    }

    #[test]
    fn derivative_matches_finite_difference(e in expr(), at in point()) {
        let x = Symbol::new("x");
        let d = e.differentiate(&x);
        let h = 1e-5;
        let shifted = |dx: f64| {
            let mut p = at.clone();
            *p.get_mut(&x).unwrap() += dx;
            eval_num(&e, &p).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let v = eval_num(&d, &at).unwrap();
        prop_assert!((fd - v).abs() <= 1e-6 * (1.0 + v.abs()), "fd {} vs {}", fd, v);
    }

    #[test]
    fn substitution_commutes_with_evaluation(e in expr(), s in expr(), at in point()) {
        let x = Symbol::new("x");
        let mut b = Bindings::new();
        b.insert(x.clone(), s.clone());
        let direct = eval_num(&e.substitute(&b), &at).unwrap();
        let mut composed = at.clone();
        composed.insert(x, eval_num(&s, &at).unwrap());
        let staged = eval_num(&e, &composed).unwrap();
        let scale = 1.0 + magnitude(&e.substitute(&b), &at) + magnitude(&e, &composed);
        prop_assert!((direct - staged).abs() <= 1e-12 * scale, "{} vs {} at scale {}", direct, staged, scale);
    }

    #[test]
    fn bracket_is_antisymmetric(a in polynomial(&PHASE), b in polynomial(&PHASE)) {
        let sum = poisson_bracket(&a, &b, &pairs()) + poisson_bracket(&b, &a, &pairs());
        prop_assert!(sum.is_zero_const());
    }

    #[test]
    fn bracket_satisfies_jacobi(a in polynomial(&PHASE), b in polynomial(&PHASE), c in polynomial(&PHASE)) {
        let pb = |u: &Expr, v: &Expr| poisson_bracket(u, v, &pairs());
        let cyclic = pb(&a, &pb(&b, &c)) + pb(&b, &pb(&c, &a)) + pb(&c, &pb(&a, &b));
        prop_assert!(cyclic.is_zero_const());
    }
}
