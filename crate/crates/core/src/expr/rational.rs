use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Node};

pub type Rational = num_rational::BigRational;

pub(crate) fn int(i: i64) -> Rational {
    Rational::from_integer(BigInt::from(i))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parse a plain decimal literal (`12`, `0.25`, `3.`) as an exact rational.
pub(crate) fn parse_decimal(text: &str) -> Option<Rational> {
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let d = num_traits::pow(BigInt::from(10), frac.len());
    Some(Rational::new(n, d))
}

/// Split `m > 0` into `a^q * b` with `b` free of q-th powers (up to a trial
/// division bound).
fn extract_root(m: &BigInt, q: u32) -> (BigInt, BigInt) {
    let mut rest = m.clone();
    let mut outside = BigInt::one();
    let mut inside = BigInt::one();
    let mut k = BigInt::from(2);
    let mut steps = 0u32;
    while num_traits::pow(k.clone(), q as usize) <= rest && steps < 200_000 {
        let mut count = 0u32;
        while (&rest % &k).is_zero() {
            rest /= &k;
            count += 1;
        }
        for _ in 0..count / q {
            outside *= &k;
        }
        for _ in 0..count % q {
            inside *= &k;
        }
        k += 1;
        steps += 1;
    }
    (outside, inside * rest)
}

/// Exact `c^e` in normal form.
pub(crate) fn num_pow(c: &Rational, e: &Rational) -> Expr {
    if c.is_zero() {
        return if e.is_positive() {
            Expr::zero()
        } else {
            Expr::from_node(Node::Pow(Expr::num(c.clone()), e.clone()))
        };
    }
    if c.is_one() {
        return Expr::one();
    }
    if e.is_integer() {
        let n = e.to_integer().to_i32().expect("exponent out of range");
        return Expr::num(num_traits::Pow::pow(c, n));
    }
    let p = e.numer().clone();
    let q = e.denom().clone();
    if c.is_negative() {
        if q.is_even() {
            return Expr::from_node(Node::Pow(Expr::num(c.clone()), e.clone()));
        }
        let mag = num_pow(&-c, e);
        return if p.is_odd() { mag.neg() } else { mag };
    }
    let qu = q.to_u32().expect("root order out of range");
    let pi = p.to_i32().expect("exponent out of range");
    // c = n/d = (n d^(q-1)) / d^q
    let n = c.numer();
    let d = c.denom();
    let m = n * num_traits::pow(d.clone(), (qu - 1) as usize);
    let (a, b) = extract_root(&m, qu);
    let mut coeff: Rational = num_traits::Pow::pow(Rational::from_integer(a), pi)
        * num_traits::Pow::pow(Rational::from_integer(d.clone()), -pi);
    if b.is_one() {
        return Expr::num(coeff);
    }
    let whole = e.floor();
    let frac = e - &whole;
    let b = Rational::from_integer(b);
    coeff *= num_traits::Pow::pow(&b, whole.to_integer().to_i32().unwrap());
    let atom = Expr::from_node(Node::Pow(Expr::num(b), frac));
    Expr::with_coeff(coeff, atom)
}
