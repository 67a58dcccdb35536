//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr     := ["-"] term (("+" | "-") term)*
//! term     := factor (("*" | "/") factor)*
//! factor   := atom ["^" exponent]
//! atom     := NUMBER | IDENT | "(" expr ")" | "sqrt" "(" expr ")"
//! exponent := NUMBER | "(" ["-"] NUMBER ["/" NUMBER] ")"
//! ```
//!
//! Numbers are exact: `0.25` parses as `1/4`.

use num_traits::Zero;

use super::rational::parse_decimal;
use super::{Expr, Rational, SymbolTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { column: usize, name: String },
    #[error("malformed rational exponent at column {column}: {message}")]
    MalformedExponent { column: usize, message: String },
}

impl ParseError {
    /// 1-based column of the offending character.
    pub fn column(&self) -> usize {
        match self {
            ParseError::Syntax { column, .. }
            | ParseError::UnknownIdentifier { column, .. }
            | ParseError::MalformedExponent { column, .. } => *column,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number `{n}`"),
        Tok::Ident(i) => format!("identifier `{i}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                out.push((Tok::Num(chars[start..i].iter().collect()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            other => {
                return Err(ParseError::Syntax {
                    column: start + 1,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    table: Option<&'a SymbolTable>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1 + 1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::Syntax {
            column: self.column(),
            message: format!("expected {wanted}, found {}", describe(self.peek())),
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&describe(&t)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = Vec::new();
        let negate_first = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let first = self.term()?;
        terms.push(if negate_first { first.neg() } else { first });
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(self.term()?.neg());
                }
                _ => break,
            }
        }
        Ok(Expr::add(terms))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc * self.factor()?;
                }
                Tok::Slash => {
                    self.bump();
                    acc = acc / self.factor()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.exponent()?;
            return Ok(Expr::pow(base, e));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<Rational, ParseError> {
        let column = self.column();
        match self.bump() {
            Tok::Num(n) => parse_decimal(&n).ok_or_else(|| ParseError::Syntax {
                column,
                message: format!("malformed number `{n}`"),
            }),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a number"))
            }
        }
    }

    fn exponent(&mut self) -> Result<Rational, ParseError> {
        match self.peek() {
            Tok::Num(_) => self.number(),
            Tok::LParen => {
                let column = self.column();
                self.bump();
                let negative = if *self.peek() == Tok::Minus {
                    self.bump();
                    true
                } else {
                    false
                };
                let malformed = |message: String| ParseError::MalformedExponent { column, message };
                let num = match self.peek() {
                    Tok::Num(_) => self.number()?,
                    other => return Err(malformed(format!("expected a number, found {}", describe(other)))),
                };
                let mut value = num;
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let den = match self.peek() {
                        Tok::Num(_) => self.number()?,
                        other => {
                            return Err(malformed(format!(
                                "expected a denominator, found {}",
                                describe(other)
                            )))
                        }
                    };
                    if den.is_zero() {
                        return Err(malformed("zero denominator".into()));
                    }
                    value /= den;
                }
                if *self.peek() != Tok::RParen {
                    return Err(malformed(format!("expected `)`, found {}", describe(self.peek()))));
                }
                self.bump();
                Ok(if negative { -value } else { value })
            }
            _ => Err(self.unexpected("an exponent")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let column = self.column();
        match self.peek().clone() {
            Tok::Num(_) => Ok(Expr::num(self.number()?)),
            Tok::Ident(name) => {
                self.bump();
                if name == "sqrt" && *self.peek() == Tok::LParen {
                    self.bump();
                    let inner = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::sqrt(inner));
                }
                if let Some(table) = self.table {
                    if !table.contains(&name) {
                        return Err(ParseError::UnknownIdentifier { column, name });
                    }
                }
                Ok(Expr::sym(&name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, identifier or `(`")),
        }
    }
}

fn parse_impl(text: &str, table: Option<&SymbolTable>) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, table };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

/// Parse `text`, requiring every identifier to be registered in `table`.
pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ParseError> {
    parse_impl(text, Some(table))
}

/// Parse `text` accepting any identifier.
pub fn parse_free(text: &str) -> Result<Expr, ParseError> {
    parse_impl(text, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::SymbolKind;

    #[test]
    fn grammar_basics() {
        let e = parse_free("2*q1 + 3").unwrap();
        assert_eq!(e, Expr::int(2) * Expr::sym("q1") + Expr::int(3));
        let e = parse_free("x^(3/2)").unwrap();
        assert_eq!(e, Expr::pow(Expr::sym("x"), Rational::new(3.into(), 2.into())));
        assert_eq!(parse_free("0.5*x").unwrap(), Expr::ratio(1, 2) * Expr::sym("x"));
        assert_eq!(parse_free("sqrt(x)").unwrap(), parse_free("x^(1/2)").unwrap());
    }

    #[test]
    fn double_caret_is_rejected_at_the_second_caret() {
        let err = parse_free("q1_d^^2").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { column: 6, .. }), "{err}");
    }

    #[test]
    fn malformed_exponents() {
        assert!(matches!(parse_free("x^(1/0)"), Err(ParseError::MalformedExponent { .. })));
        assert!(matches!(parse_free("x^(a)"), Err(ParseError::MalformedExponent { .. })));
        assert!(matches!(parse_free("x^(1/2"), Err(ParseError::MalformedExponent { .. })));
    }

    #[test]
    fn unknown_identifiers_are_reported() {
        let mut t = SymbolTable::new();
        t.register_coordinate("q1").unwrap();
        t.register("R", SymbolKind::Constant).unwrap();
        assert!(parse("q1_d^2 - R", &t).is_ok());
        let err = parse("q1 + q3", &t).unwrap_err();
        assert_eq!(err, ParseError::UnknownIdentifier { column: 6, name: "q3".into() });
    }

    #[test]
    fn trailing_garbage() {
        assert!(parse_free("x y").is_err());
        assert!(parse_free("(x").is_err());
        assert!(parse_free("x $ y").is_err());
    }
}
