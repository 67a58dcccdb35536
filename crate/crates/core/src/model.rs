//! System definitions: the line-oriented `.hj` model format.
//!
//! ```text
//! # comment
//! name disc
//! coordinate q1 q2
//! time t
//! constant R 1
//! assume q2 > 0
//! expect_reduced 2/3*(R^2 - p1^2 - q1^2)^(3/2)
//! lagrangian q1_d^2/(4*q2) - q2*(q1^2 + q2^2/3 - R^2)
//! ```
//!
//! `lagrangian` must be the last directive and appear exactly once.
//! `expect_reduced` is optional: a reference reduced Hamiltonian (in the
//! phase-space variables) that the analysis report compares against.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::expr::{
    parse, parse_free, velocity_name, Assumption, Expr, ParseError, Relation, Symbol, SymbolKind,
    SymbolTable,
};

/// Momentum name for a coordinate or for the evolution parameter.
///
/// `q1 -> p1`, `x0 -> p0`; any other name gets a `p_` prefix (`e -> p_e`,
/// `tau -> p_tau`).
pub fn momentum_name(coordinate: &str) -> String {
    let mut chars = coordinate.chars();
    match chars.next() {
        Some('q' | 'x') if !chars.as_str().is_empty() && chars.as_str().chars().all(|c| c.is_ascii_digit()) => {
            format!("p{}", chars.as_str())
        }
        _ => format!("p_{coordinate}"),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: undeclared symbol `{name}`")]
    Undeclared { line: usize, column: usize, name: String },
    #[error("line {line}: `{name}` is already declared")]
    Duplicate { line: usize, name: String },
    #[error(
        "line {line}, column {column}: the lagrangian depends explicitly on the evolution parameter `{name}`; only autonomous systems are supported"
    )]
    TimeDependence { line: usize, column: usize, name: String },
    #[error("no `lagrangian` directive")]
    MissingLagrangian,
    #[error("line {line}: `lagrangian` must be the last directive")]
    AfterLagrangian { line: usize },
    #[error("no coordinates declared")]
    NoCoordinates,
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
}

/// A validated system definition.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub coordinates: Vec<Symbol>,
    pub time: Symbol,
    /// Constants in declaration order with optional numeric values.
    pub constants: Vec<(Symbol, Option<f64>)>,
    pub assumptions: Vec<Assumption>,
    pub lagrangian: Expr,
    pub expect_reduced: Option<Expr>,
    /// Every symbol of the session: coordinates, velocities, the evolution
    /// parameter, constants, and all conjugate momenta.
    pub table: SymbolTable,
}

impl Model {
    pub fn velocity(&self, coordinate: &Symbol) -> Symbol {
        Symbol::new(&velocity_name(coordinate.name()))
    }

    pub fn momentum(&self, coordinate: &Symbol) -> Symbol {
        Symbol::new(&momentum_name(coordinate.name()))
    }

    pub fn velocities(&self) -> Vec<Symbol> {
        self.coordinates.iter().map(|q| self.velocity(q)).collect()
    }

    pub fn constant_symbols(&self) -> Vec<Symbol> {
        self.constants.iter().map(|(s, _)| s.clone()).collect()
    }

    /// Numeric values of the constants that have one.
    pub fn constant_values(&self) -> BTreeMap<Symbol, f64> {
        self.constants
            .iter()
            .filter_map(|(s, v)| v.map(|v| (s.clone(), v)))
            .collect()
    }

    /// Override the value of a declared constant.
    pub fn set_constant(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
        match self.constants.iter_mut().find(|(s, _)| s.name() == name) {
            Some(entry) => {
                entry.1 = Some(value);
                Ok(())
            }
            None => Err(ModelError::UnknownConstant(name.to_string())),
        }
    }

    /// Render in the model file format; `parse_model` of the result yields an
    /// equal model.
    pub fn save(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name {}", self.name);
        let coords: Vec<&str> = self.coordinates.iter().map(|s| s.name()).collect();
        let _ = writeln!(out, "coordinate {}", coords.join(" "));
        let _ = writeln!(out, "time {}", self.time);
        for (s, v) in &self.constants {
            match v {
                Some(v) => writeln!(out, "constant {s} {v}"),
                None => writeln!(out, "constant {s}"),
            }
            .unwrap();
        }
        for a in &self.assumptions {
            let _ = writeln!(out, "assume {} {} {}", a.symbol, a.relation.as_str(), a.value);
        }
        if let Some(e) = &self.expect_reduced {
            let _ = writeln!(out, "expect_reduced {e}");
        }
        let _ = writeln!(out, "lagrangian {}", self.lagrangian);
        out
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.coordinates == other.coordinates
            && self.time == other.time
            && self.constants == other.constants
            && self.assumptions == other.assumptions
            && self.lagrangian == other.lagrangian
            && self.expect_reduced == other.expect_reduced
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    parse_model(&text, stem)
}

const RELATIVISTIC_PARTICLE: &str = include_str!("../models/relativistic_particle.hj");
const DISC: &str = include_str!("../models/disc.hj");
const PUNCTURED_PLANE: &str = include_str!("../models/punctured_plane.hj");

/// The bundled fixtures: relativistic particle, disc, punctured plane.
pub fn builtin_models() -> Vec<Model> {
    [
        (RELATIVISTIC_PARTICLE, "relativistic_particle"),
        (DISC, "disc"),
        (PUNCTURED_PLANE, "punctured_plane"),
    ]
    .into_iter()
    .map(|(text, name)| parse_model(text, name).expect("bundled model is valid"))
    .collect()
}

pub fn builtin_model(name: &str) -> Option<Model> {
    builtin_models().into_iter().find(|m| m.name == name)
}

/// Source text of a bundled model.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "relativistic_particle" => Some(RELATIVISTIC_PARTICLE),
        "disc" => Some(DISC),
        "punctured_plane" => Some(PUNCTURED_PLANE),
        _ => None,
    }
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

impl Line<'_> {
    fn error(&self, column: usize, message: impl Into<String>) -> ModelError {
        ModelError::Syntax { line: self.number, column, message: message.into() }
    }

    // Column (1-based) of the first character of `part`, which must be a
    // subslice of the line.
    fn column_of(&self, part: &str) -> usize {
        part.as_ptr() as usize - self.text.as_ptr() as usize + 1
    }

    fn expression_error(&self, rest: &str, e: ParseError) -> ModelError {
        let column = self.column_of(rest) + e.column() - 1;
        match e {
            ParseError::UnknownIdentifier { name, .. } => {
                ModelError::Undeclared { line: self.number, column, name }
            }
            other => self.error(column, other.to_string()),
        }
    }
}

/// Parse model text. `default_name` is used when there is no `name` line.
pub fn parse_model(text: &str, default_name: &str) -> Result<Model, ModelError> {
    let mut name = default_name.to_string();
    let mut coordinates: Vec<Symbol> = Vec::new();
    let mut time: Option<Symbol> = None;
    let mut constants: Vec<(Symbol, Option<f64>)> = Vec::new();
    let mut pending_assumptions = Vec::new();
    let mut pending_reference = None;
    let mut lagrangian: Option<(usize, &str, &str)> = None;
    let mut declared: BTreeMap<String, usize> = BTreeMap::new();

    let mut declare = |n: &str, line: usize| -> Result<(), ModelError> {
        if declared.insert(n.to_string(), line).is_some() {
            return Err(ModelError::Duplicate { line, name: n.to_string() });
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line = Line { number: i + 1, text: raw };
        let content = raw.split('#').next().unwrap_or("").trim_end();
        let trimmed = content.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if lagrangian.is_some() {
            return Err(ModelError::AfterLagrangian { line: line.number });
        }
        let (keyword, rest) = match trimmed.find(char::is_whitespace) {
            Some(k) => (&trimmed[..k], trimmed[k..].trim_start()),
            None => (trimmed, ""),
        };
        let words: Vec<&str> = rest.split_whitespace().collect();
        let ident = |w: &str| -> Result<(), ModelError> {
            let ok = w.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if ok {
                Ok(())
            } else {
                Err(line.error(line.column_of(w), format!("`{w}` is not an identifier")))
            }
        };
        match keyword {
            "name" => {
                if rest.is_empty() {
                    return Err(line.error(line.column_of(trimmed), "`name` needs a value"));
                }
                name = rest.to_string();
            }
            "coordinate" => {
                if words.is_empty() {
                    return Err(line.error(line.column_of(trimmed), "`coordinate` needs at least one name"));
                }
                for w in words {
                    ident(w)?;
                    declare(w, line.number)?;
                    coordinates.push(Symbol::new(w));
                }
            }
            "time" => {
                let [w] = words[..] else {
                    return Err(line.error(line.column_of(trimmed), "`time` takes exactly one name"));
                };
                ident(w)?;
                if time.is_some() {
                    return Err(ModelError::Duplicate { line: line.number, name: "time".into() });
                }
                declare(w, line.number)?;
                time = Some(Symbol::new(w));
            }
            "constant" => {
                let (w, value) = match words[..] {
                    [w] => (w, None),
                    [w, v] => (w, Some(parse_value(&line, v)?)),
                    _ => {
                        return Err(line.error(
                            line.column_of(trimmed),
                            "expected `constant <name> [<value>]`",
                        ))
                    }
                };
                ident(w)?;
                declare(w, line.number)?;
                constants.push((Symbol::new(w), value));
            }
            "assume" => {
                let [w, rel, v] = words[..] else {
                    return Err(line.error(
                        line.column_of(trimmed),
                        "expected `assume <name> (>|<|!=) <value>`",
                    ));
                };
                ident(w)?;
                let relation = match rel {
                    ">" => Relation::Gt,
                    "<" => Relation::Lt,
                    "!=" => Relation::Ne,
                    _ => {
                        return Err(line.error(
                            line.column_of(rel),
                            format!("unknown relation `{rel}`, expected >, < or !="),
                        ))
                    }
                };
                let value = parse_value(&line, v)?;
                pending_assumptions.push((line.number, line.column_of(w), w, relation, value));
            }
            "expect_reduced" => {
                pending_reference = Some((line.number, raw, rest));
            }
            "lagrangian" => {
                lagrangian = Some((line.number, raw, rest));
            }
            other => {
                return Err(line.error(line.column_of(trimmed), format!("unknown directive `{other}`")))
            }
        }
    }

    if coordinates.is_empty() {
        return Err(ModelError::NoCoordinates);
    }
    let (l_line, l_raw, l_text) = lagrangian.ok_or(ModelError::MissingLagrangian)?;
    let time = time.unwrap_or_else(|| Symbol::new("t"));

    // Symbols the lagrangian may use.
    let mut table = SymbolTable::new();
    let dup = |line: usize| move |e: crate::expr::DuplicateSymbol| ModelError::Duplicate { line, name: e.name };
    for q in &coordinates {
        table.register_coordinate(q.name()).map_err(dup(l_line))?;
    }
    for (c, _) in &constants {
        table.register(c.name(), SymbolKind::Constant).map_err(dup(l_line))?;
    }
    let line = Line { number: l_line, text: l_raw };
    let lagrangian = match parse(l_text, &table) {
        Ok(e) => e,
        Err(ParseError::UnknownIdentifier { column, name }) if name == time.name() => {
            return Err(ModelError::TimeDependence {
                line: l_line,
                column: line.column_of(l_text) + column - 1,
                name,
            })
        }
        Err(e) => return Err(line.expression_error(l_text, e)),
    };

    // The full session table adds the evolution parameter and the momenta.
    if table.contains(time.name()) {
        return Err(ModelError::Duplicate { line: l_line, name: time.name().to_string() });
    }
    table.register(time.name(), SymbolKind::Parameter).map_err(dup(l_line))?;
    for q in coordinates.iter().chain(std::iter::once(&time)) {
        table
            .register(&momentum_name(q.name()), SymbolKind::Momentum)
            .map_err(dup(l_line))?;
    }

    let mut assumptions = Vec::new();
    for (number, column, w, relation, value) in pending_assumptions {
        if !table.contains(w) || table.kind(w) == Some(SymbolKind::Velocity) {
            return Err(ModelError::Undeclared { line: number, column, name: w.to_string() });
        }
        assumptions.push(Assumption::new(w, relation, value));
    }

    let expect_reduced = match pending_reference {
        None => None,
        Some((number, raw, rest)) => {
            let line = Line { number, text: raw };
            let e = parse(rest, &table).map_err(|e| line.expression_error(rest, e))?;
            if let Some(v) = e.symbols().into_iter().find(|s| table.kind(s.name()) == Some(SymbolKind::Velocity)) {
                return Err(line.error(
                    line.column_of(rest),
                    format!("reference Hamiltonian must not contain the velocity `{v}`"),
                ));
            }
            Some(e)
        }
    };

    Ok(Model {
        name,
        coordinates,
        time,
        constants,
        assumptions,
        lagrangian,
        expect_reduced,
        table,
    })
}

fn parse_value(line: &Line<'_>, w: &str) -> Result<f64, ModelError> {
    let e = parse_free(w).ok().and_then(|e| e.as_num().cloned());
    match e {
        Some(r) => Ok(crate::expr::rational_to_f64(&r)),
        None => Err(line.error(line.column_of(w), format!("`{w}` is not a decimal number"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_names() {
        assert_eq!(momentum_name("q1"), "p1");
        assert_eq!(momentum_name("x0"), "p0");
        assert_eq!(momentum_name("e"), "p_e");
        assert_eq!(momentum_name("tau"), "p_tau");
        assert_eq!(momentum_name("q"), "p_q");
        assert_eq!(momentum_name("qa"), "p_qa");
    }

    #[test]
    fn builtins_load() {
        let ms = builtin_models();
        assert_eq!(ms.len(), 3);
        assert_eq!(ms[0].coordinates.len(), 5);
        assert_eq!(ms[1].coordinates.len(), 2);
        assert_eq!(ms[1].lagrangian, parse_free("q1_d^2/(4*q2) - q2*(q1^2 + q2^2/3 - R^2)").unwrap());
    }

    #[test]
    fn punctured_plane_differs_in_two_signs() {
        let ms = builtin_models();
        let diff = ms[1].lagrangian.clone() - ms[2].lagrangian.clone();
        assert_eq!(diff, parse_free("-2/3*q2^3").unwrap());
    }

    #[test]
    fn undeclared_symbol_is_located() {
        let text = "coordinate q1 q2\nlagrangian q1_d^2 + q3\n";
        match parse_model(text, "m") {
            Err(ModelError::Undeclared { line, column, name }) => {
                assert_eq!((line, column, name.as_str()), (2, 21, "q3"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejections() {
        assert!(matches!(
            parse_model("coordinate q\ncoordinate q\nlagrangian q_d^2", "m"),
            Err(ModelError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            parse_model("coordinate q\nlagrangian q_d^2*t", "m"),
            Err(ModelError::TimeDependence { line: 2, column: 18, .. })
        ));
        assert!(matches!(
            parse_model("coordinate q\nlagrangian q_d^2\nname x", "m"),
            Err(ModelError::AfterLagrangian { line: 3 })
        ));
        assert!(matches!(parse_model("coordinate q\n", "m"), Err(ModelError::MissingLagrangian)));
        assert!(matches!(parse_model("lagrangian 1", "m"), Err(ModelError::NoCoordinates)));
        assert!(matches!(
            parse_model("coordinate q\nfoo 1\nlagrangian q_d^2", "m"),
            Err(ModelError::Syntax { line: 2, column: 1, .. })
        ));
        assert!(matches!(
            parse_model("coordinate q\nassume q >= 0\nlagrangian q_d^2", "m"),
            Err(ModelError::Syntax { line: 2, column: 10, .. })
        ));
        assert!(matches!(
            parse_model("coordinate q\nlagrangian q_d^^2", "m"),
            Err(ModelError::Syntax { line: 2, column: 16, .. })
        ));
    }

    #[test]
    fn save_round_trip() {
        for m in builtin_models() {
            let again = parse_model(&m.save(), "other").unwrap();
            assert_eq!(again, m);
        }
    }

    #[test]
    fn constants_can_be_overridden() {
        let mut m = builtin_model("disc").unwrap();
        m.set_constant("R", 3.0).unwrap();
        assert_eq!(m.constant_values()[&Symbol::new("R")], 3.0);
        assert!(m.set_constant("Q", 1.0).is_err());
    }
}
