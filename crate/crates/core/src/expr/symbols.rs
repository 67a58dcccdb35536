use indexmap::IndexMap;
use serde::Serialize;

use super::Symbol;

/// Suffix that turns a coordinate name into its velocity name (`q1` -> `q1_d`).
pub const VELOCITY_SUFFIX: &str = "_d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Coordinate,
    Velocity,
    Momentum,
    Parameter,
    Constant,
    Action,
}

/// Registry of every symbol a session may use, in registration order.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    entries: IndexMap<String, SymbolKind>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("symbol `{name}` is already registered as {existing:?}")]
pub struct DuplicateSymbol {
    pub name: String,
    pub existing: SymbolKind,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, kind: SymbolKind) -> Result<Symbol, DuplicateSymbol> {
        if let Some(&existing) = self.entries.get(name) {
            return Err(DuplicateSymbol { name: name.to_string(), existing });
        }
        self.entries.insert(name.to_string(), kind);
        Ok(Symbol::new(name))
    }

    /// Register a coordinate together with its velocity.
    pub fn register_coordinate(&mut self, name: &str) -> Result<Symbol, DuplicateSymbol> {
        let s = self.register(name, SymbolKind::Coordinate)?;
        self.register(&velocity_name(name), SymbolKind::Velocity)?;
        Ok(s)
    }

    pub fn kind(&self, name: &str) -> Option<SymbolKind> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn of_kind(&self, kind: SymbolKind) -> Vec<Symbol> {
        self.entries
            .iter()
            .filter(|(_, k)| **k == kind)
            .map(|(n, _)| Symbol::new(n))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SymbolKind)> {
        self.entries.iter().map(|(n, k)| (n.as_str(), *k))
    }
}

pub fn velocity_name(coordinate: &str) -> String {
    format!("{coordinate}{VELOCITY_SUFFIX}")
}
