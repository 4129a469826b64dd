use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::StateRef;
use crate::value::Value;
use crate::{ident, Ident};

/// Attribute pattern over record facts. `None` is a wildcard that only requires the
/// attribute to be present; attributes absent from the pattern are unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactPattern(pub BTreeMap<Ident, Option<Value>>);

impl FactPattern {
    pub fn new() -> Self {
        FactPattern::default()
    }

    pub fn with(mut self, attr: Ident, value: Option<Value>) -> Self {
        self.0.insert(attr, value);
        self
    }

    pub fn matches(&self, value: &Value) -> bool {
        let Some(fields) = value.as_record() else {
            return false;
        };
        self.0.iter().all(|(attr, want)| match (fields.get(attr), want) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(have), Some(want)) => have == want,
        })
    }
}

/// Application state: ground values partitioned by scope, unique names within a scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub default_scope: Ident,
    #[serde(default)]
    pub scopes: BTreeMap<Ident, BTreeMap<Ident, Value>>,
}

impl Default for State {
    fn default() -> Self {
        State::new(ident!("app"))
    }
}

/// One entry-level change made by an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateDelta {
    Set { scope: Ident, name: Ident, old: Option<Value>, new: Value },
    Removed { scope: Ident, name: Ident, old: Value },
}

impl StateDelta {
    pub fn scope(&self) -> &Ident {
        match self {
            StateDelta::Set { scope, .. } | StateDelta::Removed { scope, .. } => scope,
        }
    }

    pub fn name(&self) -> &Ident {
        match self {
            StateDelta::Set { name, .. } | StateDelta::Removed { name, .. } => name,
        }
    }
}

impl State {
    pub fn new(default_scope: Ident) -> Self {
        State { default_scope, scopes: BTreeMap::new() }
    }

    pub fn scope_of<'a>(&'a self, r: &'a StateRef) -> &'a Ident {
        r.scope.as_ref().unwrap_or(&self.default_scope)
    }

    pub fn get(&self, r: &StateRef) -> Option<&Value> {
        self.lookup(self.scope_of(r).as_str(), r.name.as_str())
    }

    pub fn lookup(&self, scope: &str, name: &str) -> Option<&Value> {
        self.scopes.get(scope)?.get(name)
    }

    pub fn scope(&self, scope: &str) -> Option<&BTreeMap<Ident, Value>> {
        self.scopes.get(scope)
    }

    /// Every scope with its entries, in name order.
    pub fn scopes(&self) -> impl Iterator<Item = (&Ident, &BTreeMap<Ident, Value>)> {
        self.scopes.iter()
    }

    /// Values of a scope in name order; an unknown scope is empty.
    pub fn scope_values(&self, scope: &str) -> Vec<Value> {
        self.scopes.get(scope).map(|m| m.values().cloned().collect()).unwrap_or_default()
    }

    pub fn matching(&self, scope: &str, pattern: &FactPattern) -> Vec<Value> {
        self.scopes.get(scope).map(|m| m.values().filter(|v| pattern.matches(v)).cloned().collect()).unwrap_or_default()
    }

    pub fn set(&mut self, scope: Ident, name: Ident, value: Value) -> StateDelta {
        let old = self.scopes.entry(scope.clone()).or_default().insert(name.clone(), value.clone());
        StateDelta::Set { scope, name, old, new: value }
    }

    pub fn remove(&mut self, scope: &Ident, name: &Ident) -> Option<StateDelta> {
        let entries = self.scopes.get_mut(scope)?;
        let old = entries.remove(name)?;
        if entries.is_empty() {
            self.scopes.remove(scope);
        }
        Some(StateDelta::Removed { scope: scope.clone(), name: name.clone(), old })
    }

    /// Adds a value under a fresh generated name (multiset semantics).
    pub fn append(&mut self, scope: Ident, value: Value) -> StateDelta {
        let name = self.fresh_name(scope.as_str());
        self.set(scope, name, value)
    }

    pub fn fresh_name(&self, scope: &str) -> Ident {
        let next = self.scopes.get(scope).map(|m| m.keys().filter_map(|k| entry_index(k.as_str())).max().map_or(1, |n| n + 1)).unwrap_or(1);
        entry_name(next)
    }

    /// Replays a delta. Replay is unconditional: it does not check `old`.
    pub fn apply(&mut self, delta: &StateDelta) {
        match delta {
            StateDelta::Set { scope, name, new, .. } => {
                self.scopes.entry(scope.clone()).or_default().insert(name.clone(), new.clone());
            }
            StateDelta::Removed { scope, name, .. } => {
                self.remove(scope, name);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.scopes.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every entry is a checked constant (finite decimals, non-empty media).
    pub fn is_ground(&self) -> bool {
        self.scopes.values().flat_map(BTreeMap::values).all(|v| v.check().is_ok())
    }
}

/// Generated entry names sort in creation order: `e-000001`, `e-000002`, ...
pub fn entry_name(index: u64) -> Ident {
    Ident::new(format!("e-{index:06}")).expect("generated entry name is an identifier")
}

pub fn entry_index(name: &str) -> Option<u64> {
    name.strip_prefix("e-").and_then(|n| n.parse().ok())
}
