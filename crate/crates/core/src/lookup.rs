//! Read-only view of the construct registry used by validation.
//!
//! The engine owns the concrete registry; validation only needs operator signatures and
//! the conventional-symbol vocabulary, so it works against this trait.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::operand::{Arity, OperatorConstruct, OperatorKind};
use crate::value::TypeTag;
use crate::Ident;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub kind: OperatorKind,
    pub arity: Arity,
    /// Result type of a functional operator; `None` when it depends on the operands.
    pub result: Option<TypeTag>,
    /// Whether invoking the operator can change state.
    pub mutates: bool,
}

impl Signature {
    pub fn functional(arity: Arity, result: Option<TypeTag>) -> Self {
        Signature { kind: OperatorKind::Functional, arity, result, mutates: false }
    }

    pub fn actional(arity: Arity) -> Self {
        Signature { kind: OperatorKind::Actional, arity, result: None, mutates: true }
    }

    pub fn is_boolean_functional(&self) -> bool {
        self.kind == OperatorKind::Functional && self.result == Some(TypeTag::Boolean)
    }
}

/// Shape of a conventional symbol: bare (`highlight`) or with one token (`color(red)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolShape {
    Bare,
    WithToken,
}

pub trait ConstructLookup {
    fn signature(&self, name: &str) -> Option<Signature>;
    fn symbol(&self, name: &str) -> Option<SymbolShape>;
}

impl<T: ConstructLookup + ?Sized> ConstructLookup for &T {
    fn signature(&self, name: &str) -> Option<Signature> {
        (**self).signature(name)
    }
    fn symbol(&self, name: &str) -> Option<SymbolShape> {
        (**self).symbol(name)
    }
}

/// The seed conventional-symbol vocabulary.
pub fn seed_symbols() -> BTreeMap<Ident, SymbolShape> {
    [("highlight", SymbolShape::Bare), ("strike", SymbolShape::Bare), ("frame", SymbolShape::Bare), ("color", SymbolShape::WithToken)]
        .into_iter()
        .map(|(n, s)| (Ident::new(n).expect("seed symbol"), s))
        .collect()
}

/// A plain signature table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignatureTable {
    pub operators: BTreeMap<Ident, Signature>,
    pub symbols: BTreeMap<Ident, SymbolShape>,
}

impl SignatureTable {
    pub fn new() -> Self {
        SignatureTable { operators: BTreeMap::new(), symbols: seed_symbols() }
    }

    pub fn with(mut self, name: &str, sig: Signature) -> Self {
        self.operators.insert(Ident::new(name).expect("operator name"), sig);
        self
    }
}

impl ConstructLookup for SignatureTable {
    fn signature(&self, name: &str) -> Option<Signature> {
        self.operators.get(name).copied()
    }
    fn symbol(&self, name: &str) -> Option<SymbolShape> {
        self.symbols.get(name).copied()
    }
}

/// Signature an operator construct will have once registered.
pub fn signature_of(def: &OperatorConstruct, lookup: &dyn ConstructLookup) -> Signature {
    let mutates = def.kind == OperatorKind::Actional
        && def.body.iter().any(|inv| match inv {
            crate::Operand::Application { operator, .. } => lookup.signature(operator.as_str()).is_some_and(|s| s.mutates),
            _ => false,
        });
    Signature { kind: def.kind, arity: def.arity(), result: def.result, mutates }
}

/// A lookup layered over another: operators defined in a bundle on top of the registry.
pub struct Overlay<'a> {
    base: &'a dyn ConstructLookup,
    extra: BTreeMap<Ident, Signature>,
}

impl<'a> Overlay<'a> {
    pub fn new(base: &'a dyn ConstructLookup) -> Self {
        Overlay { base, extra: BTreeMap::new() }
    }

    /// Adds operators in definition order; later definitions may use earlier ones.
    pub fn with_operators<'b>(mut self, defs: impl IntoIterator<Item = &'b OperatorConstruct>) -> Self {
        for def in defs {
            let sig = signature_of(def, &self);
            self.extra.entry(def.name.clone()).or_insert(sig);
        }
        self
    }

    /// Adds one operator by signature; names the base already knows keep their meaning.
    pub fn with_signature(mut self, name: Ident, sig: Signature) -> Self {
        self.extra.entry(name).or_insert(sig);
        self
    }
}

impl ConstructLookup for Overlay<'_> {
    fn signature(&self, name: &str) -> Option<Signature> {
        self.base.signature(name).or_else(|| self.extra.get(name).copied())
    }
    fn symbol(&self, name: &str) -> Option<SymbolShape> {
        self.base.symbol(name)
    }
}
