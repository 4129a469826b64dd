//! Active documents.
//!
//! A datom is a named, typed writable area; composites group two or more datoms. A
//! template places datoms at coordinates (a placed datom is a didget). A [`Document`]
//! instantiates a template: it holds one value per leaf datom, an append-only fill
//! history, style overlays and annotations, and re-runs the template's mechanisms to
//! quiescence after every fill.

mod document;
mod ops;

use std::collections::{BTreeMap, BTreeSet};

use lob_core::bundle::{MechanismDecl, NamedOperand};
use lob_core::{Bundle, Coordinates, Ident, LayoutStructure, Operand, Selector, TopologicalObject, TypeTag, ValidationReport, WebStructure};
use lob_engine::{EngineError, EvalError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{replay_history, Document, DocumentSnapshot, FillEvent, FillOutcome};
pub use ops::{install, registry, ACTIONAL_SUITE, TRACE_ONLY};

/// Scope holding a document's values, one entry per leaf datom.
pub const DOC: &str = "doc";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WoadError {
    #[error("datom `{0}` is already defined")]
    DuplicateDatom(String),
    #[error("composite datom `{0}` needs at least two children")]
    TooFewChildren(String),
    #[error("unknown datom `{0}`")]
    UnknownDatom(String),
    #[error("leaf datom `{leaf}` would appear twice in `{within}`")]
    SharedLeaf { within: String, leaf: String },
    #[error("template `{0}` places no didget")]
    EmptyTemplate(String),
    #[error("coordinates must be finite")]
    NonFiniteCoordinates,
    #[error("template `{template}` has no didget `{didget}`")]
    UnknownDidget { template: String, didget: String },
    #[error("`{didget}` holds {expected} values, got {found}")]
    TypeMismatch { didget: String, expected: TypeTag, found: TypeTag },
    #[error("`{0}` is protected")]
    Protected(String),
    #[error("mechanism `{mechanism}` is bound to `{bound}`, not `{template}`")]
    WrongTemplate { mechanism: String, bound: String, template: String },
    #[error("rule `{rule}` of mechanism `{mechanism}` reads `{read}`, which is not a datom of the template")]
    ForeignRead { mechanism: String, rule: String, read: String },
    #[error("mechanism `{mechanism}` is malformed:\n{report}")]
    InvalidMechanism { mechanism: String, report: ValidationReport },
    #[error("operand `{0}` does not describe a datom")]
    NotADatom(String),
    #[error("layout `{0}` is not a template: every object must be a placed datom")]
    NotATemplate(String),
    #[error(transparent)]
    Core(#[from] lob_core::CoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datom {
    pub name: Ident,
    /// `record` for composites.
    pub ty: TypeTag,
    /// Child datom names; empty for a leaf.
    #[serde(default)]
    pub children: Vec<Ident>,
}

impl Datom {
    pub fn is_composite(&self) -> bool {
        !self.children.is_empty()
    }
}

/// Every datom known to a workspace, names unique, in definition order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatomRegistry {
    datoms: Vec<Datom>,
}

impl DatomRegistry {
    pub fn new() -> Self {
        DatomRegistry::default()
    }

    pub fn get(&self, name: &str) -> Option<&Datom> {
        self.datoms.iter().find(|d| d.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Datom> {
        self.datoms.iter()
    }

    fn fresh(&self, name: &Ident) -> Result<(), WoadError> {
        match self.get(name.as_str()) {
            Some(_) => Err(WoadError::DuplicateDatom(name.to_string())),
            None => Ok(()),
        }
    }

    pub fn define(&mut self, name: Ident, ty: TypeTag) -> Result<&Datom, WoadError> {
        self.fresh(&name)?;
        self.datoms.push(Datom { name, ty, children: Vec::new() });
        Ok(self.datoms.last().expect("just pushed"))
    }

    /// A composite over registered children. Composites may nest, but no leaf may be
    /// reached twice.
    pub fn compose(&mut self, name: Ident, children: Vec<Ident>) -> Result<&Datom, WoadError> {
        self.fresh(&name)?;
        if children.len() < 2 {
            return Err(WoadError::TooFewChildren(name.to_string()));
        }
        let mut seen = BTreeSet::new();
        for c in &children {
            for leaf in self.leaves(c.as_str())? {
                if !seen.insert(leaf.clone()) {
                    return Err(WoadError::SharedLeaf { within: name.to_string(), leaf: leaf.to_string() });
                }
            }
        }
        self.datoms.push(Datom { name, ty: TypeTag::Record, children });
        Ok(self.datoms.last().expect("just pushed"))
    }

    /// Leaf writable areas under a datom, depth first.
    pub fn leaves(&self, name: &str) -> Result<Vec<Ident>, WoadError> {
        let d = self.get(name).ok_or_else(|| WoadError::UnknownDatom(name.into()))?;
        if !d.is_composite() {
            return Ok(vec![d.name.clone()]);
        }
        let mut out = Vec::new();
        for c in &d.children {
            out.extend(self.leaves(c.as_str())?);
        }
        Ok(out)
    }

    /// The datom as a standalone operand: a typed variable for a leaf, an `aggregate` of
    /// its children for a composite.
    pub fn operand(&self, name: &str) -> Result<Operand, WoadError> {
        let d = self.get(name).ok_or_else(|| WoadError::UnknownDatom(name.into()))?;
        if !d.is_composite() {
            return Ok(Operand::var(d.name.clone(), d.ty));
        }
        let args = d
            .children
            .iter()
            .map(|c| self.get(c.as_str()).map(|cd| Operand::var(cd.name.clone(), cd.ty)).ok_or_else(|| WoadError::UnknownDatom(c.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Operand::Application { operator: Ident::new("aggregate").expect("ident"), args })
    }

    pub fn to_operands(&self) -> Vec<NamedOperand> {
        self.datoms.iter().map(|d| NamedOperand { name: d.name.clone(), operand: self.operand(d.name.as_str()).expect("registered datom") }).collect()
    }

    /// Reads back what [`DatomRegistry::to_operands`] writes. Operands of any other shape
    /// are skipped unless `strict`.
    pub fn from_operands(operands: &[NamedOperand], strict: bool) -> Result<Self, WoadError> {
        let mut reg = DatomRegistry::new();
        for n in operands {
            match &n.operand {
                Operand::Variable(v) if v.name == n.name => {
                    reg.define(n.name.clone(), v.ty)?;
                }
                Operand::Application { operator, args } if operator == "aggregate" && args.iter().all(|a| matches!(a, Operand::Variable(_))) => {
                    let children = args.iter().filter_map(|a| a.variables().first().map(|v| v.name.clone())).collect();
                    reg.compose(n.name.clone(), children)?;
                }
                _ if strict => return Err(WoadError::NotADatom(n.name.to_string())),
                _ => {}
            }
        }
        Ok(reg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Didget {
    pub datom: Ident,
    pub at: Coordinates,
}

/// A set of didgets. Datoms are placed at most once and no two didgets share a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub name: Ident,
    pub didgets: Vec<Didget>,
}

impl Template {
    pub fn new(name: Ident, placements: Vec<(Ident, Coordinates)>, datoms: &DatomRegistry) -> Result<Self, WoadError> {
        if placements.is_empty() {
            return Err(WoadError::EmptyTemplate(name.to_string()));
        }
        let mut leaves = BTreeSet::new();
        for (d, at) in &placements {
            if !at.is_finite() {
                return Err(WoadError::NonFiniteCoordinates);
            }
            for leaf in datoms.leaves(d.as_str())? {
                if !leaves.insert(leaf.clone()) {
                    return Err(WoadError::SharedLeaf { within: name.to_string(), leaf: leaf.to_string() });
                }
            }
        }
        Ok(Template { name, didgets: placements.into_iter().map(|(datom, at)| Didget { datom, at }).collect() })
    }

    pub fn placement(&self, datom: &str) -> Option<Coordinates> {
        self.didgets.iter().find(|d| d.datom == datom).map(|d| d.at)
    }

    /// Leaf writable areas of the whole template, in placement order.
    pub fn leaves(&self, datoms: &DatomRegistry) -> Result<Vec<Ident>, WoadError> {
        let mut out = Vec::new();
        for d in &self.didgets {
            out.extend(datoms.leaves(d.datom.as_str())?);
        }
        Ok(out)
    }

    pub fn to_layout(&self, datoms: &DatomRegistry) -> Result<LayoutStructure, WoadError> {
        let objects = self
            .didgets
            .iter()
            .map(|d| {
                let datom = datoms.get(d.datom.as_str()).ok_or_else(|| WoadError::UnknownDatom(d.datom.to_string()))?;
                Ok(TopologicalObject::new(Operand::var(datom.name.clone(), datom.ty), Some(d.at)))
            })
            .collect::<Result<Vec<_>, WoadError>>()?;
        LayoutStructure::new(self.name.clone(), objects).map_err(|_| WoadError::EmptyTemplate(self.name.to_string()))
    }

    pub fn from_layout(layout: &LayoutStructure, datoms: &DatomRegistry) -> Result<Self, WoadError> {
        let placements = layout
            .objects
            .iter()
            .map(|o| match (&o.operand, o.coordinates) {
                (Operand::Variable(v), Some(at)) if datoms.get(v.name.as_str()).is_some_and(|d| d.ty == v.ty) => Ok((v.name.clone(), at)),
                _ => Err(WoadError::NotATemplate(layout.name.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Template::new(layout.name.clone(), placements, datoms)
    }
}

/// Checks that a mechanism is bound to `template` and that its conditions read only the
/// template's leaf datoms (and constants).
pub fn check_mechanism(m: &MechanismDecl, template: &Template, datoms: &DatomRegistry) -> Result<(), WoadError> {
    if m.template != template.name {
        return Err(WoadError::WrongTemplate { mechanism: m.name.to_string(), bound: m.template.to_string(), template: template.name.to_string() });
    }
    let leaves: BTreeSet<Ident> = template.leaves(datoms)?.into_iter().collect();
    for rule in &m.rules {
        for read in rule.condition_reads() {
            let ok = match read {
                Selector::Entry(r) => r.scope.as_ref().is_none_or(|s| s == DOC) && leaves.contains(&r.name),
                Selector::Scope(s) | Selector::Match { scope: s, .. } => s == DOC,
                _ => true,
            };
            if !ok {
                return Err(WoadError::ForeignRead { mechanism: m.name.to_string(), rule: rule.name.to_string(), read: lob_engine::effects::describe(read) });
            }
        }
    }
    Ok(())
}

/// Datoms, one template and its mechanisms as an interchange bundle.
pub fn to_bundle(datoms: &DatomRegistry, template: &Template, mechanisms: &[MechanismDecl]) -> Result<Bundle, WoadError> {
    Ok(Bundle {
        operands: datoms.to_operands(),
        webs: vec![WebStructure::single(template.to_layout(datoms)?)],
        mechanisms: mechanisms.to_vec(),
        ..Bundle::default()
    })
}

/// Every datom, template and mechanism a bundle declares. Layouts that are not made of
/// placed datoms are skipped.
pub fn from_bundle(bundle: &Bundle) -> Result<(DatomRegistry, Vec<Template>, Vec<MechanismDecl>), WoadError> {
    let datoms = DatomRegistry::from_operands(&bundle.operands, false)?;
    let templates = bundle.webs.iter().flat_map(|w| &w.layouts).filter_map(|l| Template::from_layout(l, &datoms).ok()).collect::<Vec<_>>();
    Ok((datoms, templates, bundle.mechanisms.clone()))
}

/// Leaf values as nested records, for reading a composite datom as one value.
pub fn datom_value(datoms: &DatomRegistry, name: &str, values: &BTreeMap<Ident, lob_core::Value>) -> Option<lob_core::Value> {
    let d = datoms.get(name)?;
    if !d.is_composite() {
        return values.get(&d.name).cloned();
    }
    let fields = d.children.iter().filter_map(|c| datom_value(datoms, c.as_str(), values).map(|v| (c.clone(), v))).collect();
    Some(lob_core::Value::Record(fields))
}
