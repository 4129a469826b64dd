use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::operand::Operand;
use crate::Ident;

/// Cartesian pair in abstract layout units, relative to the enclosing layout's origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub x: f64,
    pub y: f64,
}

impl Coordinates {
    pub fn new(x: f64, y: f64) -> Result<Self, CoreError> {
        let c = Coordinates { x, y };
        if c.is_finite() {
            Ok(c)
        } else {
            Err(CoreError::NonFiniteCoordinate)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologicalObject {
    pub operand: Operand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Coordinates>,
}

impl TopologicalObject {
    pub fn new(operand: Operand, coordinates: Option<Coordinates>) -> Self {
        TopologicalObject { operand, coordinates }
    }
}

/// A named topological arrangement of operand constructs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutStructure {
    pub name: Ident,
    pub objects: Vec<TopologicalObject>,
}

impl LayoutStructure {
    pub fn new(name: Ident, objects: Vec<TopologicalObject>) -> Result<Self, CoreError> {
        let layout = LayoutStructure { name, objects };
        if layout.objects.is_empty() {
            return Err(CoreError::EmptyLayout(layout.name.to_string()));
        }
        if let Some(dup) = layout.duplicate_variables().into_iter().next() {
            return Err(CoreError::DuplicateVariable { layout: layout.name.to_string(), name: dup.to_string() });
        }
        if layout.objects.iter().any(|o| o.coordinates.is_some_and(|c| !c.is_finite())) {
            return Err(CoreError::NonFiniteCoordinate);
        }
        Ok(layout)
    }

    /// Variable names declared more than once anywhere in the layout.
    pub fn duplicate_variables(&self) -> BTreeSet<&Ident> {
        let mut seen = BTreeSet::new();
        let mut dups = BTreeSet::new();
        for obj in &self.objects {
            for v in obj.operand.variables() {
                if !seen.insert(&v.name) {
                    dups.insert(&v.name);
                }
            }
        }
        dups
    }

    /// Index of the first object that declares `name` as a variable.
    pub fn position_of_variable(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.operand.variables().iter().any(|v| v.name == name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperlink {
    pub from: Ident,
    pub to: Ident,
}

/// A graph of hyperlinked layout structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebStructure {
    pub name: Ident,
    pub layouts: Vec<LayoutStructure>,
    #[serde(default)]
    pub links: Vec<Hyperlink>,
}

impl WebStructure {
    pub fn new(name: Ident, layouts: Vec<LayoutStructure>, links: Vec<Hyperlink>) -> Result<Self, CoreError> {
        if layouts.is_empty() {
            return Err(CoreError::EmptyWeb);
        }
        let web = WebStructure { name, layouts, links };
        let mut names = BTreeSet::new();
        for l in &web.layouts {
            if !names.insert(&l.name) {
                return Err(CoreError::Duplicate { what: "layout structure", name: l.name.to_string() });
            }
        }
        for link in &web.links {
            if !names.contains(&link.from) || !names.contains(&link.to) {
                return Err(CoreError::DanglingLink { from: link.from.to_string(), to: link.to.to_string() });
            }
        }
        Ok(web)
    }

    pub fn single(layout: LayoutStructure) -> Self {
        WebStructure { name: layout.name.clone(), layouts: vec![layout], links: Vec::new() }
    }

    pub fn layout(&self, name: &str) -> Option<&LayoutStructure> {
        self.layouts.iter().find(|l| l.name == name)
    }
}
