use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::ident::is_valid_ident;
use crate::value::Value;
use crate::Ident;

/// A token from the conventional-symbol vocabulary, e.g. `highlight` or `color(red)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConventionalSymbol {
    pub name: Ident,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg: Option<Ident>,
}

impl ConventionalSymbol {
    pub fn plain(name: Ident) -> Self {
        ConventionalSymbol { name, arg: None }
    }
}

impl std::fmt::Display for ConventionalSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.arg {
            Some(a) => write!(f, "{}({a})", self.name),
            None => write!(f, "{}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Symbols(Vec<ConventionalSymbol>),
    /// A functional operator applied to the annotated element.
    Operator(Ident),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnotationBody {
    Style(Style),
    Constant(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    ControlStructure,
    TopologicalObject,
    Annotation,
}

impl TargetKind {
    pub fn keyword(self) -> &'static str {
        match self {
            TargetKind::ControlStructure => "control",
            TargetKind::TopologicalObject => "object",
            TargetKind::Annotation => "annotation",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        [TargetKind::ControlStructure, TargetKind::TopologicalObject, TargetKind::Annotation].into_iter().find(|k| k.keyword() == s)
    }
}

/// Anchors an annotation: a functional selector applied to a target path.
///
/// Paths are `/`-separated segments, each an identifier or a decimal index:
/// - control structure: `<rule-name>` or child indices from the top-level list, e.g. `0/1`
/// - topological object: `<layout>/<index>` or `<layout>/<variable-name>`
/// - annotation: `<annotation-id>`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRef {
    pub selector: Ident,
    pub kind: TargetKind,
    #[serde(default)]
    pub path: Vec<String>,
}

pub fn is_valid_segment(s: &str) -> bool {
    is_valid_ident(s) || (!s.is_empty() && s.len() <= 18 && s.bytes().all(|b| b.is_ascii_digit()))
}

impl TargetRef {
    pub fn new(selector: Ident, kind: TargetKind, path: Vec<String>) -> Result<Self, CoreError> {
        if let Some(bad) = path.iter().find(|s| !is_valid_segment(s)) {
            return Err(CoreError::InvalidIdent(bad.clone()));
        }
        Ok(TargetRef { selector, kind, path })
    }

    pub fn to_annotation(selector: Ident, id: &Ident) -> Self {
        TargetRef { selector, kind: TargetKind::Annotation, path: vec![id.to_string()] }
    }

    /// Annotation id addressed by this reference, if it points at an annotation.
    pub fn annotation_id(&self) -> Option<&str> {
        match (self.kind, self.path.as_slice()) {
            (TargetKind::Annotation, [id]) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: Ident,
    pub body: AnnotationBody,
    pub targets: Vec<TargetRef>,
    pub author: String,
    pub timestamp: DateTime<Utc>,
}

impl Annotation {
    pub fn new(id: Ident, body: AnnotationBody, targets: Vec<TargetRef>, author: impl Into<String>, timestamp: DateTime<Utc>) -> Result<Self, CoreError> {
        if targets.is_empty() {
            return Err(CoreError::NoTargets(id.to_string()));
        }
        match &body {
            AnnotationBody::Style(Style::Symbols(s)) if s.is_empty() => return Err(CoreError::EmptyStyle),
            AnnotationBody::Constant(v) => v.check()?,
            _ => {}
        }
        Ok(Annotation { id, body, targets, author: author.into(), timestamp })
    }
}

/// Annotations in insertion order. The annotation-to-annotation reference graph is
/// kept acyclic: inserts that would close a cycle are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationStore {
    annotations: Vec<Annotation>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        AnnotationStore::default()
    }

    pub fn from_annotations(items: impl IntoIterator<Item = Annotation>) -> Result<Self, CoreError> {
        let mut store = AnnotationStore::new();
        for a in items {
            store.insert(a)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, annotation: Annotation) -> Result<(), CoreError> {
        if self.get(annotation.id.as_str()).is_some() {
            return Err(CoreError::Duplicate { what: "annotation", name: annotation.id.to_string() });
        }
        // A cycle through the new node must return to its own id.
        let mut stack: Vec<&str> = annotation.targets.iter().filter_map(TargetRef::annotation_id).collect();
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if id == annotation.id.as_str() {
                return Err(CoreError::AnnotationCycle(annotation.id.to_string()));
            }
            if !seen.insert(id) {
                continue;
            }
            if let Some(next) = self.get(id) {
                stack.extend(next.targets.iter().filter_map(TargetRef::annotation_id));
            }
        }
        self.annotations.push(annotation);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter()
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn as_slice(&self) -> &[Annotation] {
        &self.annotations
    }

    /// Annotations ordered so that every annotation comes after the annotations it targets.
    pub fn topological_order(&self) -> Vec<&Annotation> {
        let by_id: BTreeMap<&str, &Annotation> = self.annotations.iter().map(|a| (a.id.as_str(), a)).collect();
        let mut done = BTreeSet::new();
        let mut out = Vec::with_capacity(self.annotations.len());
        fn visit<'a>(a: &'a Annotation, by_id: &BTreeMap<&str, &'a Annotation>, done: &mut BTreeSet<&'a str>, out: &mut Vec<&'a Annotation>) {
            if !done.insert(a.id.as_str()) {
                return;
            }
            for t in a.targets.iter().filter_map(TargetRef::annotation_id) {
                if let Some(next) = by_id.get(t) {
                    visit(next, by_id, done, out);
                }
            }
            out.push(a);
        }
        for a in &self.annotations {
            visit(a, &by_id, &mut done, &mut out);
        }
        out
    }
}
