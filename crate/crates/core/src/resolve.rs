use std::collections::BTreeSet;

use thiserror::Error;

use crate::annotation::{Annotation, TargetKind, TargetRef};
use crate::control::ControlStructure;
use crate::structure::{TopologicalObject, WebStructure};
use crate::Ident;

/// Everything a target reference may point into.
#[derive(Debug, Clone, Copy, Default)]
pub struct TargetSpace<'a> {
    pub webs: &'a [WebStructure],
    pub controls: &'a [ControlStructure],
    pub annotations: &'a [Annotation],
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedElement<'a> {
    ControlStructure { path: Vec<usize>, node: &'a ControlStructure },
    TopologicalObject { layout: &'a Ident, index: usize, object: &'a TopologicalObject },
    Annotation(&'a Annotation),
}

/// Result of resolving a reference: the addressed element, and the first non-annotation
/// element reached by following annotation targets (the anchor).
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution<'a> {
    pub element: ResolvedElement<'a>,
    pub anchor: ResolvedElement<'a>,
    /// Annotations traversed on the way to the anchor, outermost first.
    pub chain: Vec<&'a Ident>,
}

impl Resolution<'_> {
    pub fn hops(&self) -> usize {
        self.chain.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("target does not resolve: {0}")]
    Unresolved(String),
    #[error("annotation chain loops through `{0}`")]
    CycleDetected(String),
}

/// Resolves a reference. Annotation chains follow each annotation's first target.
pub fn resolve_target<'a>(r: &TargetRef, space: &TargetSpace<'a>) -> Result<Resolution<'a>, ResolveError> {
    let element = resolve_direct(r, space)?;
    let mut chain = Vec::new();
    let mut visited = BTreeSet::new();
    let mut current = element.clone();
    while let ResolvedElement::Annotation(a) = current {
        if !visited.insert(a.id.as_str()) {
            return Err(ResolveError::CycleDetected(a.id.to_string()));
        }
        chain.push(&a.id);
        let next = a.targets.first().ok_or_else(|| ResolveError::Unresolved(format!("annotation `{}` has no target", a.id)))?;
        current = resolve_direct(next, space)?;
    }
    Ok(Resolution { element, anchor: current, chain })
}

fn resolve_direct<'a>(r: &TargetRef, space: &TargetSpace<'a>) -> Result<ResolvedElement<'a>, ResolveError> {
    let unresolved = || ResolveError::Unresolved(format!("{} path `{}`", r.kind.keyword(), r.path.join("/")));
    if r.path.is_empty() {
        return Err(unresolved());
    }
    match r.kind {
        TargetKind::Annotation => match r.path.as_slice() {
            [id] => space.annotations.iter().find(|a| a.id == id.as_str()).map(ResolvedElement::Annotation).ok_or_else(unresolved),
            _ => Err(unresolved()),
        },
        TargetKind::TopologicalObject => {
            let (web, layout, obj) = match r.path.as_slice() {
                [layout, obj] => (None, layout, obj),
                [web, layout, obj] => (Some(web), layout, obj),
                _ => return Err(unresolved()),
            };
            let layout = space.webs.iter().filter(|w| web.is_none_or(|n| w.name == n.as_str())).find_map(|w| w.layout(layout)).ok_or_else(unresolved)?;
            let index = match obj.parse::<usize>() {
                Ok(i) => i,
                Err(_) => layout.position_of_variable(obj).ok_or_else(unresolved)?,
            };
            let object = layout.objects.get(index).ok_or_else(unresolved)?;
            Ok(ResolvedElement::TopologicalObject { layout: &layout.name, index, object })
        }
        TargetKind::ControlStructure => {
            let indices: Option<Vec<usize>> = r.path.iter().map(|s| s.parse().ok()).collect();
            match (indices, r.path.as_slice()) {
                (Some(idx), _) => {
                    let (first, rest) = idx.split_first().ok_or_else(unresolved)?;
                    let node = space.controls.get(*first).and_then(|c| c.at_path(rest)).ok_or_else(unresolved)?;
                    Ok(ResolvedElement::ControlStructure { path: idx, node })
                }
                (None, [name]) => find_rule(space.controls, name).ok_or_else(unresolved),
                _ => Err(unresolved()),
            }
        }
    }
}

fn find_rule<'a>(controls: &'a [ControlStructure], name: &str) -> Option<ResolvedElement<'a>> {
    fn walk<'a>(node: &'a ControlStructure, path: &mut Vec<usize>, name: &str) -> Option<ResolvedElement<'a>> {
        match node {
            ControlStructure::Rule(r) if r.name == name => Some(ResolvedElement::ControlStructure { path: path.clone(), node }),
            ControlStructure::Rule(_) => None,
            ControlStructure::Connector(c) => c.children.iter().enumerate().find_map(|(i, ch)| {
                path.push(i);
                let found = walk(ch, path, name);
                path.pop();
                found
            }),
        }
    }
    controls.iter().enumerate().find_map(|(i, c)| walk(c, &mut vec![i], name))
}
