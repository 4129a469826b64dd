//! Structural well-formedness checking.
//!
//! Validators never fail: every invariant violation becomes a [`Violation`] carrying a
//! path to the offending node and the production it breaks. An empty report means the
//! element is well formed against the given registry view.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotation::{is_valid_segment, Annotation, AnnotationBody, AnnotationStore, Style};
use crate::bundle::Bundle;
use crate::control::{ControlStructure, RewritingRule, Selector};
use crate::grammar::Production;
use crate::lookup::{signature_of, ConstructLookup, Overlay, Signature, SymbolShape};
use crate::operand::{Arity, Operand, OperatorConstruct, OperatorKind};
use crate::state::{FactPattern, State};
use crate::structure::{LayoutStructure, WebStructure};
use crate::value::Value;
use crate::Ident;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    EmptyWeb,
    DuplicateLayout,
    DanglingHyperlink,
    EmptyLayout,
    DuplicateVariable,
    NonFiniteCoordinate,
    InvalidConstant,
    EmptyApplication,
    UnknownOperator,
    ArityMismatch,
    KindMismatch,
    NotBoolean,
    EmptyBody,
    MissingResult,
    FunctionalBodyShape,
    DuplicateParameter,
    UnknownVariable,
    BodyNotInvocation,
    NoMutation,
    DuplicateOperator,
    NoActions,
    EmptyConnector,
    ConnectorArity,
    DuplicateRuleName,
    NoTargets,
    EmptyStyle,
    UnknownSymbol,
    SymbolShape,
    BadTargetPath,
    AnnotationCycle,
    DuplicateAnnotation,
    EmptyFact,
}

/// Slash-separated location of a node, e.g. `web:records/link:0`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodePath(pub Vec<String>);

impl NodePath {
    pub fn root(seg: impl Into<String>) -> Self {
        NodePath(vec![seg.into()])
    }

    pub fn child(&self, seg: impl fmt::Display) -> Self {
        let mut p = self.0.clone();
        p.push(seg.to_string());
        NodePath(p)
    }

    pub fn first(&self) -> Option<&str> {
        self.0.first().map(String::as_str)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: NodePath,
    pub kind: ViolationKind,
    pub production: Production,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} [{}]", self.path, self.message, self.production)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn kinds(&self) -> Vec<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }

    fn push(&mut self, path: &NodePath, kind: ViolationKind, production: Production, message: impl Into<String>) {
        self.violations.push(Violation { path: path.clone(), kind, production, message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Checker<'a> {
    lookup: &'a dyn ConstructLookup,
    report: ValidationReport,
}

pub fn validate_web_structure(ws: &WebStructure, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut c = Checker { lookup, report: ValidationReport::default() };
    c.web(ws, &NodePath::root(format!("web:{}", ws.name)));
    c.report
}

pub fn validate_layout_structure(layout: &LayoutStructure, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut c = Checker { lookup, report: ValidationReport::default() };
    c.layout(layout, &NodePath::root(format!("layout:{}", layout.name)));
    c.report
}

pub fn validate_control_structure(cs: &ControlStructure, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut c = Checker { lookup, report: ValidationReport::default() };
    c.control(cs, &NodePath::root("control"));
    c.report
}

pub fn validate_operand(op: &Operand, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut c = Checker { lookup, report: ValidationReport::default() };
    c.operand(op, &NodePath::root("operand"), None);
    c.report
}

pub fn validate_operator(def: &OperatorConstruct, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut c = Checker { lookup, report: ValidationReport::default() };
    c.operator(def, &NodePath::root(format!("operator:{}", def.name)));
    c.report
}

pub fn validate_annotation(a: &Annotation, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut c = Checker { lookup, report: ValidationReport::default() };
    c.annotation(a, &NodePath::root(format!("annotation:{}", a.id)));
    c.report
}

pub fn validate_state(state: &State) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (scope, entries) in &state.scopes {
        for (name, v) in entries {
            if let Err(e) = v.check() {
                report.push(&NodePath::root(format!("state:{scope}")).child(name), ViolationKind::InvalidConstant, Production::State, e.to_string());
            }
        }
    }
    report
}

/// Validates every element of a bundle. Operators declared in the bundle are visible to
/// later declarations, in declaration order.
pub fn validate_bundle(bundle: &Bundle, lookup: &dyn ConstructLookup) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen_ops = BTreeSet::new();
    for (i, def) in bundle.operators.iter().enumerate() {
        let path = NodePath::root(format!("operator:{}", def.name));
        let earlier = Overlay::new(lookup).with_operators(&bundle.operators[..i]);
        if lookup.signature(def.name.as_str()).is_some() || !seen_ops.insert(&def.name) {
            report.push(&path, ViolationKind::DuplicateOperator, Production::OperatorConstruct, format!("operator `{}` is already defined", def.name));
        }
        report.merge(validate_operator(def, &earlier));
    }
    let all = Overlay::new(lookup).with_operators(&bundle.operators);
    let mut c = Checker { lookup: &all, report };

    for n in &bundle.operands {
        c.operand(&n.operand, &NodePath::root(format!("operand:{}", n.name)), None);
    }
    for w in &bundle.webs {
        c.web(w, &NodePath::root(format!("web:{}", w.name)));
    }
    c.control_list(&bundle.controls, &NodePath::root("controls"));
    let mut ann_ids = BTreeSet::new();
    for a in &bundle.annotations {
        let path = NodePath::root(format!("annotation:{}", a.id));
        if !ann_ids.insert(&a.id) {
            c.report.push(&path, ViolationKind::DuplicateAnnotation, Production::Annotation, format!("duplicate annotation id `{}`", a.id));
        }
        c.annotation(a, &path);
    }
    if let Some(id) = annotation_cycle(&bundle.annotations) {
        c.report.push(
            &NodePath::root(format!("annotation:{id}")),
            ViolationKind::AnnotationCycle,
            Production::Target,
            format!("annotation `{id}` lies on a reference cycle"),
        );
    }
    for m in &bundle.mechanisms {
        let path = NodePath::root(format!("mechanism:{}", m.name));
        let rules: Vec<_> = m.rules.iter().cloned().map(ControlStructure::Rule).collect();
        c.control_list(&rules, &path);
    }
    for s in &bundle.states {
        for (name, v) in &s.entries {
            c.constant(v, &NodePath::root(format!("state:{}", s.scope)).child(name), Production::State);
        }
    }
    for e in &bundle.entities {
        let path = NodePath::root(format!("entity:{}", e.id));
        for (i, f) in e.memory.iter().enumerate() {
            c.fact(f, &path.child(format!("fact:{i}")));
        }
        // Exposed wrapper functions are actional operators within the entity's own rules.
        let own = e.wrapper.iter().fold(Overlay::new(c.lookup), |o, f| o.with_signature(f.name.clone(), Signature::actional(Arity::Exact(f.params.len()))));
        let mut inner = Checker { lookup: &own, report: std::mem::take(&mut c.report) };
        inner.control_list(&e.behavior, &path);
        c.report = inner.report;
    }
    for cm in &bundle.communities {
        let path = NodePath::root(format!("community:{}", cm.name));
        for (i, f) in cm.facts.iter().enumerate() {
            c.fact(&f.pairs, &path.child(format!("fact:{i}")));
        }
    }
    for comp in &bundle.components {
        let path = NodePath::root(format!("component:{}", comp.id));
        for (i, r) in comp.records.iter().enumerate() {
            c.constant(r, &path.child(format!("record:{i}")), Production::Constant);
        }
        c.control_list(&comp.behavior, &path);
    }
    c.report
}

/// First annotation id found on a reference cycle, if any.
pub fn annotation_cycle(annotations: &[Annotation]) -> Option<Ident> {
    // Insertion rejects the node that closes a cycle, whatever the insertion order.
    let mut store = AnnotationStore::new();
    for a in annotations {
        if store.get(a.id.as_str()).is_some() {
            continue;
        }
        if store.insert(a.clone()).is_err() {
            return Some(a.id.clone());
        }
    }
    None
}

impl Checker<'_> {
    fn web(&mut self, ws: &WebStructure, path: &NodePath) {
        if ws.layouts.is_empty() {
            self.report.push(path, ViolationKind::EmptyWeb, Production::WebStructure, "web structure holds no layout structure");
        }
        let mut names = BTreeSet::new();
        for l in &ws.layouts {
            let lp = path.child(format!("layout:{}", l.name));
            if !names.insert(&l.name) {
                self.report.push(&lp, ViolationKind::DuplicateLayout, Production::WebStructure, format!("duplicate layout structure `{}`", l.name));
            }
            self.layout(l, &lp);
        }
        for (i, link) in ws.links.iter().enumerate() {
            for end in [&link.from, &link.to] {
                if !names.contains(end) {
                    self.report.push(
                        &path.child(format!("link:{i}")),
                        ViolationKind::DanglingHyperlink,
                        Production::WebStructure,
                        format!("hyperlink endpoint `{end}` is not a layout structure of this web"),
                    );
                }
            }
        }
    }

    fn layout(&mut self, l: &LayoutStructure, path: &NodePath) {
        if l.objects.is_empty() {
            self.report.push(path, ViolationKind::EmptyLayout, Production::LayoutStructure, "layout structure holds no topological object");
        }
        for dup in l.duplicate_variables() {
            self.report.push(path, ViolationKind::DuplicateVariable, Production::LayoutStructure, format!("variable `{dup}` declared more than once"));
        }
        for (i, o) in l.objects.iter().enumerate() {
            let op = path.child(format!("object:{i}"));
            if o.coordinates.is_some_and(|c| !c.is_finite()) {
                self.report.push(&op, ViolationKind::NonFiniteCoordinate, Production::TopologicalObject, "coordinates must be finite");
            }
            self.operand(&o.operand, &op, None);
        }
    }

    fn constant(&mut self, v: &Value, path: &NodePath, production: Production) {
        if let Err(e) = v.check() {
            self.report.push(path, ViolationKind::InvalidConstant, production, e.to_string());
        }
    }

    fn fact(&mut self, pairs: &crate::bundle::Pairs, path: &NodePath) {
        if pairs.is_empty() {
            self.report.push(path, ViolationKind::EmptyFact, Production::OperandConstruct, "fact carries no attribute-value pair");
        }
        for (k, v) in pairs {
            self.constant(v, &path.child(k), Production::Constant);
        }
    }

    /// `params` is `Some` inside operator bodies: variables must then name a parameter.
    fn operand(&mut self, op: &Operand, path: &NodePath, params: Option<&[crate::operand::Param]>) {
        match op {
            Operand::Constant(v) => self.constant(v, path, Production::Constant),
            Operand::Variable(v) => {
                if let Some(ps) = params {
                    if !ps.iter().any(|p| p.name == v.name) {
                        self.report.push(path, ViolationKind::UnknownVariable, Production::OperatorConstruct, format!("`{}` is not a parameter", v.name));
                    }
                }
            }
            Operand::Application { operator, args } => {
                if args.is_empty() {
                    self.report.push(path, ViolationKind::EmptyApplication, Production::OperandConstruct, format!("`{operator}` applied to no operand"));
                }
                self.functional_use(operator, args.len(), path, Production::OperandConstruct);
                for (i, a) in args.iter().enumerate() {
                    self.operand(a, &path.child(format!("arg:{i}")), params);
                }
            }
        }
    }

    /// Checks that `operator` is a registered functional operator accepting `n` operands.
    fn functional_use(&mut self, operator: &Ident, n: usize, path: &NodePath, production: Production) -> Option<crate::lookup::Signature> {
        let Some(sig) = self.lookup.signature(operator.as_str()) else {
            self.report.push(path, ViolationKind::UnknownOperator, production, format!("unknown operator `{operator}`"));
            return None;
        };
        if sig.kind != OperatorKind::Functional {
            self.report.push(path, ViolationKind::KindMismatch, production, format!("actional operator `{operator}` used where a functional one is required"));
        }
        if !sig.arity.admits(n) {
            self.report.push(path, ViolationKind::ArityMismatch, production, format!("`{operator}` takes {} operand(s), got {n}", sig.arity));
        }
        Some(sig)
    }

    fn selector(&mut self, s: &Selector, path: &NodePath, production: Production) {
        match s {
            Selector::Entry(_) | Selector::Scope(_) => {}
            Selector::Match { pattern, .. } => self.pattern(pattern, path, production),
            Selector::Constant(v) => self.constant(v, path, Production::Constant),
            Selector::Apply { operator, args } => {
                self.functional_use(operator, args.len(), path, production);
                for (i, a) in args.iter().enumerate() {
                    self.selector(a, &path.child(format!("arg:{i}")), production);
                }
            }
        }
    }

    fn pattern(&mut self, p: &FactPattern, path: &NodePath, production: Production) {
        for (k, v) in &p.0 {
            if let Some(v) = v {
                self.constant(v, &path.child(k), production);
            }
        }
    }

    fn control_list(&mut self, items: &[ControlStructure], path: &NodePath) {
        let mut names = BTreeSet::new();
        for (i, cs) in items.iter().enumerate() {
            self.control_node(cs, &path.child(format!("child:{i}")), &mut names);
        }
    }

    fn control(&mut self, cs: &ControlStructure, path: &NodePath) {
        let mut names = BTreeSet::new();
        self.control_node(cs, path, &mut names);
    }

    fn control_node(&mut self, cs: &ControlStructure, path: &NodePath, names: &mut BTreeSet<Ident>) {
        match cs {
            ControlStructure::Rule(r) => {
                let rp = path.child(format!("rule:{}", r.name));
                if !names.insert(r.name.clone()) {
                    self.report.push(&rp, ViolationKind::DuplicateRuleName, Production::ControlStructure, format!("rule name `{}` used twice", r.name));
                }
                self.rule(r, &rp);
            }
            ControlStructure::Connector(c) => {
                let cp = path.child(format!("connector:{}", c.operator));
                if c.children.is_empty() {
                    self.report.push(&cp, ViolationKind::EmptyConnector, Production::Connector, "connector composes no rule");
                }
                match self.lookup.signature(c.operator.as_str()) {
                    None => {
                        self.report.push(&cp, ViolationKind::UnknownOperator, Production::Connector, format!("unknown connector operator `{}`", c.operator))
                    }
                    Some(sig) => {
                        if sig.kind != OperatorKind::Functional {
                            self.report.push(&cp, ViolationKind::KindMismatch, Production::Connector, format!("connector `{}` must be functional", c.operator));
                        } else if !sig.is_boolean_functional() {
                            self.report.push(
                                &cp,
                                ViolationKind::NotBoolean,
                                Production::Connector,
                                format!("connector `{}` must be boolean-valued", c.operator),
                            );
                        }
                        if !c.children.is_empty() && !sig.arity.admits(c.children.len()) {
                            self.report.push(
                                &cp,
                                ViolationKind::ConnectorArity,
                                Production::Connector,
                                format!("connector `{}` takes {} child(ren), got {}", c.operator, sig.arity, c.children.len()),
                            );
                        }
                    }
                }
                for (i, ch) in c.children.iter().enumerate() {
                    self.control_node(ch, &cp.child(format!("child:{i}")), names);
                }
            }
        }
    }

    fn rule(&mut self, r: &RewritingRule, path: &NodePath) {
        if r.actions.is_empty() {
            self.report.push(path, ViolationKind::NoActions, Production::RewritingRule, "rule has no action");
        }
        for (i, cond) in r.conditions.iter().enumerate() {
            let cp = path.child(format!("condition:{i}"));
            if let Some(sig) = self.functional_use(&cond.operator, cond.args.len(), &cp, Production::Condition) {
                if sig.kind == OperatorKind::Functional && !sig.is_boolean_functional() {
                    self.report.push(
                        &cp,
                        ViolationKind::NotBoolean,
                        Production::Condition,
                        format!("condition operator `{}` is not boolean-valued", cond.operator),
                    );
                }
            }
            for (j, a) in cond.args.iter().enumerate() {
                self.selector(a, &cp.child(format!("arg:{j}")), Production::Condition);
            }
        }
        for (i, act) in r.actions.iter().enumerate() {
            let ap = path.child(format!("action:{i}"));
            match self.lookup.signature(act.operator.as_str()) {
                None => self.report.push(&ap, ViolationKind::UnknownOperator, Production::Action, format!("unknown operator `{}`", act.operator)),
                Some(sig) => {
                    if sig.kind != OperatorKind::Actional {
                        self.report.push(
                            &ap,
                            ViolationKind::KindMismatch,
                            Production::Action,
                            format!("functional operator `{}` used as an action", act.operator),
                        );
                    }
                    if !sig.arity.admits(act.args.len()) {
                        self.report.push(
                            &ap,
                            ViolationKind::ArityMismatch,
                            Production::Action,
                            format!("`{}` takes {} operand(s), got {}", act.operator, sig.arity, act.args.len()),
                        );
                    }
                }
            }
            for (j, a) in act.args.iter().enumerate() {
                self.selector(a, &ap.child(format!("arg:{j}")), Production::Action);
            }
        }
    }

    fn operator(&mut self, def: &OperatorConstruct, path: &NodePath) {
        let p = Production::OperatorConstruct;
        if def.body.is_empty() {
            self.report.push(path, ViolationKind::EmptyBody, p, "operator body is empty");
        }
        for (i, param) in def.params.iter().enumerate() {
            if def.params[..i].iter().any(|q| q.name == param.name) {
                self.report.push(path, ViolationKind::DuplicateParameter, p, format!("parameter `{}` declared twice", param.name));
            }
        }
        match def.kind {
            OperatorKind::Functional => {
                if def.result.is_none() {
                    self.report.push(path, ViolationKind::MissingResult, p, "functional operator declares no result type");
                }
                if def.body.len() > 1 {
                    self.report.push(path, ViolationKind::FunctionalBodyShape, p, "functional operator body must be a single expression");
                }
                for (i, b) in def.body.iter().enumerate() {
                    self.operand(b, &path.child(format!("body:{i}")), Some(&def.params));
                }
            }
            OperatorKind::Actional => {
                for (i, inv) in def.body.iter().enumerate() {
                    let bp = path.child(format!("body:{i}"));
                    let Operand::Application { operator, args } = inv else {
                        self.report.push(&bp, ViolationKind::BodyNotInvocation, p, "actional body items must invoke an operator");
                        continue;
                    };
                    match self.lookup.signature(operator.as_str()) {
                        None => self.report.push(&bp, ViolationKind::UnknownOperator, p, format!("unknown operator `{operator}`")),
                        Some(sig) => {
                            if sig.kind != OperatorKind::Actional {
                                self.report.push(&bp, ViolationKind::KindMismatch, p, format!("functional operator `{operator}` invoked as an action"));
                            }
                            if !sig.arity.admits(args.len()) {
                                self.report.push(
                                    &bp,
                                    ViolationKind::ArityMismatch,
                                    p,
                                    format!("`{operator}` takes {} operand(s), got {}", sig.arity, args.len()),
                                );
                            }
                        }
                    }
                    for (j, a) in args.iter().enumerate() {
                        self.operand(a, &bp.child(format!("arg:{j}")), Some(&def.params));
                    }
                }
                if !def.body.is_empty() && !signature_of(def, self.lookup).mutates {
                    self.report.push(path, ViolationKind::NoMutation, p, "actional operator invokes no state-mutating primitive");
                }
            }
        }
    }

    fn annotation(&mut self, a: &Annotation, path: &NodePath) {
        if a.targets.is_empty() {
            self.report.push(path, ViolationKind::NoTargets, Production::Annotation, "annotation has no target reference");
        }
        match &a.body {
            AnnotationBody::Constant(v) => self.constant(v, &path.child("body"), Production::Constant),
            AnnotationBody::Style(Style::Symbols(symbols)) => {
                if symbols.is_empty() {
                    self.report.push(path, ViolationKind::EmptyStyle, Production::Style, "style carries no symbol");
                }
                for s in symbols {
                    match (self.lookup.symbol(s.name.as_str()), &s.arg) {
                        (None, _) => self.report.push(
                            path,
                            ViolationKind::UnknownSymbol,
                            Production::Style,
                            format!("`{}` is not a registered conventional symbol", s.name),
                        ),
                        (Some(SymbolShape::Bare), Some(_)) | (Some(SymbolShape::WithToken), None) => {
                            self.report.push(path, ViolationKind::SymbolShape, Production::Style, format!("symbol `{s}` has the wrong shape"))
                        }
                        _ => {}
                    }
                }
            }
            AnnotationBody::Style(Style::Operator(op)) => {
                self.functional_use(op, 1, &path.child("body"), Production::Style);
            }
        }
        for (i, t) in a.targets.iter().enumerate() {
            let tp = path.child(format!("target:{i}"));
            self.functional_use(&t.selector, 1, &tp, Production::TargetRef);
            if t.path.iter().any(|s| !is_valid_segment(s)) {
                self.report.push(&tp, ViolationKind::BadTargetPath, Production::Target, "target path segment is neither an identifier nor an index");
            }
        }
    }
}
