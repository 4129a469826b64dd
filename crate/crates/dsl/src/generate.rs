//! Random well-formed bundles, for round-trip and fuzz testing.
//!
//! Every bundle uses only the seed vocabulary listed in [`VOCABULARY`] plus operators it
//! declares itself, so it validates against any registry that provides those names.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use lob_core::bundle::{
    ArcDecl, CommunityDecl, ComponentDecl, ComponentKind, EntityDecl, MechanismDecl, NamedOperand, Pairs, PostedFact, StateDecl, WorkspaceDecl, WrapperFn,
};
use lob_core::{
    Action, Annotation, AnnotationBody, Arity, Bundle, Condition, Connector, ControlStructure, ConventionalSymbol, Coordinates, FactPattern, Hyperlink, Ident,
    LayoutStructure, MediaRef, Operand, OperatorConstruct, OperatorKind, Param, Production, RewritingRule, Selector, Signature, SignatureTable, StateRef,
    Style, TargetKind, TargetRef, TopologicalObject, TypeTag, Value, WebStructure,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed operators a generated bundle may invoke: name, minimum arity, variadic, actional.
pub const VOCABULARY: [(&str, usize, bool, bool); 14] = [
    ("add", 2, false, false),
    ("sub", 2, false, false),
    ("mul", 2, false, false),
    ("eq", 2, false, false),
    ("lt", 2, false, false),
    ("not", 1, false, false),
    ("and", 1, true, false),
    ("or", 1, true, false),
    ("nand", 1, true, false),
    ("nor", 1, true, false),
    ("is-true", 1, false, false),
    ("put", 2, false, true),
    ("retract", 1, false, true),
    ("annotate", 2, false, true),
];

/// Signatures for [`VOCABULARY`], for validating generated bundles without an engine.
pub fn vocabulary_table() -> SignatureTable {
    VOCABULARY.iter().fold(SignatureTable::new(), |t, &(name, min, variadic, actional)| {
        let arity = if variadic { Arity::AtLeast(min) } else { Arity::Exact(min) };
        let sig = if actional {
            Signature::actional(arity)
        } else if matches!(name, "add" | "sub" | "mul") {
            Signature::functional(arity, Some(TypeTag::Integer))
        } else {
            Signature::functional(arity, Some(TypeTag::Boolean))
        };
        t.with(name, sig).with("ref", Signature::functional(Arity::Exact(1), None))
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    /// Maximum nesting depth of operands, selectors and control structures.
    pub max_depth: usize,
    /// Upper bound on items of each kind.
    pub max_items: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_depth: 6, max_items: 3 }
    }
}

pub fn random_bundle(seed: u64, config: GenConfig) -> Bundle {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg: config, counter: 0, functional: Vec::new(), actional: Vec::new() };
    g.bundle()
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    counter: usize,
    /// Declared functional operators (name, arity).
    functional: Vec<(Ident, usize)>,
    actional: Vec<(Ident, usize)>,
}

fn id(s: &str) -> Ident {
    Ident::new(s).expect("generator identifier")
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> Ident {
        self.counter += 1;
        id(&format!("{prefix}-{}", self.counter))
    }

    fn count(&mut self, min: usize) -> usize {
        self.rng.gen_range(min..=self.cfg.max_items.max(min))
    }

    fn bundle(&mut self) -> Bundle {
        let mut b = Bundle::default();
        for _ in 0..self.count(1) {
            let op = self.operator();
            b.operators.push(op);
        }
        for _ in 0..self.count(1) {
            let name = self.fresh("v");
            let operand = self.operand(self.cfg.max_depth, &mut BTreeSet::new());
            b.operands.push(NamedOperand { name, operand });
        }
        for _ in 0..self.count(1) {
            let w = self.web();
            b.webs.push(w);
        }
        for _ in 0..self.count(1) {
            let c = self.control(self.cfg.max_depth);
            b.controls.push(c);
        }
        // Guarantee a connector somewhere.
        if !b.controls.iter().any(|c| matches!(c, ControlStructure::Connector(_))) {
            let r = ControlStructure::Rule(self.rule());
            b.controls.push(ControlStructure::Connector(Connector { operator: id("or"), children: vec![r] }));
        }
        for _ in 0..self.count(3) {
            let a = self.annotation(&b);
            b.annotations.push(a);
        }
        let templates: Vec<Ident> = b.webs.iter().flat_map(|w| w.layouts.iter().map(|l| l.name.clone())).collect();
        for _ in 0..self.count(0) {
            let name = self.fresh("mech");
            let template = templates.choose(&mut self.rng).cloned().unwrap_or_else(|| id("form"));
            let rules = (0..self.count(1)).map(|_| self.rule()).collect();
            b.mechanisms.push(MechanismDecl { name, template, rules });
        }
        for _ in 0..self.count(1) {
            let scope = self.fresh("scope");
            let entries = (0..self.count(1)).map(|_| (self.fresh("entry"), self.value(3))).collect();
            b.states.push(StateDecl { scope, entries });
        }
        let community = self.fresh("community");
        let mut entity_ids = Vec::new();
        for _ in 0..self.count(0) {
            let e = self.entity(&community);
            entity_ids.push(e.id.clone());
            b.entities.push(e);
        }
        if !entity_ids.is_empty() || self.rng.gen() {
            let facts = entity_ids.iter().map(|owner| PostedFact { owner: owner.clone(), pairs: self.pairs(2) }).collect();
            b.communities.push(CommunityDecl { name: community, facts });
        }
        let mut comps = Vec::new();
        for _ in 0..self.count(0) {
            let c = self.component();
            comps.push(c.id.clone());
            b.components.push(c);
        }
        if comps.len() >= 3 {
            let arcs = vec![
                ArcDecl::Parallel { from: comps[0].clone(), to: comps[1].clone() },
                ArcDecl::Alternative {
                    from: comps[1].clone(),
                    selector: if self.rng.gen() { Some(id("is-true")) } else { None },
                    when_true: comps[2].clone(),
                    when_false: comps[0].clone(),
                },
            ];
            let name = self.fresh("workspace");
            b.workspaces.push(WorkspaceDecl { name, components: comps, arcs });
        }
        b
    }

    // ---- values

    fn text(&mut self) -> String {
        const POOL: [&str; 10] = ["", "a", "Ada", "quote \" mark", "back\\slash", "tab\tline\nbreak", "é ü 漢字", "\u{1}\u{7f}", "#not-a-comment", "end"];
        if self.rng.gen_bool(0.7) {
            POOL.choose(&mut self.rng).copied().unwrap_or_default().to_string()
        } else {
            let n = self.rng.gen_range(0..8);
            (0..n).map(|_| self.rng.gen::<char>()).collect()
        }
    }

    fn decimal(&mut self) -> f64 {
        loop {
            let x = match self.rng.gen_range(0..4) {
                0 => f64::from_bits(self.rng.gen()),
                1 => self.rng.gen_range(-1e6..1e6),
                2 => self.rng.gen_range(-10..10) as f64,
                _ => [0.1, -0.0, 1e-300, 1e300, 0.1 + 0.2][self.rng.gen_range(0..5)],
            };
            if x.is_finite() {
                return x;
            }
        }
    }

    fn scalar(&mut self) -> Value {
        match self.rng.gen_range(0..5) {
            0 => Value::Boolean(self.rng.gen()),
            1 => Value::Integer(if self.rng.gen_bool(0.2) { self.rng.gen() } else { self.rng.gen_range(-100..100) }),
            2 => Value::Decimal(self.decimal()),
            3 => Value::Text(self.text()),
            _ => Value::Media(MediaRef { media: "image".into(), uri: format!("file:scan-{}.png", self.rng.gen_range(0..100)) }),
        }
    }

    fn value(&mut self, depth: usize) -> Value {
        if depth <= 1 || self.rng.gen_bool(0.7) {
            return self.scalar();
        }
        if self.rng.gen() {
            Value::List((0..self.rng.gen_range(0..4)).map(|_| self.value(depth - 1)).collect())
        } else {
            Value::Record(self.pairs_at(depth - 1, 0))
        }
    }

    fn pairs(&mut self, depth: usize) -> Pairs {
        self.pairs_at(depth, 1)
    }

    fn pairs_at(&mut self, depth: usize, min: usize) -> Pairs {
        let keys = ["kind", "temp", "room", "from", "level", "name"];
        let n = self.rng.gen_range(min..=3);
        let mut out = BTreeMap::new();
        for _ in 0..n {
            let k = id(keys.choose(&mut self.rng).copied().unwrap_or("kind"));
            let v = self.value(depth);
            out.insert(k, v);
        }
        out
    }

    // ---- operands and operators

    fn ty(&mut self) -> TypeTag {
        *TypeTag::ALL.choose(&mut self.rng).unwrap_or(&TypeTag::Text)
    }

    /// `used` collects variable names so a layout never repeats one.
    fn operand(&mut self, depth: usize, used: &mut BTreeSet<Ident>) -> Operand {
        let roll = self.rng.gen_range(0..10);
        if depth <= 1 || roll < 3 {
            return Operand::Constant(self.value(2));
        }
        if roll < 5 {
            let name = self.fresh("x");
            used.insert(name.clone());
            return Operand::var(name, self.ty());
        }
        let (op, n) = self.functional_op();
        Operand::Application { operator: op, args: (0..n).map(|_| self.operand(depth - 1, used)).collect() }
    }

    fn functional_op(&mut self) -> (Ident, usize) {
        if !self.functional.is_empty() && self.rng.gen_bool(0.3) {
            return self.functional.choose(&mut self.rng).cloned().unwrap_or((id("not"), 1));
        }
        let funcs: Vec<_> = VOCABULARY.iter().filter(|v| !v.3).collect();
        let &&(name, min, variadic, _) = funcs.choose(&mut self.rng).expect("vocabulary");
        let n = if variadic { self.rng.gen_range(min..=3) } else { min };
        (id(name), n)
    }

    fn operator(&mut self) -> OperatorConstruct {
        let params: Vec<Param> = (0..self.rng.gen_range(1..=3)).map(|i| Param { name: id(&format!("p{i}")), ty: self.ty() }).collect();
        if self.rng.gen_bool(0.6) {
            let name = self.fresh("fn");
            let body = self.body_operand(self.cfg.max_depth.min(4), &params);
            let op = OperatorConstruct { name: name.clone(), kind: OperatorKind::Functional, params, result: Some(self.ty()), body: vec![body] };
            self.functional.push((name, op.params.len()));
            op
        } else {
            let name = self.fresh("act");
            let mut body = Vec::new();
            for _ in 0..self.rng.gen_range(1..=3) {
                let p = params.choose(&mut self.rng).expect("params").clone();
                let inv = if !self.actional.is_empty() && self.rng.gen_bool(0.3) {
                    let (op, n) = self.actional.choose(&mut self.rng).cloned().expect("actional");
                    Operand::Application { operator: op, args: (0..n).map(|_| Operand::var(p.name.clone(), p.ty)).collect() }
                } else if self.rng.gen() {
                    Operand::Application { operator: id("put"), args: vec![Operand::var(p.name.clone(), p.ty), Operand::Constant(self.scalar())] }
                } else {
                    Operand::Application { operator: id("retract"), args: vec![Operand::var(p.name, p.ty)] }
                };
                body.push(inv);
            }
            let op = OperatorConstruct { name: name.clone(), kind: OperatorKind::Actional, params, result: None, body };
            self.actional.push((name, op.params.len()));
            op
        }
    }

    fn body_operand(&mut self, depth: usize, params: &[Param]) -> Operand {
        let roll = self.rng.gen_range(0..10);
        if depth <= 1 || roll < 4 {
            if roll % 2 == 0 {
                let p = params.choose(&mut self.rng).expect("params");
                return Operand::var(p.name.clone(), p.ty);
            }
            return Operand::Constant(self.scalar());
        }
        let (op, n) = self.functional_op();
        Operand::Application { operator: op, args: (0..n).map(|_| self.body_operand(depth - 1, params)).collect() }
    }

    // ---- structures

    fn web(&mut self) -> WebStructure {
        let name = self.fresh("web");
        let mut layouts = Vec::new();
        for _ in 0..self.count(1) {
            let lname = self.fresh("layout");
            let mut used = BTreeSet::new();
            let objects = (0..self.count(1))
                .map(|_| {
                    let operand = self.operand(self.cfg.max_depth.min(4), &mut used);
                    let coordinates = self.rng.gen_bool(0.7).then(|| Coordinates { x: self.decimal(), y: self.decimal() });
                    TopologicalObject::new(operand, coordinates)
                })
                .collect();
            layouts.push(LayoutStructure { name: lname, objects });
        }
        let names: Vec<Ident> = layouts.iter().map(|l| l.name.clone()).collect();
        let links = (0..self.rng.gen_range(0..=names.len()))
            .map(|_| Hyperlink { from: names.choose(&mut self.rng).cloned().expect("layout"), to: names.choose(&mut self.rng).cloned().expect("layout") })
            .collect();
        WebStructure { name, layouts, links }
    }

    fn selector(&mut self, depth: usize) -> Selector {
        match self.rng.gen_range(0..if depth <= 1 { 4 } else { 5 }) {
            0 => Selector::Entry(StateRef::local(self.fresh("flag"))),
            1 => Selector::Entry(StateRef::scoped(id("app"), self.fresh("flag"))),
            2 => {
                let mut pattern = FactPattern::new();
                for _ in 0..self.rng.gen_range(0..3) {
                    let v = if self.rng.gen() { Some(self.scalar()) } else { None };
                    pattern = pattern.with(id(["kind", "room", "from"].choose(&mut self.rng).copied().unwrap_or("kind")), v);
                }
                if self.rng.gen() {
                    Selector::Match { scope: id("lab"), pattern }
                } else {
                    Selector::Scope(id("lab"))
                }
            }
            3 => Selector::Constant(self.value(2)),
            _ => {
                let (op, n) = self.functional_op();
                Selector::Apply { operator: op, args: (0..n).map(|_| self.selector(depth - 1)).collect() }
            }
        }
    }

    fn rule(&mut self) -> RewritingRule {
        let name = self.fresh("rule");
        let conds = [("is-true", 1usize), ("eq", 2), ("lt", 2), ("not", 1), ("and", 2)];
        let conditions = (0..self.rng.gen_range(0..=2))
            .map(|_| {
                let &(op, n) = conds.choose(&mut self.rng).expect("conditions");
                Condition { operator: id(op), args: (0..n).map(|_| self.selector(3)).collect() }
            })
            .collect();
        let actions = (0..self.rng.gen_range(1..=2))
            .map(|_| {
                let target = Selector::Entry(StateRef::local(self.fresh("flag")));
                if !self.actional.is_empty() && self.rng.gen_bool(0.3) {
                    let (op, n) = self.actional.choose(&mut self.rng).cloned().expect("actional");
                    Action { operator: op, args: vec![target; n] }
                } else {
                    match self.rng.gen_range(0..3) {
                        0 => Action { operator: id("put"), args: vec![target, self.selector(3)] },
                        1 => Action { operator: id("retract"), args: vec![target] },
                        _ => Action { operator: id("annotate"), args: vec![target, Selector::Constant(Value::Text(self.text()))] },
                    }
                }
            })
            .collect();
        RewritingRule { name, conditions, actions }
    }

    fn control(&mut self, depth: usize) -> ControlStructure {
        if depth <= 1 || self.rng.gen_bool(0.5) {
            return ControlStructure::Rule(self.rule());
        }
        let op = ["and", "or", "nand", "nor"].choose(&mut self.rng).copied().unwrap_or("or");
        let children = (0..self.rng.gen_range(1..=3)).map(|_| self.control(depth - 1)).collect();
        ControlStructure::Connector(Connector { operator: id(op), children })
    }

    // ---- annotations

    fn timestamp(&mut self) -> DateTime<Utc> {
        let secs = self.rng.gen_range(0..4_000_000_000i64);
        let nanos = if self.rng.gen() { 0 } else { self.rng.gen_range(0..1_000_000_000u32) };
        DateTime::from_timestamp(secs, nanos).unwrap_or(DateTime::<Utc>::UNIX_EPOCH)
    }

    fn annotation(&mut self, b: &Bundle) -> Annotation {
        let ann_id = self.fresh("note");
        let body = match self.rng.gen_range(0..3) {
            0 => {
                let all = [
                    ConventionalSymbol::plain(id("highlight")),
                    ConventionalSymbol::plain(id("strike")),
                    ConventionalSymbol::plain(id("frame")),
                    ConventionalSymbol { name: id("color"), arg: Some(id("red")) },
                ];
                let n = self.rng.gen_range(1..=3);
                AnnotationBody::Style(Style::Symbols(all.choose_multiple(&mut self.rng, n).cloned().collect()))
            }
            1 => AnnotationBody::Style(Style::Operator(id("not"))),
            _ => AnnotationBody::Constant(self.value(3)),
        };
        let mut targets = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            let t = match self.rng.gen_range(0..3) {
                0 if !b.annotations.is_empty() => {
                    let prev = b.annotations.choose(&mut self.rng).expect("annotation");
                    TargetRef::to_annotation(id("ref"), &prev.id)
                }
                1 if !b.controls.is_empty() => {
                    let i = self.rng.gen_range(0..b.controls.len());
                    TargetRef { selector: id("ref"), kind: TargetKind::ControlStructure, path: vec![i.to_string()] }
                }
                _ => {
                    let w = b.webs.choose(&mut self.rng).expect("web");
                    let l = w.layouts.choose(&mut self.rng).expect("layout");
                    let i = self.rng.gen_range(0..l.objects.len());
                    TargetRef { selector: id("ref"), kind: TargetKind::TopologicalObject, path: vec![l.name.to_string(), i.to_string()] }
                }
            };
            targets.push(t);
        }
        Annotation { id: ann_id, body, targets, author: self.text(), timestamp: self.timestamp() }
    }

    // ---- profile declarations

    fn entity(&mut self, community: &Ident) -> EntityDecl {
        let eid = self.fresh("entity");
        let memory = (0..self.rng.gen_range(0..=2)).map(|_| self.pairs(2)).collect();
        let wrapper = (0..self.rng.gen_range(0..=2))
            .map(|_| WrapperFn { name: self.fresh("device-fn"), params: vec![Param { name: id("level"), ty: TypeTag::Integer }] })
            .collect();
        let behavior = (0..self.rng.gen_range(0..=2)).map(|_| self.control(3)).collect();
        EntityDecl { id: eid, memberships: vec![community.clone()], memory, wrapper, behavior }
    }

    fn component(&mut self) -> ComponentDecl {
        let kinds = [ComponentKind::Source, ComponentKind::Filter, ComponentKind::Viewer, ComponentKind::Handler];
        let kind = *kinds.choose(&mut self.rng).expect("kind");
        let cid = self.fresh("component");
        let records = if kind == ComponentKind::Source { (0..self.rng.gen_range(0..=3)).map(|_| Value::Record(self.pairs(1))).collect() } else { Vec::new() };
        ComponentDecl {
            id: cid,
            kind,
            subscriptions: vec![id("refresh")],
            accepts: if self.rng.gen() { vec![id("data")] } else { Vec::new() },
            predicate: (kind == ComponentKind::Filter).then(|| id("is-true")),
            records,
            behavior: (0..self.rng.gen_range(0..=1)).map(|_| self.control(2)).collect(),
        }
    }
}

/// Productions a bundle exercises.
pub fn productions_used(b: &Bundle) -> BTreeSet<Production> {
    use Production as P;
    let mut out = BTreeSet::new();
    let mut mark = |p: P, cond: bool| {
        if cond {
            out.insert(p);
        }
    };
    let layouts: Vec<&LayoutStructure> = b.webs.iter().flat_map(|w| w.layouts.iter()).collect();
    let objects: Vec<&TopologicalObject> = layouts.iter().flat_map(|l| l.objects.iter()).collect();
    let mut controls: Vec<&ControlStructure> = b.controls.iter().collect();
    controls.extend(b.entities.iter().flat_map(|e| e.behavior.iter()));
    controls.extend(b.components.iter().flat_map(|c| c.behavior.iter()));
    let mut rules: Vec<&RewritingRule> = controls.iter().flat_map(|c| c.rules()).collect();
    rules.extend(b.mechanisms.iter().flat_map(|m| m.rules.iter()));

    mark(P::WebStructure, !b.webs.is_empty());
    mark(P::LayoutStructure, !layouts.is_empty());
    mark(P::TopologicalObject, !objects.is_empty());
    mark(P::OperandConstruct, !b.operands.is_empty() || !objects.is_empty());
    mark(P::OperatorConstruct, !b.operators.is_empty());
    mark(P::Annotation, !b.annotations.is_empty());
    mark(P::TargetRef, b.annotations.iter().any(|a| !a.targets.is_empty()));
    let constant_operand = |o: &Operand| o.variables().len() < count_leaves(o);
    mark(
        P::Constant,
        b.operands.iter().any(|n| constant_operand(&n.operand))
            || objects.iter().any(|o| constant_operand(&o.operand))
            || b.annotations.iter().any(|a| matches!(a.body, AnnotationBody::Constant(_))),
    );
    mark(P::Target, b.annotations.iter().flat_map(|a| a.targets.iter()).any(|t| !t.path.is_empty()));
    mark(P::Style, b.annotations.iter().any(|a| matches!(a.body, AnnotationBody::Style(_))));
    mark(P::ControlStructure, !controls.is_empty());
    mark(P::Connector, controls.iter().any(|c| matches!(c, ControlStructure::Connector(_))));
    mark(P::RewritingRule, !rules.is_empty());
    mark(P::Condition, rules.iter().any(|r| !r.conditions.is_empty()));
    mark(P::Action, rules.iter().any(|r| !r.actions.is_empty()));
    mark(P::State, !b.states.is_empty());
    out
}

fn count_leaves(o: &Operand) -> usize {
    match o {
        Operand::Application { args, .. } => args.iter().map(count_leaves).sum(),
        _ => 1,
    }
}
