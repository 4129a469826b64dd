//! Publish/subscribe dataflow workspaces.
//!
//! Sources publish their records as one `data` event; filters keep the records their
//! predicate accepts and publish them as `new-data`; viewers show the latest dataset they
//! received. Compatibility is event-kind typing: a wire is legal only if the target
//! accepts what the source emits, and is checked when wiring, never while propagating.
//!
//! An event goes to the targets of its emitter's arcs (all of them for parallel arcs, one
//! branch for an alternative arc) and to every component subscribed to its kind, each at
//! most once. Events are processed first in, first out, with a cap on deliveries per
//! propagation as a guard against cycles.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use lob_core::bundle::{ArcDecl, ComponentDecl, ComponentKind, WorkspaceDecl};
use lob_core::validate::validate_bundle;
use lob_core::{Arity, Bundle, ConstructLookup, Ident, OperatorKind, Selector, State, ValidationReport, Value};
use lob_engine::{EffectCtx, Engine, EvalError, Refraction, Registry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATA: &str = "data";
pub const NEW_DATA: &str = "new-data";
pub const CHANGE: &str = "change";
/// Emitter of wiring-change events.
pub const HANDLER: &str = "composition-handler";
/// Deliveries allowed in one propagation.
pub const DELIVERY_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{0}` is already defined")]
    Duplicate(String),
    #[error("`{from}` emits `{kind}`, which `{to}` does not accept")]
    Incompatible { from: String, to: String, kind: String },
    #[error("`{0}` emits nothing and cannot be wired out of")]
    Silent(String),
    #[error("alternative arc out of `{0}` has no selector")]
    MissingSelector(String),
    #[error("`{0}` is not a one-argument functional operator")]
    NotAPredicate(String),
    #[error("filter `{0}` has no predicate")]
    NoPredicate(String),
    #[error("`{0}` is not a filter")]
    NotAFilter(String),
    #[error("behavior of `{component}` is malformed:\n{report}")]
    InvalidBehavior { component: String, report: ValidationReport },
}

fn id(s: &str) -> Ident {
    Ident::new(s).expect("identifier")
}

/// Primitives plus `publish(kind, payload)`, for component behaviors.
pub fn registry() -> Registry {
    let mut r = Registry::with_primitives();
    install(&mut r);
    r
}

/// Adds `publish` to `r`.
pub fn install(r: &mut Registry) {
    r.add_effect(
        "publish",
        Arity::Exact(2),
        Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| {
            let kind = match &a[0] {
                Selector::Entry(r) if r.scope.is_none() => r.name.to_string(),
                other => ctx.text(other)?,
            };
            Ident::new(kind.as_str()).map_err(|e| EvalError::Refused(e.to_string()))?;
            let payload = ctx.value(&a[1])?;
            ctx.mark(format!("publish {kind}"));
            let record = BTreeMap::from([(id("kind"), Value::Text(kind)), (id("payload"), payload)]);
            ctx.append(id("outbox"), Value::Record(record));
            Ok(())
        }),
    )
    .expect("publish is fresh");
}

/// Kind a component publishes on its own.
pub fn emits(kind: ComponentKind) -> Option<&'static str> {
    match kind {
        ComponentKind::Source => Some(DATA),
        ComponentKind::Filter => Some(NEW_DATA),
        ComponentKind::Handler => Some(CHANGE),
        ComponentKind::Viewer => None,
    }
}

/// Kinds a component accepts over a wire: its declared list, or a default by kind.
pub fn accepts(c: &ComponentDecl) -> Vec<Ident> {
    if !c.accepts.is_empty() {
        return c.accepts.clone();
    }
    let kinds: &[&str] = match c.kind {
        ComponentKind::Source => &[CHANGE],
        ComponentKind::Filter | ComponentKind::Viewer => &[DATA, NEW_DATA],
        ComponentKind::Handler => &[],
    };
    kinds.iter().map(|k| id(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: Ident,
    pub payload: Value,
    pub emitter: Ident,
    /// Set for events addressed to one component, bypassing arcs and subscriptions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Ident>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum FlowRecord {
    Published(Event),
    Delivered {
        seq: u64,
        to: Ident,
    },
    /// No component received the event.
    Dropped {
        seq: u64,
    },
    ViewUpdated {
        viewer: Ident,
        rows: usize,
    },
}

impl FlowRecord {
    /// `P\t<seq>\t<emitter>\t<kind>\t<payload json>`, `D\t<seq>\t<to>`, `X\t<seq>`, `V\t<viewer>\t<rows>`
    pub fn to_line(&self) -> String {
        match self {
            FlowRecord::Published(e) => format!("P\t{}\t{}\t{}\t{}", e.seq, e.emitter, e.kind, plain_json(&e.payload)),
            FlowRecord::Delivered { seq, to } => format!("D\t{seq}\t{to}"),
            FlowRecord::Dropped { seq } => format!("X\t{seq}"),
            FlowRecord::ViewUpdated { viewer, rows } => format!("V\t{viewer}\t{rows}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Propagation {
    pub records: Vec<FlowRecord>,
    /// The delivery cap stopped processing; undelivered events were discarded.
    pub capped: bool,
}

impl Propagation {
    pub fn deliveries(&self) -> impl Iterator<Item = (u64, &Ident)> {
        self.records.iter().filter_map(|r| match r {
            FlowRecord::Delivered { seq, to } => Some((*seq, to)),
            _ => None,
        })
    }

    pub fn published(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().filter_map(|r| match r {
            FlowRecord::Published(e) => Some(e),
            _ => None,
        })
    }

    /// Viewers updated, in order, with repeats.
    pub fn updates(&self) -> Vec<&Ident> {
        self.records
            .iter()
            .filter_map(|r| match r {
                FlowRecord::ViewUpdated { viewer, .. } => Some(viewer),
                _ => None,
            })
            .collect()
    }
}

/// Values as plain JSON: records become objects, lists arrays.
pub fn plain_json(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::Boolean(b) => J::Bool(*b),
        Value::Integer(i) => J::from(*i),
        Value::Decimal(d) => J::from(*d),
        Value::Text(s) => J::String(s.clone()),
        Value::Media(m) => serde_json::json!({ "media": m.media, "uri": m.uri }),
        Value::List(xs) => J::Array(xs.iter().map(plain_json).collect()),
        Value::Record(fs) => J::Object(fs.iter().map(|(k, v)| (k.to_string(), plain_json(v))).collect()),
    }
}

/// One line of JSON per row.
pub fn export_rows(rows: &Value) -> String {
    match rows {
        Value::List(xs) => xs.iter().map(|r| plain_json(r).to_string() + "\n").collect(),
        other => plain_json(other).to_string() + "\n",
    }
}

/// Everything needed to rebuild a [`Workspace`] between propagations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSnapshot {
    pub name: Ident,
    pub components: Vec<ComponentDecl>,
    pub arcs: Vec<ArcDecl>,
    pub subscriptions: BTreeSet<(Ident, Ident)>,
    pub data_view: BTreeMap<Ident, Value>,
    pub inputs: BTreeMap<Ident, Value>,
    pub locals: BTreeMap<Ident, (State, Refraction)>,
    pub seq: u64,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub name: Ident,
    registry: Registry,
    components: Vec<ComponentDecl>,
    arcs: Vec<ArcDecl>,
    subscriptions: BTreeSet<(Ident, Ident)>,
    data_view: BTreeMap<Ident, Value>,
    /// Last dataset each filter received, so it can re-emit after a wiring change.
    inputs: BTreeMap<Ident, Value>,
    locals: BTreeMap<Ident, (State, Refraction)>,
    seq: u64,
    queue: VecDeque<Event>,
}

impl Workspace {
    /// `registry` must provide `publish` (see [`registry`]) and every filter predicate
    /// and arc selector.
    pub fn new(name: Ident, registry: Registry) -> Self {
        Workspace {
            name,
            registry,
            components: Vec::new(),
            arcs: Vec::new(),
            subscriptions: BTreeSet::new(),
            data_view: BTreeMap::new(),
            inputs: BTreeMap::new(),
            locals: BTreeMap::new(),
            seq: 0,
            queue: VecDeque::new(),
        }
    }

    /// A declared workspace: its components (looked up in `components`) and arcs.
    pub fn from_decl(decl: &WorkspaceDecl, components: &[ComponentDecl], registry: Registry) -> Result<Self, FlowError> {
        let mut w = Workspace::new(decl.name.clone(), registry);
        for c in &decl.components {
            let d = components.iter().find(|d| d.id == *c).ok_or_else(|| FlowError::UnknownComponent(c.to_string()))?;
            w.add_component(d.clone())?;
        }
        for a in &decl.arcs {
            w.wire(a.clone())?;
        }
        Ok(w)
    }

    /// Pending events are not part of a snapshot; take it after a drain.
    pub fn snapshot(&self) -> WorkspaceSnapshot {
        WorkspaceSnapshot {
            name: self.name.clone(),
            components: self.components.clone(),
            arcs: self.arcs.clone(),
            subscriptions: self.subscriptions.clone(),
            data_view: self.data_view.clone(),
            inputs: self.inputs.clone(),
            locals: self.locals.clone(),
            seq: self.seq,
        }
    }

    /// Rebuilds from a snapshot, rechecking components and wiring against `registry`.
    pub fn restore(snapshot: WorkspaceSnapshot, registry: Registry) -> Result<Self, FlowError> {
        let mut w = Workspace::new(snapshot.name, registry);
        for c in snapshot.components {
            w.add_component(c)?;
        }
        for a in snapshot.arcs {
            w.wire(a)?;
        }
        w.subscriptions = snapshot.subscriptions;
        w.data_view = snapshot.data_view;
        w.inputs = snapshot.inputs;
        w.locals = snapshot.locals;
        w.seq = snapshot.seq;
        Ok(w)
    }

    /// The state description: components and wiring.
    pub fn to_bundle(&self) -> Bundle {
        let decl = WorkspaceDecl { name: self.name.clone(), components: self.components.iter().map(|c| c.id.clone()).collect(), arcs: self.arcs.clone() };
        Bundle { components: self.components.clone(), workspaces: vec![decl], ..Bundle::default() }
    }

    pub fn components(&self) -> &[ComponentDecl] {
        &self.components
    }

    pub fn arcs(&self) -> &[ArcDecl] {
        &self.arcs
    }

    pub fn component(&self, id: &str) -> Option<&ComponentDecl> {
        self.components.iter().find(|c| c.id == id)
    }

    /// Latest dataset shown by each viewer.
    pub fn data_view(&self) -> &BTreeMap<Ident, Value> {
        &self.data_view
    }

    fn predicate(&self, name: &Ident) -> Result<(), FlowError> {
        match self.registry.signature(name.as_str()) {
            Some(sig) if sig.kind == OperatorKind::Functional && sig.arity.admits(1) => Ok(()),
            _ => Err(FlowError::NotAPredicate(name.to_string())),
        }
    }

    fn check(&self, c: &ComponentDecl) -> Result<(), FlowError> {
        if c.id == HANDLER {
            return Err(FlowError::Duplicate(c.id.to_string()));
        }
        match (&c.kind, &c.predicate) {
            (ComponentKind::Filter, None) => return Err(FlowError::NoPredicate(c.id.to_string())),
            (_, Some(p)) => self.predicate(p)?,
            _ => {}
        }
        let report = validate_bundle(&Bundle { controls: c.behavior.clone(), ..Bundle::default() }, &self.registry);
        if !report.is_empty() {
            return Err(FlowError::InvalidBehavior { component: c.id.to_string(), report });
        }
        Ok(())
    }

    pub fn add_component(&mut self, c: ComponentDecl) -> Result<(), FlowError> {
        if self.component(c.id.as_str()).is_some() {
            return Err(FlowError::Duplicate(c.id.to_string()));
        }
        self.check(&c)?;
        for k in &c.subscriptions {
            self.subscriptions.insert((c.id.clone(), k.clone()));
        }
        self.components.push(c);
        Ok(())
    }

    fn compatible(&self, from: &Ident, to: &Ident) -> Result<(), FlowError> {
        let f = self.component(from.as_str()).ok_or_else(|| FlowError::UnknownComponent(from.to_string()))?;
        let t = self.component(to.as_str()).ok_or_else(|| FlowError::UnknownComponent(to.to_string()))?;
        let kind = emits(f.kind).ok_or_else(|| FlowError::Silent(from.to_string()))?;
        if !accepts(t).iter().any(|k| k == kind) {
            return Err(FlowError::Incompatible { from: from.to_string(), to: to.to_string(), kind: kind.into() });
        }
        Ok(())
    }

    /// Adds an arc after checking both ends accept each other.
    pub fn wire(&mut self, arc: ArcDecl) -> Result<(), FlowError> {
        match &arc {
            ArcDecl::Parallel { from, to } => self.compatible(from, to)?,
            ArcDecl::Alternative { from, selector, when_true, when_false } => {
                let sel = selector.as_ref().ok_or_else(|| FlowError::MissingSelector(from.to_string()))?;
                self.predicate(sel)?;
                self.compatible(from, when_true)?;
                self.compatible(from, when_false)?;
            }
        }
        if !self.arcs.contains(&arc) {
            self.arcs.push(arc);
        }
        Ok(())
    }

    /// Idempotent.
    pub fn subscribe(&mut self, component: &str, kind: Ident) -> Result<(), FlowError> {
        let c = self.component(component).ok_or_else(|| FlowError::UnknownComponent(component.into()))?;
        self.subscriptions.insert((c.id.clone(), kind));
        Ok(())
    }

    pub fn subscriptions(&self) -> &BTreeSet<(Ident, Ident)> {
        &self.subscriptions
    }

    /// Queues an event; it is delivered by the next [`Workspace::drain`].
    pub fn publish(&mut self, emitter: &str, kind: Ident, payload: Value) -> Result<u64, FlowError> {
        if emitter != HANDLER && self.component(emitter).is_none() {
            return Err(FlowError::UnknownComponent(emitter.into()));
        }
        Ok(self.enqueue(id(emitter), kind, payload, None))
    }

    fn enqueue(&mut self, emitter: Ident, kind: Ident, payload: Value, to: Option<Ident>) -> u64 {
        self.seq += 1;
        self.queue.push_back(Event { seq: self.seq, kind, payload, emitter, to });
        self.seq
    }

    /// Every source publishes its records, then the queue drains.
    pub fn propagate(&mut self) -> Propagation {
        let sources: Vec<(Ident, Value)> =
            self.components.iter().filter(|c| c.kind == ComponentKind::Source).map(|c| (c.id.clone(), Value::List(c.records.clone()))).collect();
        for (s, records) in sources {
            self.enqueue(s, id(DATA), records, None);
        }
        self.drain()
    }

    /// Swaps a filter for another and re-runs the flow through it once: the components
    /// feeding the old filter re-send their data to the new one.
    pub fn replace_filter(&mut self, old: &str, new: ComponentDecl) -> Result<Propagation, FlowError> {
        let pos = self.components.iter().position(|c| c.id == old).ok_or_else(|| FlowError::UnknownComponent(old.into()))?;
        if self.components[pos].kind != ComponentKind::Filter {
            return Err(FlowError::NotAFilter(old.into()));
        }
        if new.kind != ComponentKind::Filter {
            return Err(FlowError::NotAFilter(new.id.to_string()));
        }
        if new.id != old && self.component(new.id.as_str()).is_some() {
            return Err(FlowError::Duplicate(new.id.to_string()));
        }
        self.check(&new)?;
        let mut next = self.clone();
        let old_id = next.components[pos].id.clone();
        let rename = |x: &mut Ident| {
            if *x == old_id {
                *x = new.id.clone();
            }
        };
        next.arcs = Vec::new();
        for mut a in self.arcs.clone() {
            match &mut a {
                ArcDecl::Parallel { from, to } => {
                    rename(from);
                    rename(to);
                }
                ArcDecl::Alternative { from, when_true, when_false, .. } => {
                    rename(from);
                    rename(when_true);
                    rename(when_false);
                }
            }
            next.arcs.push(a);
        }
        next.subscriptions.retain(|(c, _)| *c != old_id);
        next.subscriptions.extend(new.subscriptions.iter().map(|k| (new.id.clone(), k.clone())));
        next.inputs.remove(&old_id);
        next.locals.remove(&old_id);
        next.components[pos] = new.clone();
        for a in next.arcs.clone() {
            match &a {
                ArcDecl::Parallel { from, to } => next.compatible(from, to)?,
                ArcDecl::Alternative { from, when_true, when_false, .. } => {
                    next.compatible(from, when_true)?;
                    next.compatible(from, when_false)?;
                }
            }
        }
        *self = next;
        let payload = Value::Record(BTreeMap::from([(id("component"), Value::Text(new.id.to_string()))]));
        self.enqueue(id(HANDLER), id(CHANGE), payload, None);
        Ok(self.drain())
    }

    fn feeders(&self, target: &Ident) -> Vec<Ident> {
        let mut out = Vec::new();
        for a in &self.arcs {
            let (from, hit) = match a {
                ArcDecl::Parallel { from, to } => (from, to == target),
                ArcDecl::Alternative { from, when_true, when_false, .. } => (from, when_true == target || when_false == target),
            };
            if hit && !out.contains(from) {
                out.push(from.clone());
            }
        }
        out
    }

    fn targets(&self, e: &Event) -> Vec<Ident> {
        if let Some(t) = &e.to {
            return vec![t.clone()];
        }
        let mut out: Vec<Ident> = Vec::new();
        let push = |c: &Ident, out: &mut Vec<Ident>| {
            if !out.contains(c) {
                out.push(c.clone());
            }
        };
        if e.emitter == HANDLER && e.kind == CHANGE {
            if let Some(Value::Text(changed)) = e.payload.as_record().and_then(|r| r.get("component")) {
                for f in self.feeders(&id(changed)) {
                    push(&f, &mut out);
                }
            }
        }
        let accepted = |to: &Ident| self.component(to.as_str()).is_some_and(|c| accepts(c).contains(&e.kind));
        for a in self.arcs.iter() {
            match a {
                ArcDecl::Parallel { from, to } if *from == e.emitter && accepted(to) => push(to, &mut out),
                ArcDecl::Alternative { from, selector: Some(sel), when_true, when_false } if *from == e.emitter => {
                    // A selector that fails to evaluate routes to the false branch.
                    let pick = self.registry.call(sel.as_str(), vec![e.payload.clone()]).ok().and_then(|v| v.as_bool()).unwrap_or(false);
                    let to = if pick { when_true } else { when_false };
                    if accepted(to) {
                        push(to, &mut out);
                    }
                }
                _ => {}
            }
        }
        for (c, k) in &self.subscriptions {
            if *k == e.kind && *c != e.emitter {
                push(c, &mut out);
            }
        }
        out
    }

    /// Processes queued events until none are left or the delivery cap is reached.
    pub fn drain(&mut self) -> Propagation {
        let mut p = Propagation::default();
        let mut delivered = 0;
        while let Some(e) = self.queue.pop_front() {
            p.records.push(FlowRecord::Published(e.clone()));
            let targets = self.targets(&e);
            if targets.is_empty() {
                p.records.push(FlowRecord::Dropped { seq: e.seq });
            }
            for t in targets {
                if delivered == DELIVERY_CAP {
                    p.capped = true;
                    self.queue.clear();
                    return p;
                }
                delivered += 1;
                p.records.push(FlowRecord::Delivered { seq: e.seq, to: t.clone() });
                self.deliver(&t, &e, &mut p);
            }
        }
        p
    }

    fn deliver(&mut self, to: &Ident, e: &Event, p: &mut Propagation) {
        let Some(c) = self.component(to.as_str()).cloned() else { return };
        match c.kind {
            ComponentKind::Source if e.kind == CHANGE => {
                let target = e.payload.as_record().and_then(|r| r.get("component")).and_then(Value::as_text).and_then(|t| Ident::new(t).ok());
                self.enqueue(c.id.clone(), id(DATA), Value::List(c.records.clone()), target);
            }
            ComponentKind::Filter if e.kind == CHANGE => {
                if let Some(input) = self.inputs.get(&c.id).cloned() {
                    let target = e.payload.as_record().and_then(|r| r.get("component")).and_then(Value::as_text).and_then(|t| Ident::new(t).ok());
                    let out = self.apply_filter(&c, &input);
                    self.enqueue(c.id.clone(), id(NEW_DATA), out, target);
                }
            }
            ComponentKind::Filter if e.kind == DATA || e.kind == NEW_DATA => {
                self.inputs.insert(c.id.clone(), e.payload.clone());
                let out = self.apply_filter(&c, &e.payload);
                self.enqueue(c.id.clone(), id(NEW_DATA), out, None);
            }
            ComponentKind::Viewer if e.kind == DATA || e.kind == NEW_DATA => {
                let rows = e.payload.as_list().map_or(1, <[Value]>::len);
                self.data_view.insert(c.id.clone(), e.payload.clone());
                p.records.push(FlowRecord::ViewUpdated { viewer: c.id.clone(), rows });
            }
            _ => {}
        }
        if !c.behavior.is_empty() {
            self.react(&c, e);
        }
    }

    /// Records the predicate accepts. Records it fails on are dropped.
    fn apply_filter(&self, c: &ComponentDecl, input: &Value) -> Value {
        let pred = c.predicate.as_ref().expect("filters are checked for a predicate");
        let rows = input.as_list().map(<[Value]>::to_vec).unwrap_or_else(|| vec![input.clone()]);
        Value::List(rows.into_iter().filter(|r| self.registry.call(pred.as_str(), vec![r.clone()]).ok().and_then(|v| v.as_bool()) == Some(true)).collect())
    }

    /// Runs a component's own rules with the event in scope `event`; whatever they
    /// publish is queued. Rule failures leave the component's state as it was.
    fn react(&mut self, c: &ComponentDecl, e: &Event) {
        let (mut state, mut refraction) = self.locals.get(&c.id).cloned().unwrap_or_else(|| (State::new(id("local")), Refraction::default()));
        let ev = id("event");
        state.set(ev.clone(), id("kind"), Value::Text(e.kind.to_string()));
        state.set(ev.clone(), id("payload"), e.payload.clone());
        state.set(ev.clone(), id("emitter"), Value::Text(e.emitter.to_string()));
        state.set(ev.clone(), id("seq"), Value::Integer(e.seq as i64));
        let engine = Engine::new(&self.registry);
        if engine.run(&mut state, &c.behavior, &mut refraction).is_err() {
            return;
        }
        for v in state.scope_values("outbox") {
            let fields = v.as_record().expect("publish writes records");
            let kind = fields["kind"].as_text().and_then(|k| Ident::new(k).ok()).expect("publish checks kinds");
            self.enqueue(c.id.clone(), kind, fields["payload"].clone(), None);
        }
        state.scopes.remove("outbox");
        state.scopes.remove("event");
        self.locals.insert(c.id.clone(), (state, refraction));
    }
}
