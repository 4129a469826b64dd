use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use lob_core::bundle::MechanismDecl;
use lob_core::validate::validate_bundle;
use lob_core::{
    Annotation, AnnotationBody, AnnotationStore, Bundle, ControlStructure, Ident, Selector, State, StateDelta, StateRef, TargetKind, TargetRef, Value,
};
use lob_engine::{EffectCtx, Engine, EngineConfig, Firing, Refraction, Registry, RunReport, TraceEvent};
use serde::{Deserialize, Serialize};

use super::ops::flagged;
use super::{check_mechanism, datom_value, DatomRegistry, Template, WoadError, DOC};
use crate::clock::Clock;

/// One change to a document value, by a user fill or by a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillEvent {
    pub at: DateTime<Utc>,
    pub didget: Ident,
    pub old: Option<Value>,
    /// `None` when the value was deleted.
    pub new: Option<Value>,
    pub author: String,
}

impl FillEvent {
    /// `<timestamp>\t<didget>\t<old>\t<new>\t<author>`, values and author as JSON.
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}\t{}", self.at.to_rfc3339_opts(SecondsFormat::Millis, true), self.didget, json(&self.old), json(&self.new), json(&self.author))
    }

    pub fn from_line(line: &str) -> Result<FillEvent, String> {
        let f: Vec<&str> = line.split('\t').collect();
        let [at, didget, old, new, author] = f.as_slice() else {
            return Err(format!("expected 5 tab-separated fields, got {}", f.len()));
        };
        Ok(FillEvent {
            at: DateTime::parse_from_rfc3339(at).map_err(|e| e.to_string())?.with_timezone(&Utc),
            didget: Ident::new(*didget).map_err(|e| e.to_string())?,
            old: serde_json::from_str(old).map_err(|e| e.to_string())?,
            new: serde_json::from_str(new).map_err(|e| e.to_string())?,
            author: serde_json::from_str(author).map_err(|e| e.to_string())?,
        })
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("history fields serialize")
}

/// Folds a history from an empty document.
pub fn replay_history(events: &[FillEvent]) -> BTreeMap<Ident, Value> {
    let mut values = BTreeMap::new();
    for e in events {
        match &e.new {
            Some(v) => values.insert(e.didget.clone(), v.clone()),
            None => values.remove(&e.didget),
        };
    }
    values
}

/// What one fill or action did: the history events it appended and the mechanism run
/// it triggered.
#[derive(Debug, Clone, PartialEq)]
pub struct FillOutcome {
    pub events: Vec<FillEvent>,
    pub report: RunReport,
}

impl FillOutcome {
    pub fn firings(&self) -> impl Iterator<Item = &Firing> {
        self.report.firings()
    }
}

/// Everything a document needs to be persisted and restored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSnapshot {
    pub template: Ident,
    pub state: State,
    pub history: Vec<FillEvent>,
    pub annotations: Vec<Annotation>,
    /// Entries of the `annotations` scope already turned into annotations.
    pub lifted: usize,
    pub refraction: Refraction,
    pub trace: Vec<TraceEvent>,
}

pub struct Document {
    template: Template,
    datoms: Arc<DatomRegistry>,
    registry: Arc<Registry>,
    controls: Vec<ControlStructure>,
    pub config: EngineConfig,
    clock: Arc<dyn Clock>,
    state: State,
    history: Vec<FillEvent>,
    annotations: AnnotationStore,
    lifted: usize,
    refraction: Refraction,
    trace: Vec<TraceEvent>,
}

impl std::fmt::Debug for Document {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Document").field("template", &self.template.name).field("values", &self.values()).field("history", &self.history.len()).finish()
    }
}

fn id(s: &str) -> Ident {
    Ident::new(s).expect("identifier")
}

impl Document {
    /// A blank document. Every mechanism must be bound to `template` and validate against
    /// the document registry.
    pub fn open(template: Template, datoms: Arc<DatomRegistry>, mechanisms: &[MechanismDecl], clock: Arc<dyn Clock>) -> Result<Self, WoadError> {
        let registry = super::registry(datoms.clone(), &template)?;
        for m in mechanisms {
            check_mechanism(m, &template, &datoms)?;
            let report = validate_bundle(&Bundle { mechanisms: vec![m.clone()], ..Bundle::default() }, &registry);
            if !report.is_empty() {
                return Err(WoadError::InvalidMechanism { mechanism: m.name.to_string(), report });
            }
        }
        let controls = mechanisms.iter().flat_map(|m| m.rules.iter().cloned().map(ControlStructure::Rule)).collect();
        let mut state = State::new(id(DOC));
        {
            let mut ctx = EffectCtx::new(&registry, &mut state);
            for d in &template.didgets {
                let args = [
                    Selector::Entry(StateRef::scoped(id(DOC), d.datom.clone())),
                    Selector::Constant(Value::Decimal(d.at.x)),
                    Selector::Constant(Value::Decimal(d.at.y)),
                ];
                registry.perform("localize", &args, &mut ctx)?;
            }
        }
        Ok(Document {
            template,
            datoms,
            registry: Arc::new(registry),
            controls,
            config: EngineConfig::default(),
            clock,
            state,
            history: Vec::new(),
            annotations: AnnotationStore::new(),
            lifted: 0,
            refraction: Refraction::default(),
            trace: Vec::new(),
        })
    }

    pub fn restore(
        snapshot: DocumentSnapshot,
        template: Template,
        datoms: Arc<DatomRegistry>,
        mechanisms: &[MechanismDecl],
        clock: Arc<dyn Clock>,
    ) -> Result<Self, WoadError> {
        let mut doc = Document::open(template, datoms, mechanisms, clock)?;
        doc.state = snapshot.state;
        doc.history = snapshot.history;
        doc.annotations = AnnotationStore::from_annotations(snapshot.annotations)?;
        doc.lifted = snapshot.lifted;
        doc.refraction = snapshot.refraction;
        doc.trace = snapshot.trace;
        Ok(doc)
    }

    pub fn snapshot(&self) -> DocumentSnapshot {
        DocumentSnapshot {
            template: self.template.name.clone(),
            state: self.state.clone(),
            history: self.history.clone(),
            annotations: self.annotations.as_slice().to_vec(),
            lifted: self.lifted,
            refraction: self.refraction.clone(),
            trace: self.trace.clone(),
        }
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn history(&self) -> &[FillEvent] {
        &self.history
    }

    pub fn annotations(&self) -> &AnnotationStore {
        &self.annotations
    }

    /// Every mechanism run so far, concatenated.
    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Current value of every filled leaf.
    pub fn values(&self) -> BTreeMap<Ident, Value> {
        self.state.scope(DOC).cloned().unwrap_or_default()
    }

    /// A datom's value; composites read as nested records of their filled leaves.
    pub fn value(&self, datom: &str) -> Option<Value> {
        datom_value(&self.datoms, datom, &self.values())
    }

    /// Style symbols currently applied to a didget.
    pub fn style(&self, didget: &str) -> Vec<String> {
        match self.state.lookup("style", didget) {
            Some(Value::List(xs)) => xs.iter().filter_map(|v| v.as_text().map(str::to_string)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn styles(&self) -> BTreeMap<Ident, Value> {
        self.state.scope("style").cloned().unwrap_or_default()
    }

    /// Filled leaves under a datom.
    pub fn count(&self, datom: &str) -> Result<usize, WoadError> {
        let values = self.values();
        Ok(self.datoms.leaves(datom)?.iter().filter(|l| values.contains_key(*l)).count())
    }

    fn leaf(&self, didget: &str) -> Result<Ident, WoadError> {
        let leaves = self.template.leaves(&self.datoms)?;
        leaves.into_iter().find(|l| l == didget).ok_or_else(|| WoadError::UnknownDidget { template: self.template.name.to_string(), didget: didget.into() })
    }

    /// Sets a leaf's value, then runs the mechanisms to quiescence. Atomic: if a mechanism
    /// fails, the document is left as it was.
    pub fn fill(&mut self, didget: &str, value: Value, author: &str) -> Result<FillOutcome, WoadError> {
        let leaf = self.leaf(didget)?;
        let ty = self.datoms.get(leaf.as_str()).expect("leaf is registered").ty;
        let value = match (ty, value) {
            (lob_core::TypeTag::Decimal, Value::Integer(i)) => Value::Decimal(i as f64),
            (ty, v) if ty.accepts(&v) => v,
            (ty, v) => return Err(WoadError::TypeMismatch { didget: leaf.to_string(), expected: ty, found: v.type_tag() }),
        };
        if flagged(&self.state, "protected", DOC, leaf.as_str()) {
            return Err(WoadError::Protected(format!("{DOC}.{leaf}")));
        }
        self.transact(author, |state, _| Ok(vec![state.set(id(DOC), leaf, value)]))
    }

    /// Invokes an actional operator on the document as `author`, then runs the mechanisms.
    pub fn act(&mut self, operator: &str, args: &[Selector], author: &str) -> Result<FillOutcome, WoadError> {
        let registry = self.registry.clone();
        self.transact(author, |state, lift| {
            let mut ctx = EffectCtx::new(&registry, state);
            registry.perform(operator, args, &mut ctx)?;
            *lift = true;
            Ok(ctx.deltas)
        })
    }

    /// Attaches a note to a didget.
    pub fn annotate(&mut self, didget: &str, note: Value, author: &str) -> Result<Ident, WoadError> {
        if self.template.placement(didget).is_none() {
            self.leaf(didget)?;
        }
        let args = [Selector::Entry(StateRef::scoped(id(DOC), id(didget))), Selector::Constant(note)];
        self.act("annotate", &args, author)?;
        self.annotations.as_slice().last().map(|a| a.id.clone()).ok_or_else(|| WoadError::UnknownDatom(didget.into()))
    }

    /// Replies to an annotation, starting or extending a thread.
    pub fn reply(&mut self, to: &str, note: Value, author: &str) -> Result<Ident, WoadError> {
        let parent = self.annotations.get(to).map(|a| a.id.clone()).ok_or_else(|| WoadError::Eval(lob_engine::EvalError::Unbound(to.into())))?;
        let aid = self.next_annotation_id();
        let a = Annotation::new(aid.clone(), AnnotationBody::Constant(note), vec![TargetRef::to_annotation(id("ref"), &parent)], author, self.clock.now())?;
        self.annotations.insert(a)?;
        Ok(aid)
    }

    fn next_annotation_id(&self) -> Ident {
        Ident::new(format!("note-{}", self.annotations.len() + 1)).expect("identifier")
    }

    fn transact(&mut self, author: &str, change: impl FnOnce(&mut State, &mut bool) -> Result<Vec<StateDelta>, WoadError>) -> Result<FillOutcome, WoadError> {
        let saved = (self.state.clone(), self.refraction.clone(), self.annotations.clone(), self.lifted);
        let result = self.transact_inner(author, change);
        if result.is_err() {
            (self.state, self.refraction, self.annotations, self.lifted) = saved;
        }
        result
    }

    fn transact_inner(
        &mut self,
        author: &str,
        change: impl FnOnce(&mut State, &mut bool) -> Result<Vec<StateDelta>, WoadError>,
    ) -> Result<FillOutcome, WoadError> {
        let mut lift = false;
        let deltas = change(&mut self.state, &mut lift)?;
        let mut events = self.events_from(&deltas, author);
        if lift {
            self.lift_annotations(author)?;
        }
        let engine = Engine::with_config(&self.registry, self.config);
        let report = engine.run(&mut self.state, &self.controls, &mut self.refraction)?;
        for f in report.firings() {
            events.extend(self.events_from(&f.deltas, &format!("mechanism/{}", f.rule)));
        }
        self.lift_annotations("mechanism")?;
        self.history.extend(events.iter().cloned());
        self.trace.extend(report.trace.iter().cloned());
        Ok(FillOutcome { events, report })
    }

    fn events_from(&self, deltas: &[StateDelta], author: &str) -> Vec<FillEvent> {
        deltas
            .iter()
            .filter(|d| d.scope() == DOC)
            .map(|d| {
                let (old, new) = match d {
                    StateDelta::Set { old, new, .. } => (old.clone(), Some(new.clone())),
                    StateDelta::Removed { old, .. } => (Some(old.clone()), None),
                };
                FillEvent { at: self.clock.now(), didget: d.name().clone(), old, new, author: author.to_string() }
            })
            .collect()
    }

    /// Turns new `annotations` records that target a didget into annotations.
    fn lift_annotations(&mut self, author: &str) -> Result<(), WoadError> {
        let records = self.state.scope_values("annotations");
        for r in records.iter().skip(self.lifted) {
            self.lifted += 1;
            let Some(fields) = r.as_record() else { continue };
            let (Some(Value::Text(target)), Some(note)) = (fields.get("target"), fields.get("note")) else { continue };
            let name = target.strip_prefix("doc.").unwrap_or(target);
            let known = self.template.placement(name).is_some() || self.leaf(name).is_ok();
            if !known {
                continue;
            }
            let t = TargetRef::new(id("ref"), TargetKind::TopologicalObject, vec![self.template.name.to_string(), name.to_string()])?;
            let a = Annotation::new(self.next_annotation_id(), AnnotationBody::Constant(note.clone()), vec![t], author, self.clock.now())?;
            self.annotations.insert(a)?;
        }
        Ok(())
    }
}
