//! A project: definitions plus the live documents, community society and workspaces
//! built from them. Operations here are synchronous and all-or-nothing; callers work on
//! a clone and keep it only on success.

use std::collections::BTreeMap;
use std::sync::Arc;

use lob_core::bundle::{ComponentDecl, EntityDecl, MechanismDecl, WorkspaceDecl};
use lob_core::validate::validate_bundle;
use lob_core::{Bundle, Ident, OperatorConstruct, Selector, ValidationReport, Value, WebStructure};
use lob_dsl::{parse_document, print_bundle, Diagnostic, SourceText};
use lob_engine::{EngineConfig, Registry, TraceEvent};
use lob_profiles::casmas::{Casmas, CasmasError, CasmasSnapshot};
use lob_profiles::flow::{FlowError, Workspace, WorkspaceSnapshot};
use lob_profiles::woad::{self, Datom, DatomRegistry, Didget, Document, DocumentSnapshot, Template, WoadError};
use lob_profiles::Clock;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("no {kind} named `{name}`")]
    NotFound { kind: &'static str, name: String },
    #[error("the source has {} error(s)", .0.len())]
    Diagnostics(Vec<Diagnostic>),
    #[error("validation failed:\n{0}")]
    Invalid(ValidationReport),
    #[error("{0}")]
    Rejected(String),
    #[error("`{0}` is still in use")]
    InUse(String),
    #[error("malformed request body: {0}")]
    Body(String),
    #[error(transparent)]
    Woad(#[from] WoadError),
    #[error(transparent)]
    Casmas(#[from] CasmasError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

fn not_found(kind: &'static str, name: &str) -> ProjectError {
    ProjectError::NotFound { kind, name: name.into() }
}

fn ident(s: &str) -> Result<Ident, ProjectError> {
    Ident::new(s).map_err(|e| ProjectError::Rejected(e.to_string()))
}

/// Community spaces and entities, with the trace of every round and post so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Society {
    pub snapshot: CasmasSnapshot,
    #[serde(default)]
    pub trace: Vec<String>,
}

impl Default for Society {
    fn default() -> Self {
        Society { snapshot: Casmas::default().snapshot(), trace: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredWorkspace {
    pub snapshot: WorkspaceSnapshot,
    #[serde(default)]
    pub trace: Vec<String>,
}

/// A file of the store that an operation changed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Touched {
    Definitions,
    Society,
    Document(Ident),
    Workspace(Ident),
}

/// One line of a resource's trace, as sent on the event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub resource: String,
    pub line: String,
}

/// What a mutation did: the response body, the files to rewrite, the trace lines to stream.
#[derive(Debug, Default)]
pub struct Outcome {
    pub body: serde_json::Value,
    pub touched: Vec<Touched>,
    pub lines: Vec<TraceLine>,
}

impl Outcome {
    fn new(body: serde_json::Value, touched: Touched) -> Self {
        Outcome { body, touched: vec![touched], lines: Vec::new() }
    }

    fn report(touched: Touched) -> Self {
        Outcome::new(json!({ "report": ValidationReport::default() }), touched)
    }
}

/// Who is acting and with which engine settings.
#[derive(Clone)]
pub struct Actor {
    pub author: String,
    pub config: EngineConfig,
    pub clock: Arc<dyn Clock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub name: Ident,
    /// Operators, datoms, templates, mechanisms, components and any free-standing rules,
    /// states and annotations.
    pub definitions: Bundle,
    pub society: Society,
    pub documents: BTreeMap<Ident, DocumentSnapshot>,
    pub workspaces: BTreeMap<Ident, StoredWorkspace>,
}

/// The resource kinds addressable by name.
pub const KINDS: [&str; 9] = ["operators", "datoms", "templates", "mechanisms", "components", "entities", "communities", "documents", "workspaces"];

fn body<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T, ProjectError> {
    serde_json::from_value(v).map_err(|e| ProjectError::Body(e.to_string()))
}

fn upsert<T>(items: &mut Vec<T>, item: T, same: impl Fn(&T) -> bool) {
    match items.iter().position(same) {
        Some(i) => items[i] = item,
        None => items.push(item),
    }
}

fn remove<T>(items: &mut Vec<T>, kind: &'static str, name: &str, same: impl Fn(&T) -> bool) -> Result<T, ProjectError> {
    let i = items.iter().position(same).ok_or_else(|| not_found(kind, name))?;
    Ok(items.remove(i))
}

fn engine_lines(resource: &str, trace: &[TraceEvent]) -> Vec<TraceLine> {
    trace.iter().map(|e| TraceLine { resource: resource.to_string(), line: e.to_line() }).collect()
}

impl Project {
    pub fn new(name: Ident) -> Self {
        Project { name, definitions: Bundle::default(), society: Society::default(), documents: BTreeMap::new(), workspaces: BTreeMap::new() }
    }

    /// Every profile's operators plus the operators defined here.
    pub fn registry(&self) -> Result<Registry, ProjectError> {
        let mut r = lob_profiles::registry();
        r.register_bundle(&Bundle { operators: self.definitions.operators.clone(), ..Bundle::default() }).map_err(|e| ProjectError::Rejected(e.to_string()))?;
        Ok(r)
    }

    fn check_definitions(defs: &Bundle) -> Result<(), ProjectError> {
        let report = validate_bundle(defs, &lob_profiles::registry());
        if !report.is_empty() {
            return Err(ProjectError::Invalid(report));
        }
        woad::from_bundle(defs)?;
        Ok(())
    }

    pub fn datoms(&self) -> Result<DatomRegistry, ProjectError> {
        Ok(DatomRegistry::from_operands(&self.definitions.operands, false)?)
    }

    pub fn templates(&self) -> Result<Vec<Template>, ProjectError> {
        Ok(woad::from_bundle(&self.definitions)?.1)
    }

    fn template(&self, name: &str) -> Result<Template, ProjectError> {
        self.templates()?.into_iter().find(|t| t.name == name).ok_or_else(|| not_found("template", name))
    }

    fn mechanisms_for(&self, template: &str) -> Vec<MechanismDecl> {
        self.definitions.mechanisms.iter().filter(|m| m.template == template).cloned().collect()
    }

    pub fn society(&self) -> Result<Casmas, ProjectError> {
        Ok(Casmas::restore(self.society.snapshot.clone(), self.registry()?)?)
    }

    pub fn document(&self, id: &str, clock: Arc<dyn Clock>) -> Result<Document, ProjectError> {
        let snap = self.documents.get(id).ok_or_else(|| not_found("document", id))?;
        let template = self.template(snap.template.as_str())?;
        let mechanisms = self.mechanisms_for(snap.template.as_str());
        Ok(Document::restore(snap.clone(), template, Arc::new(self.datoms()?), &mechanisms, clock)?)
    }

    pub fn workspace(&self, name: &str) -> Result<Workspace, ProjectError> {
        let w = self.workspaces.get(name).ok_or_else(|| not_found("workspace", name))?;
        Ok(Workspace::restore(w.snapshot.clone(), self.registry()?)?)
    }

    /// Canonical text of the definitions.
    pub fn definitions_text(&self) -> String {
        print_bundle(&self.definitions)
    }

    /// Entities and communities as text.
    pub fn society_text(&self) -> String {
        let s = &self.society.snapshot;
        print_bundle(&Bundle { entities: s.entities.clone(), communities: s.communities.clone(), ..Bundle::default() })
    }

    /// Merges a `.lob` source. Items replace same-named ones. Entities and communities join
    /// the society; workspaces are (re)built from the merged components.
    pub fn import(&mut self, origin: &str, text: &str) -> Result<Outcome, ProjectError> {
        let mut base = lob_profiles::registry();
        let kept: Vec<OperatorConstruct> = {
            let incoming = lob_dsl::parse(text).bundle.operators;
            self.definitions.operators.iter().filter(|o| !incoming.iter().any(|n| n.name == o.name)).cloned().collect()
        };
        base.register_bundle(&Bundle { operators: kept, ..Bundle::default() }).map_err(|e| ProjectError::Rejected(e.to_string()))?;
        let b = parse_document(&SourceText::new(origin, text), &base).map_err(ProjectError::Diagnostics)?;
        let mut touched = Vec::new();
        let d = &mut self.definitions;
        let defs_before = d.clone();
        for o in &b.operators {
            upsert(&mut d.operators, o.clone(), |x| x.name == o.name);
        }
        for o in &b.operands {
            upsert(&mut d.operands, o.clone(), |x| x.name == o.name);
        }
        for w in &b.webs {
            upsert(&mut d.webs, w.clone(), |x| x.name == w.name);
        }
        for m in &b.mechanisms {
            upsert(&mut d.mechanisms, m.clone(), |x| x.name == m.name);
        }
        for c in &b.components {
            upsert(&mut d.components, c.clone(), |x| x.id == c.id);
        }
        for a in &b.annotations {
            upsert(&mut d.annotations, a.clone(), |x| x.id == a.id);
        }
        for s in &b.states {
            upsert(&mut d.states, s.clone(), |x| x.scope == s.scope);
        }
        if !b.controls.is_empty() {
            d.controls = b.controls.clone();
        }
        if *d != defs_before {
            Project::check_definitions(d)?;
            touched.push(Touched::Definitions);
        }
        if !b.entities.is_empty() || !b.communities.is_empty() {
            let mut society = self.society()?;
            for c in &b.communities {
                if !society.communities().iter().any(|x| x.name == c.name) {
                    society.add_community(c.name.clone())?;
                }
            }
            for e in &b.entities {
                if society.entity(e.id.as_str()).is_some() {
                    society.remove_entity(e.id.as_str())?;
                }
                society.add_entity(e.clone())?;
            }
            for c in &b.communities {
                for f in &c.facts {
                    society.post(f.owner.as_str(), f.pairs.clone(), c.name.as_str())?;
                }
            }
            self.society.snapshot = society.snapshot();
            touched.push(Touched::Society);
        }
        for decl in &b.workspaces {
            let w = Workspace::from_decl(decl, &self.definitions.components, self.registry()?)?;
            self.workspaces.insert(decl.name.clone(), StoredWorkspace { snapshot: w.snapshot(), trace: Vec::new() });
            touched.push(Touched::Workspace(decl.name.clone()));
        }
        Ok(Outcome { body: json!({ "report": ValidationReport::default(), "imported": summary(&b) }), touched, lines: Vec::new() })
    }

    pub fn list(&self, kind: &str) -> Result<Vec<String>, ProjectError> {
        let d = &self.definitions;
        let s = &self.society.snapshot;
        let names: Vec<String> = match kind {
            "operators" => d.operators.iter().map(|o| o.name.to_string()).collect(),
            "datoms" => self.datoms()?.iter().map(|x| x.name.to_string()).collect(),
            "templates" => self.templates()?.iter().map(|t| t.name.to_string()).collect(),
            "mechanisms" => d.mechanisms.iter().map(|m| m.name.to_string()).collect(),
            "components" => d.components.iter().map(|c| c.id.to_string()).collect(),
            "entities" => s.entities.iter().map(|e| e.id.to_string()).collect(),
            "communities" => s.communities.iter().map(|c| c.name.to_string()).collect(),
            "documents" => self.documents.keys().map(Ident::to_string).collect(),
            "workspaces" => self.workspaces.keys().map(Ident::to_string).collect(),
            other => return Err(not_found("resource kind", other)),
        };
        Ok(names)
    }

    pub fn get(&self, kind: &str, name: &str, clock: Arc<dyn Clock>) -> Result<serde_json::Value, ProjectError> {
        let d = &self.definitions;
        let found = |v: Option<serde_json::Value>, k: &'static str| v.ok_or_else(|| not_found(k, name));
        match kind {
            "operators" => found(d.operators.iter().find(|o| o.name == name).map(|o| json!(o)), "operator"),
            "datoms" => found(self.datoms()?.get(name).map(|x| json!(x)), "datom"),
            "templates" => Ok(json!(self.template(name)?)),
            "mechanisms" => found(d.mechanisms.iter().find(|m| m.name == name).map(|m| json!(m)), "mechanism"),
            "components" => found(d.components.iter().find(|c| c.id == name).map(|c| json!(c)), "component"),
            "entities" => found(self.society.snapshot.entities.iter().find(|e| e.id == name).map(|e| json!(e)), "entity"),
            "communities" => {
                let society = self.society()?;
                let facts = society.space(name).map_err(|_| not_found("community", name))?;
                let facts: Vec<_> = facts.iter().map(|f| json!({ "owner": f.owner, "fact": plain_record(&f.pairs) })).collect();
                Ok(json!({ "name": name, "members": society.members(name), "facts": facts }))
            }
            "documents" => {
                let doc = self.document(name, clock)?;
                Ok(json!({
                    "template": doc.template().name,
                    "values": plain_record(&doc.values()),
                    "styles": plain_record(&doc.styles()),
                    "history": doc.history(),
                    "annotations": doc.annotations().as_slice(),
                }))
            }
            "workspaces" => {
                let w = self.workspaces.get(name).ok_or_else(|| not_found("workspace", name))?;
                Ok(json!(w.snapshot))
            }
            other => Err(not_found("resource kind", other)),
        }
    }

    /// Creates or replaces a named resource from its JSON form.
    pub fn put(&mut self, kind: &str, name: &str, v: serde_json::Value, actor: &Actor) -> Result<Outcome, ProjectError> {
        let name_id = ident(name)?;
        let same_name = |got: &Ident| -> Result<(), ProjectError> {
            if *got != name_id {
                return Err(ProjectError::Rejected(format!("body names `{got}`, path names `{name_id}`")));
            }
            Ok(())
        };
        match kind {
            "operators" => {
                let op: OperatorConstruct = body(v)?;
                same_name(&op.name)?;
                if lob_core::ConstructLookup::signature(&lob_profiles::registry(), name).is_some() {
                    return Err(ProjectError::Rejected(format!("`{name}` is a built-in operator")));
                }
                self.put_definition(|d| upsert(&mut d.operators, op.clone(), |x| x.name == op.name))
            }
            "datoms" => {
                let datom: Datom = body(v)?;
                same_name(&datom.name)?;
                let mut datoms = self.datoms()?;
                if datoms.get(name).is_some() {
                    return Err(ProjectError::Rejected(format!("datom `{name}` already exists; datoms are immutable once defined")));
                }
                if datom.is_composite() {
                    datoms.compose(datom.name.clone(), datom.children.clone())?;
                } else {
                    datoms.define(datom.name.clone(), datom.ty)?;
                }
                let operand = datoms.to_operands().pop().expect("just defined");
                self.put_definition(|d| d.operands.push(operand.clone()))
            }
            "templates" => {
                #[derive(Deserialize)]
                struct Req {
                    didgets: Vec<Didget>,
                }
                let req: Req = body(v)?;
                let datoms = self.datoms()?;
                let t = Template::new(name_id.clone(), req.didgets.into_iter().map(|d| (d.datom, d.at)).collect(), &datoms)?;
                let web = WebStructure::single(t.to_layout(&datoms)?);
                self.put_definition(|d| upsert(&mut d.webs, web.clone(), |x| x.name == web.name))
            }
            "mechanisms" => {
                let m: MechanismDecl = body(v)?;
                same_name(&m.name)?;
                if let Ok(t) = self.template(m.template.as_str()) {
                    woad::check_mechanism(&m, &t, &self.datoms()?)?;
                }
                self.put_definition(|d| upsert(&mut d.mechanisms, m.clone(), |x| x.name == m.name))
            }
            "components" => {
                let c: ComponentDecl = body(v)?;
                same_name(&c.id)?;
                let mut scratch = Workspace::new(ident("scratch")?, self.registry()?);
                scratch.add_component(c.clone())?;
                self.put_definition(|d| upsert(&mut d.components, c.clone(), |x| x.id == c.id))
            }
            "entities" => {
                let e: EntityDecl = body(v)?;
                same_name(&e.id)?;
                let mut society = self.society()?;
                if society.entity(name).is_some() {
                    society.remove_entity(name)?;
                }
                society.add_entity(e)?;
                self.society.snapshot = society.snapshot();
                Ok(Outcome::report(Touched::Society))
            }
            "communities" => {
                let mut society = self.society()?;
                if !society.communities().iter().any(|c| c.name == name) {
                    society.add_community(name_id)?;
                }
                self.society.snapshot = society.snapshot();
                Ok(Outcome::report(Touched::Society))
            }
            "documents" => {
                #[derive(Deserialize)]
                struct Req {
                    template: Ident,
                }
                let req: Req = body(v)?;
                if self.documents.contains_key(name) {
                    return Err(ProjectError::Rejected(format!("document `{name}` already exists")));
                }
                let template = self.template(req.template.as_str())?;
                let mechanisms = self.mechanisms_for(req.template.as_str());
                let mut doc = Document::open(template, Arc::new(self.datoms()?), &mechanisms, actor.clock.clone())?;
                doc.config = actor.config;
                self.documents.insert(name_id.clone(), doc.snapshot());
                Ok(Outcome::report(Touched::Document(name_id)))
            }
            "workspaces" => {
                let decl: WorkspaceDecl = body(v)?;
                same_name(&decl.name)?;
                let w = Workspace::from_decl(&decl, &self.definitions.components, self.registry()?)?;
                self.workspaces.insert(name_id.clone(), StoredWorkspace { snapshot: w.snapshot(), trace: Vec::new() });
                Ok(Outcome::report(Touched::Workspace(name_id)))
            }
            other => Err(not_found("resource kind", other)),
        }
    }

    fn put_definition(&mut self, change: impl FnOnce(&mut Bundle)) -> Result<Outcome, ProjectError> {
        let mut defs = self.definitions.clone();
        change(&mut defs);
        Project::check_definitions(&defs)?;
        self.definitions = defs;
        Ok(Outcome::report(Touched::Definitions))
    }

    pub fn delete(&mut self, kind: &str, name: &str) -> Result<Outcome, ProjectError> {
        let d = &mut self.definitions;
        match kind {
            "operators" => {
                remove(&mut d.operators, "operator", name, |x| x.name == name)?;
            }
            "datoms" => {
                let used = self.templates()?.iter().any(|t| t.didgets.iter().any(|g| g.datom == name))
                    || self.datoms()?.iter().any(|x| x.children.iter().any(|c| c == name));
                if used {
                    return Err(ProjectError::InUse(name.into()));
                }
                remove(&mut self.definitions.operands, "datom", name, |x| x.name == name)?;
            }
            "templates" => {
                if self.documents.values().any(|s| s.template == name) {
                    return Err(ProjectError::InUse(name.into()));
                }
                remove(&mut d.webs, "template", name, |x| x.name == name)?;
            }
            "mechanisms" => {
                remove(&mut d.mechanisms, "mechanism", name, |x| x.name == name)?;
            }
            "components" => {
                remove(&mut d.components, "component", name, |x| x.id == name)?;
            }
            "entities" | "communities" => {
                let mut society = self.society()?;
                if kind == "entities" {
                    society.remove_entity(name)?;
                } else {
                    society.remove_community(name)?;
                }
                self.society.snapshot = society.snapshot();
                return Ok(Outcome::report(Touched::Society));
            }
            "documents" => {
                self.documents.remove(name).ok_or_else(|| not_found("document", name))?;
                return Ok(Outcome::report(Touched::Document(ident(name)?)));
            }
            "workspaces" => {
                self.workspaces.remove(name).ok_or_else(|| not_found("workspace", name))?;
                return Ok(Outcome::report(Touched::Workspace(ident(name)?)));
            }
            other => return Err(not_found("resource kind", other)),
        }
        Project::check_definitions(&self.definitions)?;
        Ok(Outcome::report(Touched::Definitions))
    }

    /// Runs an action on a named resource: `fill`, `act`, `annotate` on documents;
    /// `post`, `round` on communities; `propagate`, `publish`, `replace-filter` on workspaces.
    pub fn action(&mut self, kind: &str, name: &str, action: &str, v: serde_json::Value, actor: &Actor) -> Result<Outcome, ProjectError> {
        match (kind, action) {
            ("documents", "fill" | "act" | "annotate") => self.document_action(name, action, v, actor),
            ("communities", "post") => {
                #[derive(Deserialize)]
                struct Req {
                    entity: Ident,
                    fact: serde_json::Value,
                }
                let req: Req = body(v)?;
                let fact = match from_plain_json(&req.fact).map_err(ProjectError::Body)? {
                    Value::Record(pairs) => pairs,
                    _ => return Err(ProjectError::Body("`fact` must be an object".into())),
                };
                let mut society = self.society()?;
                society.post(req.entity.as_str(), fact.clone(), name)?;
                let line = format!("P\t{}\t{}\t{name}\t{}", society.rounds(), req.entity, serde_json::to_string(&fact).expect("facts serialize"));
                self.society.snapshot = society.snapshot();
                self.society.trace.push(line.clone());
                let lines = vec![TraceLine { resource: format!("communities/{name}"), line }];
                Ok(Outcome { body: json!({ "report": ValidationReport::default() }), touched: vec![Touched::Society], lines })
            }
            ("communities", "round") => {
                let mut society = self.society()?;
                let r = society.round_of(name)?;
                let resource = format!("communities/{name}");
                let mut lines = Vec::new();
                for (e, f) in &r.firings {
                    lines.push(format!("E\t{e}\t{}", TraceEvent::Fired(f.clone()).to_line()));
                }
                for (c, p) in &r.posted {
                    lines.push(format!("P\t{}\t{}\t{c}\t{}", r.round, p.owner, serde_json::to_string(&p.pairs).expect("facts serialize")));
                }
                for (c, p) in &r.rejected {
                    lines.push(format!("R\t{}\t{}\t{c}\t{}", r.round, p.owner, serde_json::to_string(&p.pairs).expect("facts serialize")));
                }
                self.society.snapshot = society.snapshot();
                self.society.trace.extend(lines.iter().cloned());
                let body = json!({ "round": r.round, "summary": r.summary(), "calls": r.calls, "rejected": r.rejected.len() });
                let lines = lines.into_iter().map(|line| TraceLine { resource: resource.clone(), line }).collect();
                Ok(Outcome { body, touched: vec![Touched::Society], lines })
            }
            ("workspaces", "propagate" | "publish" | "replace-filter") => self.workspace_action(name, action, v),
            _ => Err(not_found("action", &format!("{kind}/{action}"))),
        }
    }

    fn document_action(&mut self, name: &str, action: &str, v: serde_json::Value, actor: &Actor) -> Result<Outcome, ProjectError> {
        #[derive(Deserialize)]
        struct Req {
            #[serde(default)]
            didget: Option<String>,
            #[serde(default)]
            value: Option<serde_json::Value>,
            #[serde(default)]
            operator: Option<String>,
            #[serde(default)]
            args: Vec<Selector>,
            #[serde(default)]
            note: Option<serde_json::Value>,
            /// Replying to an annotation instead of a didget.
            #[serde(default)]
            reply_to: Option<String>,
        }
        let req: Req = body(v)?;
        let missing = |f: &str| ProjectError::Body(format!("`{f}` is required for {action}"));
        let mut doc = self.document(name, actor.clock.clone())?;
        doc.config = actor.config;
        let before = doc.trace().len();
        let body = match action {
            "fill" => {
                let out =
                    doc.fill(req.didget.as_deref().ok_or_else(|| missing("didget"))?, plain(req.value.ok_or_else(|| missing("value"))?)?, &actor.author)?;
                json!({ "events": out.events, "halt": out.report.halt })
            }
            "act" => {
                let out = doc.act(req.operator.as_deref().ok_or_else(|| missing("operator"))?, &req.args, &actor.author)?;
                json!({ "events": out.events, "halt": out.report.halt })
            }
            _ => {
                let note = plain(req.note.ok_or_else(|| missing("note"))?)?;
                let id = match (req.reply_to, req.didget) {
                    (Some(parent), _) => doc.reply(&parent, note, &actor.author)?,
                    (None, Some(didget)) => doc.annotate(&didget, note, &actor.author)?,
                    (None, None) => return Err(missing("didget")),
                };
                json!({ "annotation": id })
            }
        };
        let lines = engine_lines(&format!("documents/{name}"), &doc.trace()[before..]);
        let mut body = body;
        body["trace"] = json!(lines.iter().map(|l| &l.line).collect::<Vec<_>>());
        let id = ident(name)?;
        self.documents.insert(id.clone(), doc.snapshot());
        Ok(Outcome { body, touched: vec![Touched::Document(id)], lines })
    }

    fn workspace_action(&mut self, name: &str, action: &str, v: serde_json::Value) -> Result<Outcome, ProjectError> {
        let mut w = self.workspace(name)?;
        let p = match action {
            "propagate" => w.propagate(),
            "publish" => {
                #[derive(Deserialize)]
                struct Req {
                    emitter: String,
                    kind: Ident,
                    payload: serde_json::Value,
                }
                let req: Req = body(v)?;
                w.publish(&req.emitter, req.kind, plain(req.payload)?)?;
                w.drain()
            }
            _ => {
                #[derive(Deserialize)]
                struct Req {
                    old: String,
                    new: ComponentDecl,
                }
                let req: Req = body(v)?;
                w.replace_filter(&req.old, req.new)?
            }
        };
        let resource = format!("workspaces/{name}");
        let lines: Vec<TraceLine> = p.records.iter().map(|r| TraceLine { resource: resource.clone(), line: r.to_line() }).collect();
        let stored = self.workspaces.get_mut(name).expect("workspace restored above");
        stored.snapshot = w.snapshot();
        stored.trace.extend(lines.iter().map(|l| l.line.clone()));
        let body = json!({
            "capped": p.capped,
            "updates": p.updates(),
            "data_view": plain_record(w.data_view()),
            "trace": lines.iter().map(|l| &l.line).collect::<Vec<_>>(),
        });
        Ok(Outcome { body, touched: vec![Touched::Workspace(ident(name)?)], lines })
    }
}

/// Plain JSON as a value: objects become records, arrays lists, whole numbers integers.
pub fn from_plain_json(v: &serde_json::Value) -> Result<Value, String> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => return Err("null is not a value".into()),
        J::Bool(b) => Value::Boolean(*b),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Integer(i),
            None => Value::Decimal(n.as_f64().ok_or_else(|| format!("{n} is out of range"))?),
        },
        J::String(s) => Value::Text(s.clone()),
        J::Array(xs) => Value::List(xs.iter().map(from_plain_json).collect::<Result<_, _>>()?),
        J::Object(fs) => Value::Record(
            fs.iter().map(|(k, v)| Ok((Ident::new(k).map_err(|e| format!("field `{k}`: {e}"))?, from_plain_json(v)?))).collect::<Result<_, String>>()?,
        ),
    })
}

fn plain_record(fields: &BTreeMap<Ident, Value>) -> serde_json::Value {
    fields.iter().map(|(k, v)| (k.to_string(), lob_profiles::flow::plain_json(v))).collect::<serde_json::Map<_, _>>().into()
}

fn plain(v: serde_json::Value) -> Result<Value, ProjectError> {
    from_plain_json(&v).map_err(ProjectError::Body)
}

fn summary(b: &Bundle) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("operators", b.operators.len()),
        ("operands", b.operands.len()),
        ("webs", b.webs.len()),
        ("mechanisms", b.mechanisms.len()),
        ("entities", b.entities.len()),
        ("communities", b.communities.len()),
        ("components", b.components.len()),
        ("workspaces", b.workspaces.len()),
    ])
}
