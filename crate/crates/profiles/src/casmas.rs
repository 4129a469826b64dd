//! Community spaces.
//!
//! Entities keep facts in a local memory and belong to communities, each with a shared
//! space of posted facts. Behaviors are rule sets matched against the entity's memory
//! (scope `self`) and the spaces of its communities (one scope per community).
//!
//! Coordination runs in rounds. Every entity reads the state as it was when the round
//! began; what it posts reaches the spaces only at the end of the round, in entity-id
//! order, so the outcome of a round does not depend on the order entities are listed
//! in. A post from a non-member is dropped at that point.

use std::collections::BTreeMap;
use std::sync::Arc;

use lob_core::bundle::{CommunityDecl, EntityDecl, Pairs, PostedFact, WrapperFn};
use lob_core::validate::validate_bundle;
use lob_core::{Arity, Bundle, FactPattern, Ident, Selector, State, ValidationReport, Value};
use lob_engine::effects::describe;
use lob_engine::{EffectCtx, Engine, EngineError, EvalError, Firing, Refraction, Registry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scope of an entity's own memory.
pub const SELF: &str = "self";
const OUTBOX: &str = "outbox";
const CALLS: &str = "calls";
const RESERVED: [&str; 3] = [SELF, OUTBOX, CALLS];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CasmasError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown community `{0}`")]
    UnknownCommunity(String),
    #[error("`{entity}` is not a member of `{community}`")]
    NotMember { entity: String, community: String },
    #[error("`{0}` is already defined")]
    Duplicate(String),
    #[error("`{0}` is a reserved scope name")]
    Reserved(String),
    #[error("a fact needs at least one attribute-value pair")]
    EmptyFact,
    #[error("`{entity}` stored a non-fact value in its memory")]
    NotAFact { entity: String },
    #[error("wrapper function `{name}` of `{entity}` collides with an existing operator")]
    WrapperCollision { entity: String, name: String },
    #[error("behavior of `{entity}` is malformed:\n{report}")]
    InvalidBehavior { entity: String, report: ValidationReport },
    #[error("`{entity}` wrote into the space of `{community}`; spaces change only through post")]
    SpaceWrite { entity: String, community: String },
    #[error("entity `{entity}`: {source}")]
    Engine { entity: String, source: EngineError },
    #[error("community `{community}` still has members")]
    InUse { community: String },
}

fn id(s: &str) -> Ident {
    Ident::new(s).expect("identifier")
}

fn post_target(ctx: &EffectCtx<'_>, sel: &Selector) -> Result<Ident, EvalError> {
    match sel {
        Selector::Scope(c) => Ok(c.clone()),
        Selector::Entry(r) if r.scope.is_none() => Ok(r.name.clone()),
        other => match ctx.value(other)? {
            Value::Text(t) => Ident::new(t).map_err(|e| EvalError::Refused(e.to_string())),
            _ => Err(EvalError::NotADestination(describe(other))),
        },
    }
}

/// Primitives plus `post(community, fact)`.
pub fn registry() -> Registry {
    let mut r = Registry::with_primitives();
    install(&mut r);
    r
}

/// Adds `post` to `r`.
pub fn install(r: &mut Registry) {
    r.add_effect(
        "post",
        Arity::Exact(2),
        Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| {
            let to = post_target(ctx, &a[0])?;
            let fact = ctx.value(&a[1])?;
            if !fact.as_record().is_some_and(|f| !f.is_empty()) {
                return Err(EvalError::TypeMismatch { op: "post".into(), expected: "a non-empty record".into(), found: fact.type_tag().to_string() });
            }
            ctx.mark(format!("post {to}"));
            let record = BTreeMap::from([(id("to"), Value::Text(to.to_string())), (id("fact"), fact)]);
            ctx.append(id(OUTBOX), Value::Record(record));
            Ok(())
        }),
    )
    .expect("post is fresh");
}

/// A call an entity's behavior made to a wrapped application or device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapperCall {
    pub round: usize,
    pub entity: Ident,
    pub function: Ident,
    pub args: Vec<Value>,
}

impl WrapperCall {
    /// `<round>\t<entity>\t<function>\t<args json>`
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.round, self.entity, self.function, serde_json::to_string(&self.args).expect("values serialize"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub firings: Vec<(Ident, Firing)>,
    /// Posts that reached a space, with their community.
    pub posted: Vec<(Ident, PostedFact)>,
    /// Posts dropped by the membership gate.
    pub rejected: Vec<(Ident, PostedFact)>,
    pub calls: Vec<WrapperCall>,
}

impl RoundReport {
    /// One line per firing and post: `<round> fire <entity> <rule>`, `<round> post <entity> <community>`.
    pub fn summary(&self) -> Vec<String> {
        let fires = self.firings.iter().map(|(e, f)| format!("{} fire {e} {}", self.round, f.rule));
        let posts = self.posted.iter().map(|(c, p)| format!("{} post {} {c}", self.round, p.owner));
        fires.chain(posts).collect()
    }
}

/// Everything needed to rebuild a [`Casmas`] exactly, including what has already fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasmasSnapshot {
    pub entities: Vec<EntityDecl>,
    pub communities: Vec<CommunityDecl>,
    pub refraction: BTreeMap<Ident, Refraction>,
    pub rounds: usize,
    pub calls: Vec<WrapperCall>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quiescence {
    /// Productive rounds only.
    pub rounds: Vec<RoundReport>,
    /// False when the round cap stopped the run.
    pub quiescent: bool,
}

#[derive(Debug, Clone)]
pub struct Casmas {
    base: Registry,
    entities: Vec<EntityDecl>,
    communities: Vec<CommunityDecl>,
    registries: BTreeMap<Ident, Registry>,
    refraction: BTreeMap<Ident, Refraction>,
    rounds: usize,
    calls: Vec<WrapperCall>,
}

impl Default for Casmas {
    fn default() -> Self {
        Casmas::new(registry())
    }
}

impl Casmas {
    /// `base` must provide `post`; see [`registry`].
    pub fn new(base: Registry) -> Self {
        Casmas { base, entities: Vec::new(), communities: Vec::new(), registries: BTreeMap::new(), refraction: BTreeMap::new(), rounds: 0, calls: Vec::new() }
    }

    /// Communities, then entities, then the facts already in each space.
    pub fn from_bundle(bundle: &Bundle, base: Registry) -> Result<Self, CasmasError> {
        let mut c = Casmas::new(base);
        for cm in &bundle.communities {
            c.add_community(cm.name.clone())?;
        }
        for e in &bundle.entities {
            c.add_entity(e.clone())?;
        }
        for cm in &bundle.communities {
            for f in &cm.facts {
                c.post(f.owner.as_str(), f.pairs.clone(), cm.name.as_str())?;
            }
        }
        Ok(c)
    }

    pub fn snapshot(&self) -> CasmasSnapshot {
        CasmasSnapshot {
            entities: self.entities.clone(),
            communities: self.communities.clone(),
            refraction: self.refraction.clone(),
            rounds: self.rounds,
            calls: self.calls.clone(),
        }
    }

    /// Rebuilds from a snapshot, revalidating every entity against `base`.
    pub fn restore(snapshot: CasmasSnapshot, base: Registry) -> Result<Self, CasmasError> {
        let mut c = Casmas::new(base);
        for cm in &snapshot.communities {
            c.add_community(cm.name.clone())?;
        }
        for e in snapshot.entities {
            c.add_entity(e)?;
        }
        c.communities = snapshot.communities;
        for (e, r) in snapshot.refraction {
            if c.refraction.contains_key(&e) {
                c.refraction.insert(e, r);
            }
        }
        c.rounds = snapshot.rounds;
        c.calls = snapshot.calls;
        Ok(c)
    }

    pub fn to_bundle(&self) -> Bundle {
        Bundle { entities: self.entities.clone(), communities: self.communities.clone(), ..Bundle::default() }
    }

    pub fn add_community(&mut self, name: Ident) -> Result<(), CasmasError> {
        if RESERVED.contains(&name.as_str()) {
            return Err(CasmasError::Reserved(name.to_string()));
        }
        if self.communities.iter().any(|c| c.name == name) {
            return Err(CasmasError::Duplicate(name.to_string()));
        }
        self.communities.push(CommunityDecl { name, facts: Vec::new() });
        Ok(())
    }

    /// Registers an entity; its wrapper functions become actional operators available to
    /// its own behavior only.
    pub fn add_entity(&mut self, entity: EntityDecl) -> Result<(), CasmasError> {
        if self.entity(entity.id.as_str()).is_some() {
            return Err(CasmasError::Duplicate(entity.id.to_string()));
        }
        for m in &entity.memberships {
            self.community(m.as_str())?;
        }
        if entity.memory.iter().any(BTreeMap::is_empty) {
            return Err(CasmasError::EmptyFact);
        }
        let reg = self.entity_registry(&entity.id, &entity.wrapper)?;
        let report = validate_bundle(&Bundle { controls: entity.behavior.clone(), ..Bundle::default() }, &reg);
        if !report.is_empty() {
            return Err(CasmasError::InvalidBehavior { entity: entity.id.to_string(), report });
        }
        self.registries.insert(entity.id.clone(), reg);
        self.refraction.insert(entity.id.clone(), Refraction::default());
        self.entities.push(entity);
        Ok(())
    }

    fn entity_registry(&self, entity: &Ident, wrapper: &[WrapperFn]) -> Result<Registry, CasmasError> {
        let mut reg = self.base.clone();
        for f in wrapper {
            let name = f.name.clone();
            let call: lob_engine::EffectFn = Arc::new(move |ctx: &mut EffectCtx<'_>, a: &[Selector]| {
                let args = a.iter().map(|s| ctx.value(s)).collect::<Result<Vec<_>, _>>()?;
                ctx.mark(format!("call {name}"));
                let record = BTreeMap::from([(id("function"), Value::Text(name.to_string())), (id("args"), Value::List(args))]);
                ctx.append(id(CALLS), Value::Record(record));
                Ok(())
            });
            reg.add_effect(f.name.as_str(), Arity::Exact(f.params.len()), call)
                .map_err(|_| CasmasError::WrapperCollision { entity: entity.to_string(), name: f.name.to_string() })?;
        }
        Ok(reg)
    }

    /// Removes an entity with its memory. Facts it posted stay in their spaces.
    pub fn remove_entity(&mut self, id: &str) -> Result<EntityDecl, CasmasError> {
        let pos = self.entities.iter().position(|e| e.id == id).ok_or_else(|| CasmasError::UnknownEntity(id.into()))?;
        self.registries.remove(id);
        self.refraction.remove(id);
        Ok(self.entities.remove(pos))
    }

    /// Removes a community that no entity belongs to.
    pub fn remove_community(&mut self, name: &str) -> Result<CommunityDecl, CasmasError> {
        let pos = self.communities.iter().position(|c| c.name == name).ok_or_else(|| CasmasError::UnknownCommunity(name.into()))?;
        if !self.members(name).is_empty() {
            return Err(CasmasError::InUse { community: name.into() });
        }
        Ok(self.communities.remove(pos))
    }

    pub fn entity(&self, id: &str) -> Option<&EntityDecl> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn entities(&self) -> &[EntityDecl] {
        &self.entities
    }

    pub fn communities(&self) -> &[CommunityDecl] {
        &self.communities
    }

    fn community(&self, name: &str) -> Result<&CommunityDecl, CasmasError> {
        self.communities.iter().find(|c| c.name == name).ok_or_else(|| CasmasError::UnknownCommunity(name.into()))
    }

    pub fn space(&self, community: &str) -> Result<&[PostedFact], CasmasError> {
        Ok(&self.community(community)?.facts)
    }

    pub fn members(&self, community: &str) -> Vec<&Ident> {
        self.entities.iter().filter(|e| e.memberships.iter().any(|m| m == community)).map(|e| &e.id).collect()
    }

    pub fn is_member(&self, entity: &str, community: &str) -> bool {
        self.entity(entity).is_some_and(|e| e.memberships.iter().any(|m| m == community))
    }

    /// Every wrapper call made so far, in round order.
    pub fn calls(&self) -> &[WrapperCall] {
        &self.calls
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Posts a fact into a community space. Identical facts are kept as distinct entries.
    pub fn post(&mut self, entity: &str, fact: Pairs, community: &str) -> Result<(), CasmasError> {
        if fact.is_empty() {
            return Err(CasmasError::EmptyFact);
        }
        self.entity(entity).ok_or_else(|| CasmasError::UnknownEntity(entity.into()))?;
        self.community(community)?;
        if !self.is_member(entity, community) {
            return Err(CasmasError::NotMember { entity: entity.into(), community: community.into() });
        }
        let owner = id(entity);
        let c = self.communities.iter_mut().find(|c| c.name == community).expect("checked above");
        c.facts.push(PostedFact { owner, pairs: fact });
        Ok(())
    }

    /// Appends a fact to an entity's memory.
    pub fn put(&mut self, entity: &str, fact: Pairs) -> Result<(), CasmasError> {
        if fact.is_empty() {
            return Err(CasmasError::EmptyFact);
        }
        let e = self.entities.iter_mut().find(|e| e.id == entity).ok_or_else(|| CasmasError::UnknownEntity(entity.into()))?;
        e.memory.push(fact);
        Ok(())
    }

    /// Memory facts the pattern subsumes, in memory order.
    pub fn get(&self, entity: &str, pattern: &FactPattern) -> Result<Vec<Pairs>, CasmasError> {
        let e = self.entity(entity).ok_or_else(|| CasmasError::UnknownEntity(entity.into()))?;
        Ok(e.memory.iter().filter(|f| pattern.matches(&Value::Record((*f).clone()))).cloned().collect())
    }

    /// What an entity's behavior sees: its memory and the spaces of its communities.
    pub fn view(&self, entity: &str) -> Result<State, CasmasError> {
        let e = self.entity(entity).ok_or_else(|| CasmasError::UnknownEntity(entity.into()))?;
        let mut state = State::new(id(SELF));
        for f in &e.memory {
            state.append(id(SELF), Value::Record(f.clone()));
        }
        for m in &e.memberships {
            state.scopes.entry(m.clone()).or_default();
            for f in &self.community(m.as_str())?.facts {
                state.append(m.clone(), Value::Record(f.pairs.clone()));
            }
        }
        Ok(state)
    }

    /// One reaction round. All-or-nothing: on error nothing changes.
    pub fn round(&mut self) -> Result<RoundReport, CasmasError> {
        self.round_among(|_| true)
    }

    /// A round in which only the members of one community react.
    pub fn round_of(&mut self, community: &str) -> Result<RoundReport, CasmasError> {
        self.community(community)?;
        self.round_among(|e| e.memberships.iter().any(|m| m == community))
    }

    fn round_among(&mut self, active: impl Fn(&EntityDecl) -> bool) -> Result<RoundReport, CasmasError> {
        let round = self.rounds + 1;
        let mut refraction = self.refraction.clone();
        let mut firings = Vec::new();
        let mut memories = BTreeMap::new();
        let mut outbox: Vec<(Ident, Ident, Pairs)> = Vec::new();
        let mut calls = Vec::new();
        for e in self.entities.iter().filter(|e| active(e)) {
            let mut state = self.view(e.id.as_str())?;
            let engine = Engine::new(&self.registries[&e.id]);
            let r = refraction.get_mut(&e.id).expect("every entity has a refraction memory");
            let out = engine.step(&mut state, &e.behavior, r, round).map_err(|source| CasmasError::Engine { entity: e.id.to_string(), source })?;
            for f in &out.firings {
                if let Some(d) = f.deltas.iter().find(|d| e.memberships.contains(d.scope())) {
                    return Err(CasmasError::SpaceWrite { entity: e.id.to_string(), community: d.scope().to_string() });
                }
            }
            let memory = state
                .scope_values(SELF)
                .into_iter()
                .map(|v| match v {
                    Value::Record(f) if !f.is_empty() => Ok(f),
                    _ => Err(CasmasError::NotAFact { entity: e.id.to_string() }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            memories.insert(e.id.clone(), memory);
            for v in state.scope_values(OUTBOX) {
                let fields = v.as_record().expect("post writes records");
                let to = fields["to"].as_text().and_then(|t| Ident::new(t).ok()).expect("post writes community names");
                let fact = fields["fact"].as_record().cloned().expect("post checks facts");
                outbox.push((e.id.clone(), to, fact));
            }
            for v in state.scope_values(CALLS) {
                let fields = v.as_record().expect("wrappers write records");
                calls.push(WrapperCall {
                    round,
                    entity: e.id.clone(),
                    function: fields["function"].as_text().and_then(|t| Ident::new(t).ok()).expect("wrapper name"),
                    args: fields["args"].as_list().map(<[Value]>::to_vec).unwrap_or_default(),
                });
            }
            firings.extend(out.firings.into_iter().map(|f| (e.id.clone(), f)));
        }
        // Effects land together at the end of the round.
        calls.sort_by(|a, b| a.entity.cmp(&b.entity));
        outbox.sort_by(|a, b| a.0.cmp(&b.0));
        let mut posted = Vec::new();
        let mut rejected = Vec::new();
        for (owner, to, pairs) in outbox {
            let fact = PostedFact { owner: owner.clone(), pairs };
            match self.communities.iter_mut().find(|c| c.name == to) {
                Some(c) if self.entities.iter().any(|e| e.id == owner && e.memberships.contains(&to)) => {
                    c.facts.push(fact.clone());
                    posted.push((to, fact));
                }
                _ => rejected.push((to, fact)),
            }
        }
        for e in &mut self.entities {
            if let Some(m) = memories.remove(&e.id) {
                e.memory = m;
            }
        }
        self.refraction = refraction;
        self.rounds = round;
        self.calls.extend(calls.iter().cloned());
        firings.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(RoundReport { round, firings, posted, rejected, calls })
    }

    /// Rounds until one fires nothing, or `max_rounds` productive rounds.
    pub fn run(&mut self, max_rounds: usize) -> Result<Quiescence, CasmasError> {
        let mut rounds = Vec::new();
        while rounds.len() < max_rounds {
            let r = self.round()?;
            if r.firings.is_empty() {
                return Ok(Quiescence { rounds, quiescent: true });
            }
            rounds.push(r);
        }
        let quiescent = !self.would_fire()?;
        Ok(Quiescence { rounds, quiescent })
    }

    fn would_fire(&self) -> Result<bool, CasmasError> {
        for e in &self.entities {
            let state = self.view(e.id.as_str())?;
            if Engine::new(&self.registries[&e.id]).any_enabled(&state, &e.behavior, &self.refraction[&e.id]) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
