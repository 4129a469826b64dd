use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use lob_core::lookup::{seed_symbols, Overlay};
use lob_core::validate::validate_operator;
use lob_core::{
    Arity, Bundle, ConstructLookup, Ident, Operand, OperatorConstruct, OperatorKind, Param, Selector, Signature, State, StateDelta, SymbolShape, TypeTag, Value,
};

use crate::error::{EvalError, RegistryError};
use crate::kernels::{self, mismatch, KernelImpl};

pub type KernelFn = Arc<dyn Fn(&Registry, &[Value]) -> Result<Value, EvalError> + Send + Sync>;
pub type EffectFn = Arc<dyn Fn(&mut EffectCtx<'_>, &[Selector]) -> Result<(), EvalError> + Send + Sync>;

/// Argument of a normalized invocation: a caller's argument, a constant or a nested
/// functional application.
#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    Param(usize),
    Const(Value),
    Apply { operator: Ident, args: Vec<Template> },
}

/// A primitive effect invocation inside an inlined actional body.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub primitive: Ident,
    pub args: Vec<Template>,
}

#[derive(Clone)]
enum Def {
    Kernel(KernelFn),
    Effect(EffectFn),
    Functional(OperatorConstruct),
    Actional { def: OperatorConstruct, normalized: Vec<Invocation> },
}

#[derive(Clone)]
struct Entry {
    signature: Signature,
    def: Def,
}

/// The construct registry: primitives plus user operators, each name defined once.
#[derive(Clone)]
pub struct Registry {
    entries: BTreeMap<Ident, Entry>,
    symbols: BTreeMap<Ident, SymbolShape>,
    order: Vec<Ident>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry").field("operators", &self.order).field("symbols", &self.symbols.keys()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::with_primitives()
    }
}

impl ConstructLookup for Registry {
    fn signature(&self, name: &str) -> Option<Signature> {
        self.entries.get(name).map(|e| e.signature)
    }

    fn symbol(&self, name: &str) -> Option<SymbolShape> {
        self.symbols.get(name).copied()
    }
}

impl Registry {
    /// An empty registry with the seed symbol vocabulary and no operators.
    pub fn empty() -> Self {
        Registry { entries: BTreeMap::new(), symbols: seed_symbols(), order: Vec::new() }
    }

    /// Seed functional kernels and the generic actional primitives
    /// (`put`, `get`, `retract`, `annotate`, `localize`).
    pub fn with_primitives() -> Self {
        let mut r = Registry::empty();
        for (name, arity, result, f) in kernels::seed() {
            r.insert_kernel(name, arity, result, f);
        }
        r.add_kernel(
            "aggregate",
            Arity::AtLeast(2),
            Some(TypeTag::Record),
            Arc::new(|_, args| {
                // Reached only with already-evaluated values; names come from `evaluate`.
                Ok(Value::Record(args.iter().enumerate().map(|(i, v)| (positional(i), v.clone())).collect()))
            }),
        )
        .expect("fresh registry");
        crate::effects::install(&mut r);
        r
    }

    fn insert_kernel(&mut self, name: &str, arity: Arity, result: Option<TypeTag>, f: KernelImpl) {
        let n = name.to_string();
        let k: KernelFn = Arc::new(move |reg, args| f(reg, &n, args));
        self.add_kernel(name, arity, result, k).expect("seed names are distinct");
    }

    fn add(&mut self, name: Ident, entry: Entry) -> Result<(), RegistryError> {
        if self.entries.contains_key(&name) {
            return Err(RegistryError::Duplicate(name.to_string()));
        }
        self.order.push(name.clone());
        self.entries.insert(name, entry);
        Ok(())
    }

    pub fn add_kernel(&mut self, name: &str, arity: Arity, result: Option<TypeTag>, f: KernelFn) -> Result<(), RegistryError> {
        let id = Ident::new(name).map_err(|_| RegistryError::Duplicate(name.into()))?;
        self.add(id, Entry { signature: Signature::functional(arity, result), def: Def::Kernel(f) })
    }

    pub fn add_effect(&mut self, name: &str, arity: Arity, f: EffectFn) -> Result<(), RegistryError> {
        let id = Ident::new(name).map_err(|_| RegistryError::Duplicate(name.into()))?;
        self.add(id, Entry { signature: Signature::actional(arity), def: Def::Effect(f) })
    }

    pub fn add_symbol(&mut self, name: &str, shape: SymbolShape) -> Result<(), RegistryError> {
        let id = Ident::new(name).map_err(|_| RegistryError::Duplicate(name.into()))?;
        if self.symbols.contains_key(&id) {
            return Err(RegistryError::Duplicate(name.into()));
        }
        self.symbols.insert(id, shape);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Operator names in registration order.
    pub fn names(&self) -> &[Ident] {
        &self.order
    }

    pub fn symbols(&self) -> impl Iterator<Item = (&Ident, &SymbolShape)> {
        self.symbols.iter()
    }

    pub fn definition(&self, name: &str) -> Option<&OperatorConstruct> {
        match &self.entries.get(name)?.def {
            Def::Functional(d) | Def::Actional { def: d, .. } => Some(d),
            _ => None,
        }
    }

    /// Registers a user operator after checking it against the current registry.
    pub fn register_operator(&mut self, def: OperatorConstruct) -> Result<(), RegistryError> {
        if self.contains(def.name.as_str()) {
            return Err(RegistryError::Duplicate(def.name.to_string()));
        }
        let report = validate_operator(&def, self);
        if !report.is_empty() {
            return Err(RegistryError::Invalid { name: def.name.to_string(), report });
        }
        let signature = lob_core::lookup::signature_of(&def, self);
        let entry = match def.kind {
            OperatorKind::Functional => Entry { signature, def: Def::Functional(def.clone()) },
            OperatorKind::Actional => {
                let normalized = self.normalize(&def);
                Entry { signature, def: Def::Actional { def: def.clone(), normalized } }
            }
        };
        self.add(def.name.clone(), entry)
    }

    /// Composes a functional operator from a body over named parameters.
    pub fn compose(&mut self, name: Ident, params: Vec<Param>, result: TypeTag, body: Operand) -> Result<(), RegistryError> {
        self.register_operator(OperatorConstruct { name, kind: OperatorKind::Functional, params, result: Some(result), body: vec![body] })
    }

    /// Registers every operator a bundle declares, in order.
    pub fn register_bundle(&mut self, bundle: &Bundle) -> Result<(), RegistryError> {
        for op in &bundle.operators {
            self.register_operator(op.clone())?;
        }
        Ok(())
    }

    /// A lookup that also sees a bundle's operators without registering them.
    pub fn overlay<'a>(&'a self, bundle: &'a Bundle) -> Overlay<'a> {
        Overlay::new(self).with_operators(&bundle.operators)
    }

    /// Inlined form of a registered actional operator.
    pub fn normalized(&self, name: &str) -> Option<&[Invocation]> {
        match &self.entries.get(name)?.def {
            Def::Actional { normalized, .. } => Some(normalized),
            _ => None,
        }
    }

    fn normalize(&self, def: &OperatorConstruct) -> Vec<Invocation> {
        let to_template = |op: &Operand| self.template(op, &def.params);
        let mut out = Vec::new();
        for inv in &def.body {
            let Operand::Application { operator, args } = inv else { continue };
            let args: Vec<Template> = args.iter().map(to_template).collect();
            match self.normalized(operator.as_str()) {
                Some(inner) => {
                    out.extend(inner.iter().map(|i| Invocation { primitive: i.primitive.clone(), args: i.args.iter().map(|t| substitute(t, &args)).collect() }))
                }
                None => out.push(Invocation { primitive: operator.clone(), args }),
            }
        }
        out
    }

    fn template(&self, op: &Operand, params: &[Param]) -> Template {
        match op {
            Operand::Constant(v) => Template::Const(v.clone()),
            Operand::Variable(v) => match params.iter().position(|p| p.name == v.name) {
                Some(i) => Template::Param(i),
                None => Template::Const(Value::Text(v.name.to_string())),
            },
            Operand::Application { operator, args } => {
                Template::Apply { operator: operator.clone(), args: args.iter().map(|a| self.template(a, params)).collect() }
            }
        }
    }

    // ---- evaluation

    /// Applies a functional operator to values.
    pub fn call(&self, name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
        let entry = self.entries.get(name).ok_or_else(|| EvalError::UnknownOperator(name.into()))?;
        if !entry.signature.arity.admits(args.len()) {
            return Err(EvalError::Arity { op: name.into(), expected: entry.signature.arity.to_string(), got: args.len() });
        }
        match &entry.def {
            Def::Kernel(f) => f(self, &args),
            Def::Functional(def) => {
                let mut env = BTreeMap::new();
                for (p, v) in def.params.iter().zip(args) {
                    env.insert(p.name.clone(), coerce(name, p.ty, v)?);
                }
                let v = self.evaluate(&def.body[0], &env)?;
                match def.result {
                    Some(ty) => coerce(name, ty, v),
                    None => Ok(v),
                }
            }
            Def::Effect(_) | Def::Actional { .. } => Err(EvalError::NotFunctional(name.into())),
        }
    }

    /// Evaluates an operand with variables bound by `env`.
    pub fn evaluate(&self, op: &Operand, env: &BTreeMap<Ident, Value>) -> Result<Value, EvalError> {
        match op {
            Operand::Constant(v) => Ok(v.clone()),
            Operand::Variable(v) => env.get(&v.name).cloned().ok_or_else(|| EvalError::Unbound(v.name.to_string())),
            Operand::Application { operator, args } if operator == "aggregate" => {
                let mut fields = BTreeMap::new();
                for (i, a) in args.iter().enumerate() {
                    let key = match a {
                        Operand::Variable(v) => v.name.clone(),
                        _ => positional(i),
                    };
                    fields.insert(key, self.evaluate(a, env)?);
                }
                Ok(Value::Record(fields))
            }
            Operand::Application { operator, args } => {
                let vals = args.iter().map(|a| self.evaluate(a, env)).collect::<Result<Vec<_>, _>>()?;
                self.call(operator.as_str(), vals)
            }
        }
    }

    /// Reads a selector against a state.
    pub fn select(&self, sel: &Selector, state: &State) -> Result<Value, EvalError> {
        match sel {
            Selector::Entry(r) => state.get(r).cloned().ok_or_else(|| EvalError::Unbound(r.to_string())),
            Selector::Scope(s) => Ok(Value::List(state.scope_values(s.as_str()))),
            Selector::Match { scope, pattern } => Ok(Value::List(state.matching(scope.as_str(), pattern))),
            Selector::Constant(v) => Ok(v.clone()),
            Selector::Apply { operator, args } if operator == "aggregate" => {
                let mut fields = BTreeMap::new();
                for (i, a) in args.iter().enumerate() {
                    let key = match a {
                        Selector::Entry(r) => r.name.clone(),
                        _ => positional(i),
                    };
                    fields.insert(key, self.select(a, state)?);
                }
                Ok(Value::Record(fields))
            }
            Selector::Apply { operator, args } => {
                let vals = args.iter().map(|a| self.select(a, state)).collect::<Result<Vec<_>, _>>()?;
                self.call(operator.as_str(), vals)
            }
        }
    }

    /// Whether a condition holds. Evaluation errors (unbound entries, type mismatches)
    /// count as not holding.
    pub fn holds(&self, operator: &str, args: &[Selector], state: &State) -> bool {
        let vals: Result<Vec<_>, _> = args.iter().map(|a| self.select(a, state)).collect();
        matches!(vals.and_then(|v| self.call(operator, v)), Ok(Value::Boolean(true)))
    }

    /// Runs an action against the context's state.
    pub fn perform(&self, operator: &str, args: &[Selector], ctx: &mut EffectCtx<'_>) -> Result<(), EvalError> {
        let entry = self.entries.get(operator).ok_or_else(|| EvalError::UnknownOperator(operator.into()))?;
        if !entry.signature.arity.admits(args.len()) {
            return Err(EvalError::Arity { op: operator.into(), expected: entry.signature.arity.to_string(), got: args.len() });
        }
        match &entry.def {
            Def::Effect(f) => f(ctx, args),
            Def::Actional { normalized, .. } => {
                for inv in normalized {
                    let sel: Vec<Selector> = inv.args.iter().map(|t| instantiate(t, args)).collect();
                    self.perform(inv.primitive.as_str(), &sel, ctx)?;
                }
                Ok(())
            }
            Def::Kernel(_) | Def::Functional(_) => Err(EvalError::NotActional(operator.into())),
        }
    }
}

/// Key for the i-th unnamed field of an aggregate.
pub fn positional(i: usize) -> Ident {
    Ident::new(format!("item-{i}")).expect("positional key")
}

fn coerce(op: &str, ty: TypeTag, v: Value) -> Result<Value, EvalError> {
    match (ty, v) {
        (TypeTag::Decimal, Value::Integer(i)) => Ok(Value::Decimal(i as f64)),
        (ty, v) if ty.accepts(&v) => Ok(v),
        (ty, v) => Err(mismatch(op, &format!("a {ty}"), &v)),
    }
}

fn substitute(t: &Template, outer: &[Template]) -> Template {
    match t {
        Template::Param(i) => outer.get(*i).cloned().unwrap_or(Template::Const(Value::Boolean(false))),
        Template::Const(v) => Template::Const(v.clone()),
        Template::Apply { operator, args } => Template::Apply { operator: operator.clone(), args: args.iter().map(|a| substitute(a, outer)).collect() },
    }
}

fn instantiate(t: &Template, args: &[Selector]) -> Selector {
    match t {
        Template::Param(i) => args.get(*i).cloned().unwrap_or(Selector::Constant(Value::Boolean(false))),
        Template::Const(v) => Selector::Constant(v.clone()),
        Template::Apply { operator, args: inner } => Selector::Apply { operator: operator.clone(), args: inner.iter().map(|a| instantiate(a, args)).collect() },
    }
}

/// What an effect may touch: the state being rewritten, plus a log of deltas and
/// side-effect markers.
pub struct EffectCtx<'a> {
    pub registry: &'a Registry,
    pub state: &'a mut State,
    pub deltas: Vec<StateDelta>,
    /// Effects with no state change (printing, transmitting) leave a marker here.
    pub markers: Vec<String>,
}

impl<'a> EffectCtx<'a> {
    pub fn new(registry: &'a Registry, state: &'a mut State) -> Self {
        EffectCtx { registry, state, deltas: Vec::new(), markers: Vec::new() }
    }

    pub fn value(&self, sel: &Selector) -> Result<Value, EvalError> {
        self.registry.select(sel, self.state)
    }

    pub fn text(&self, sel: &Selector) -> Result<String, EvalError> {
        match self.value(sel)? {
            Value::Text(s) => Ok(s),
            other => Err(mismatch("text argument", "a text", &other)),
        }
    }

    /// Scope and name addressed by an entry selector.
    pub fn entry_of(&self, sel: &Selector) -> Result<(Ident, Ident), EvalError> {
        match sel {
            Selector::Entry(r) => Ok((self.state.scope_of(r).clone(), r.name.clone())),
            other => Err(EvalError::NotADestination(format!("{other:?}"))),
        }
    }

    pub fn set(&mut self, scope: Ident, name: Ident, value: Value) {
        let d = self.state.set(scope, name, value);
        self.deltas.push(d);
    }

    pub fn append(&mut self, scope: Ident, value: Value) -> Ident {
        let d = self.state.append(scope, value);
        let name = d.name().clone();
        self.deltas.push(d);
        name
    }

    pub fn remove(&mut self, scope: &Ident, name: &Ident) {
        if let Some(d) = self.state.remove(scope, name) {
            self.deltas.push(d);
        }
    }

    /// Writes to a destination: an entry is overwritten, a scope gets a new entry.
    pub fn write(&mut self, dest: &Selector, value: Value) -> Result<(), EvalError> {
        match dest {
            Selector::Entry(r) => {
                let scope = self.state.scope_of(r).clone();
                self.set(scope, r.name.clone(), value);
                Ok(())
            }
            Selector::Scope(s) => {
                self.append(s.clone(), value);
                Ok(())
            }
            other => Err(EvalError::NotADestination(format!("{other:?}"))),
        }
    }

    pub fn mark(&mut self, marker: impl Into<String>) {
        self.markers.push(marker.into());
    }

    pub fn entry(&self, scope: &str, name: &str) -> Option<&Value> {
        self.state.lookup(scope, name)
    }
}
