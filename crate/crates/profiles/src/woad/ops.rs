//! The document operator suite, registered as actional primitives.
//!
//! Permission markers live in the `flags` scope as lists of addresses (`doc.status`, or
//! `doc.*` for a whole scope): `protected` blocks write, copy, delete, create, retrieve
//! and fills; `official` blocks correct.

use std::collections::BTreeMap;
use std::sync::Arc;

use lob_core::{Arity, ConstructLookup, Ident, Selector, SymbolShape, TypeTag, Value};
use lob_engine::effects::describe;
use lob_engine::{EffectCtx, EffectFn, EvalError, Registry};

use super::{DatomRegistry, Template, DOC};

/// Operators with full effect semantics.
pub const ACTIONAL_SUITE: [&str; 14] =
    ["save", "retrieve", "store", "open-read", "write", "copy", "delete", "create", "annotate", "count", "select", "correct", "officialize", "protect"];

/// Operators whose only effect is a marker in state and trace.
pub const TRACE_ONLY: [&str; 4] = ["attach", "cache", "print", "transmit"];

fn id(s: &str) -> Ident {
    Ident::new(s).expect("identifier")
}

/// Leaf datoms of the document's template and their types. Without a template (for
/// validation only) nothing is checked.
#[derive(Clone, Default)]
struct Areas(Option<Arc<BTreeMap<Ident, TypeTag>>>, Arc<DatomRegistry>);

impl Areas {
    /// Scope and name of an entry, refusing unknown document areas.
    fn target(&self, ctx: &EffectCtx<'_>, sel: &Selector) -> Result<(Ident, Ident), EvalError> {
        let (scope, name) = ctx.entry_of(sel)?;
        if scope == DOC && self.0.as_ref().is_some_and(|leaves| !leaves.contains_key(&name)) {
            return Err(EvalError::Unbound(format!("{scope}.{name}")));
        }
        Ok((scope, name))
    }

    fn conform(&self, scope: &Ident, name: &Ident, v: Value) -> Result<Value, EvalError> {
        match self.0.as_ref().and_then(|leaves| leaves.get(name)) {
            Some(ty) if scope == DOC => match (ty, v) {
                (TypeTag::Decimal, Value::Integer(i)) => Ok(Value::Decimal(i as f64)),
                (ty, v) if ty.accepts(&v) => Ok(v),
                (ty, v) => Err(EvalError::TypeMismatch { op: format!("{scope}.{name}"), expected: ty.to_string(), found: v.type_tag().to_string() }),
            },
            _ => Ok(v),
        }
    }
}

/// Address used in permission lists.
pub(crate) fn address(ctx: &EffectCtx<'_>, sel: &Selector) -> Result<String, EvalError> {
    match sel {
        Selector::Entry(_) => ctx.entry_of(sel).map(|(s, n)| format!("{s}.{n}")),
        Selector::Scope(s) => Ok(format!("{s}.*")),
        other => Err(EvalError::NotADestination(describe(other))),
    }
}

pub(crate) fn flagged(state: &lob_core::State, flag: &str, scope: &str, name: &str) -> bool {
    let Some(Value::List(addrs)) = state.lookup("flags", flag) else {
        return false;
    };
    let (one, all) = (format!("{scope}.{name}"), format!("{scope}.*"));
    addrs.iter().any(|a| a.as_text().is_some_and(|t| t == one || t == all))
}

fn raise_flag(ctx: &mut EffectCtx<'_>, flag: &str, addr: String) {
    let mut list = match ctx.entry("flags", flag) {
        Some(Value::List(xs)) => xs.clone(),
        _ => Vec::new(),
    };
    let addr = Value::Text(addr);
    if !list.contains(&addr) {
        list.push(addr);
        ctx.set(id("flags"), id(flag), Value::List(list));
    }
}

fn guard(ctx: &EffectCtx<'_>, flag: &str, scope: &Ident, name: &Ident) -> Result<(), EvalError> {
    if flagged(ctx.state, flag, scope.as_str(), name.as_str()) {
        let what = if flag == "official" { "officialized" } else { "protected" };
        return Err(EvalError::Refused(format!("{scope}.{name} is {what}")));
    }
    Ok(())
}

fn checked_write(areas: &Areas, ctx: &mut EffectCtx<'_>, dest: &Selector, v: Value) -> Result<(), EvalError> {
    let (scope, name) = areas.target(ctx, dest)?;
    guard(ctx, "protected", &scope, &name)?;
    let v = areas.conform(&scope, &name, v)?;
    ctx.set(scope, name, v);
    Ok(())
}

fn marker_op(op: &'static str) -> EffectFn {
    Arc::new(move |ctx: &mut EffectCtx<'_>, a: &[Selector]| {
        let target = describe(&a[0]);
        ctx.mark(format!("{op} {target}"));
        let record = BTreeMap::from([(id("op"), Value::text(op)), (id("target"), Value::Text(target))]);
        ctx.append(id("markers"), Value::Record(record));
        Ok(())
    })
}

fn style(ctx: &mut EffectCtx<'_>, a: &[Selector]) -> Result<(), EvalError> {
    let (_, name) = ctx.entry_of(&a[0])?;
    let symbol = ctx.text(&a[1])?;
    let (head, arg) = match symbol.split_once('(') {
        Some((h, rest)) => (h, rest.strip_suffix(')')),
        None => (symbol.as_str(), None),
    };
    let known = match (ctx.registry.symbol(head), arg) {
        (Some(SymbolShape::Bare), None) => true,
        (Some(SymbolShape::WithToken), Some(t)) => lob_core::is_valid_ident(t),
        _ => false,
    };
    if !known {
        return Err(EvalError::Refused(format!("`{symbol}` is not a conventional symbol")));
    }
    let mut list = match ctx.entry("style", name.as_str()) {
        Some(Value::List(xs)) => xs.clone(),
        _ => Vec::new(),
    };
    let symbol = Value::Text(symbol);
    if !list.contains(&symbol) {
        list.push(symbol);
        ctx.set(id("style"), name, Value::List(list));
    }
    Ok(())
}

/// Primitives plus the document suite, `style`, and the trace-only operators, for
/// documents instantiating `template`.
pub fn registry(datoms: Arc<DatomRegistry>, template: &Template) -> Result<Registry, super::WoadError> {
    let mut types = BTreeMap::new();
    for leaf in template.leaves(&datoms)? {
        let ty = datoms.get(leaf.as_str()).expect("leaf is registered").ty;
        types.insert(leaf, ty);
    }
    let mut r = Registry::with_primitives();
    install_suite(&mut r, Areas(Some(Arc::new(types)), datoms));
    Ok(r)
}

/// Adds the document operators to `r` without tying them to a template; enough to
/// validate mechanisms and run them on free-form state.
pub fn install(r: &mut Registry) {
    install_suite(r, Areas::default());
}

fn install_suite(r: &mut Registry, areas: Areas) {
    let mut add = |name: &str, arity: Arity, f: EffectFn| r.add_effect(name, arity, f).expect("suite names are fresh");

    let a = areas.clone();
    add(
        "save",
        Arity::Exact(1),
        Arc::new(move |ctx, args| {
            let (_, name) = a.target(ctx, &args[0])?;
            let v = ctx.value(&args[0])?;
            ctx.set(id("saved"), name, v);
            Ok(())
        }),
    );
    let a = areas.clone();
    add(
        "retrieve",
        Arity::Exact(1),
        Arc::new(move |ctx, args| {
            let (_, name) = a.target(ctx, &args[0])?;
            let v = ctx.entry("saved", name.as_str()).cloned().ok_or_else(|| EvalError::Unbound(format!("saved.{name}")))?;
            checked_write(&a, ctx, &args[0], v)
        }),
    );
    add(
        "store",
        Arity::Exact(1),
        Arc::new(|ctx, args| {
            let record = BTreeMap::from([(id("didget"), Value::Text(address(ctx, &args[0])?)), (id("value"), ctx.value(&args[0])?)]);
            ctx.append(id("archive"), Value::Record(record));
            Ok(())
        }),
    );
    let a = areas.clone();
    add(
        "open-read",
        Arity::Exact(1),
        Arc::new(move |ctx, args| {
            let (_, name) = a.target(ctx, &args[0])?;
            let v = ctx.value(&args[0])?;
            ctx.set(id("read"), name, v);
            Ok(())
        }),
    );
    let a = areas.clone();
    add(
        "write",
        Arity::Exact(2),
        Arc::new(move |ctx, args| {
            let v = ctx.value(&args[1])?;
            checked_write(&a, ctx, &args[0], v)
        }),
    );
    let a = areas.clone();
    add(
        "copy",
        Arity::Exact(2),
        Arc::new(move |ctx, args| {
            let v = ctx.value(&args[0])?;
            checked_write(&a, ctx, &args[1], v)
        }),
    );
    let a = areas.clone();
    add(
        "delete",
        Arity::Exact(1),
        Arc::new(move |ctx, args| {
            let (scope, name) = a.target(ctx, &args[0])?;
            guard(ctx, "protected", &scope, &name)?;
            ctx.remove(&scope, &name);
            Ok(())
        }),
    );
    let a = areas.clone();
    add(
        "create",
        Arity::Exact(2),
        Arc::new(move |ctx, args| {
            let (scope, name) = a.target(ctx, &args[0])?;
            if ctx.entry(scope.as_str(), name.as_str()).is_some() {
                return Err(EvalError::Refused(format!("{scope}.{name} already exists")));
            }
            let v = ctx.value(&args[1])?;
            checked_write(&a, ctx, &args[0], v)
        }),
    );
    let a = areas.clone();
    add(
        "count",
        Arity::Exact(2),
        Arc::new(move |ctx, args| {
            let n = match &args[0] {
                Selector::Entry(r) if a.1.get(r.name.as_str()).is_some() => {
                    let scope = ctx.state.scope_of(r).clone();
                    let leaves = a.1.leaves(r.name.as_str()).map_err(|e| EvalError::Refused(e.to_string()))?;
                    leaves.iter().filter(|l| ctx.entry(scope.as_str(), l.as_str()).is_some()).count()
                }
                other => match ctx.value(other)? {
                    Value::List(xs) => xs.len(),
                    _ => 1,
                },
            };
            ctx.write(&args[1], Value::Integer(n as i64))
        }),
    );
    add(
        "select",
        Arity::Exact(2),
        Arc::new(|ctx, args| {
            let v = match ctx.value(&args[0])? {
                Value::List(xs) => Value::List(xs),
                one => Value::List(vec![one]),
            };
            ctx.write(&args[1], v)
        }),
    );
    let a = areas.clone();
    add(
        "correct",
        Arity::Exact(2),
        Arc::new(move |ctx, args| {
            let (scope, name) = a.target(ctx, &args[0])?;
            guard(ctx, "official", &scope, &name)?;
            let new = a.conform(&scope, &name, ctx.value(&args[1])?)?;
            let old = ctx.entry(scope.as_str(), name.as_str()).cloned();
            let mut record = BTreeMap::from([(id("didget"), Value::Text(format!("{scope}.{name}"))), (id("new"), new.clone())]);
            if let Some(old) = old {
                record.insert(id("old"), old);
            }
            ctx.append(id("corrections"), Value::Record(record));
            ctx.set(scope, name, new);
            Ok(())
        }),
    );
    add(
        "officialize",
        Arity::Exact(1),
        Arc::new(|ctx, args| {
            let addr = address(ctx, &args[0])?;
            raise_flag(ctx, "official", addr);
            Ok(())
        }),
    );
    add(
        "protect",
        Arity::Exact(1),
        Arc::new(|ctx, args| {
            let addr = address(ctx, &args[0])?;
            raise_flag(ctx, "protected", addr);
            Ok(())
        }),
    );
    add("style", Arity::Exact(2), Arc::new(style));
    for op in TRACE_ONLY {
        add(op, Arity::Exact(1), marker_op(op));
    }
}
