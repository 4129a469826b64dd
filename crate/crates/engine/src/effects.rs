//! Generic actional primitives.

use std::collections::BTreeMap;
use std::sync::Arc;

use lob_core::{Arity, Ident, Selector, Value};

use crate::error::EvalError;
use crate::registry::{EffectCtx, Registry};

fn key(s: &str) -> Ident {
    Ident::new(s).expect("field name")
}

/// Human-readable address of a selector, as stored in annotation records.
pub fn describe(sel: &Selector) -> String {
    match sel {
        Selector::Entry(r) => r.to_string(),
        Selector::Scope(s) => format!("{s}.*"),
        Selector::Match { scope, .. } => format!("{scope}[..]"),
        Selector::Constant(v) => format!("{v:?}"),
        Selector::Apply { operator, .. } => format!("{operator}(..)"),
    }
}

pub(crate) fn install(r: &mut Registry) {
    let effects: [(&str, Arity, crate::registry::EffectFn); 5] = [
        (
            "put",
            Arity::Exact(2),
            Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| {
                let v = ctx.value(&a[1])?;
                ctx.write(&a[0], v)
            }),
        ),
        (
            "get",
            Arity::Exact(2),
            Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| {
                let v = ctx.value(&a[0])?;
                ctx.write(&a[1], v)
            }),
        ),
        ("retract", Arity::Exact(1), Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| retract(ctx, &a[0]))),
        (
            "annotate",
            Arity::Exact(2),
            Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| {
                let note = ctx.value(&a[1])?;
                let record = BTreeMap::from([(key("target"), Value::Text(describe(&a[0]))), (key("note"), note)]);
                ctx.append(key("annotations"), Value::Record(record));
                Ok(())
            }),
        ),
        (
            "localize",
            Arity::Exact(3),
            Arc::new(|ctx: &mut EffectCtx<'_>, a: &[Selector]| {
                let (_, name) = ctx.entry_of(&a[0])?;
                let coord = |ctx: &EffectCtx<'_>, s: &Selector| {
                    let v = ctx.value(s)?;
                    v.as_number().map(Value::Decimal).ok_or_else(|| crate::kernels::mismatch("localize", "a number", &v))
                };
                let record = BTreeMap::from([(key("x"), coord(ctx, &a[1])?), (key("y"), coord(ctx, &a[2])?)]);
                ctx.set(key("layout"), name, Value::Record(record));
                Ok(())
            }),
        ),
    ];
    for (name, arity, f) in effects {
        r.add_effect(name, arity, f).expect("seed names are distinct");
    }
}

fn retract(ctx: &mut EffectCtx<'_>, target: &Selector) -> Result<(), EvalError> {
    match target {
        Selector::Entry(_) => {
            let (scope, name) = ctx.entry_of(target)?;
            ctx.remove(&scope, &name);
        }
        Selector::Scope(scope) => {
            let names: Vec<Ident> = ctx.state.scope(scope.as_str()).map(|m| m.keys().cloned().collect()).unwrap_or_default();
            names.iter().for_each(|n| ctx.remove(scope, n));
        }
        Selector::Match { scope, pattern } => {
            let names: Vec<Ident> =
                ctx.state.scope(scope.as_str()).map(|m| m.iter().filter(|(_, v)| pattern.matches(v)).map(|(k, _)| k.clone()).collect()).unwrap_or_default();
            names.iter().for_each(|n| ctx.remove(scope, n));
        }
        other => return Err(EvalError::NotADestination(describe(other))),
    }
    Ok(())
}
