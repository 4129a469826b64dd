//! Functional primitives.

use std::cmp::Ordering;

use lob_core::{Arity, TypeTag, Value};

use crate::error::EvalError;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy)]
enum Num {
    I(i64),
    D(f64),
}

impl Num {
    fn f(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::D(d) => d,
        }
    }
}

fn num(op: &str, v: &Value) -> Result<Num, EvalError> {
    match v {
        Value::Integer(i) => Ok(Num::I(*i)),
        Value::Decimal(d) => Ok(Num::D(*d)),
        other => Err(mismatch(op, "a number", other)),
    }
}

pub(crate) fn mismatch(op: &str, expected: &str, found: &Value) -> EvalError {
    EvalError::TypeMismatch { op: op.into(), expected: expected.into(), found: found.type_tag().to_string() }
}

fn boolean(op: &str, v: &Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| mismatch(op, "a boolean", v))
}

fn list<'v>(op: &str, v: &'v Value) -> Result<&'v [Value], EvalError> {
    v.as_list().ok_or_else(|| mismatch(op, "a list", v))
}

fn finite(op: &str, x: f64) -> Result<Value, EvalError> {
    if x.is_finite() {
        Ok(Value::Decimal(x))
    } else {
        Err(EvalError::NonFinite(op.into()))
    }
}

fn arith(op: &str, a: &Value, b: &Value, int: fn(i64, i64) -> Option<i64>, dec: fn(f64, f64) -> f64) -> Result<Value, EvalError> {
    match (num(op, a)?, num(op, b)?) {
        (Num::I(x), Num::I(y)) => int(x, y).map(Value::Integer).ok_or_else(|| EvalError::Overflow(op.into())),
        (x, y) => finite(op, dec(x.f(), y.f())),
    }
}

/// Equality with integer-to-decimal widening, recursively through lists and records.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Integer(x), Value::Decimal(y)) | (Value::Decimal(y), Value::Integer(x)) => (*x as f64) == *y,
        (Value::List(xs), Value::List(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y)),
        (Value::Record(xs), Value::Record(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|((kx, x), (ky, y))| kx == ky && values_equal(x, y)),
        _ => a == b,
    }
}

fn compare(op: &str, a: &Value, b: &Value) -> Result<Ordering, EvalError> {
    match (a, b) {
        (Value::Text(x), Value::Text(y)) => Ok(x.cmp(y)),
        (Value::Integer(x), Value::Integer(y)) => Ok(x.cmp(y)),
        _ => {
            let (x, y) = (num(op, a)?.f(), num(op, b)?.f());
            x.partial_cmp(&y).ok_or_else(|| EvalError::NonFinite(op.into()))
        }
    }
}

/// Mean of a list of numbers: an integer when all items are integers and the mean is
/// exact, a decimal otherwise.
pub fn average(op: &str, items: &[Value]) -> Result<Value, EvalError> {
    if items.is_empty() {
        return Err(EvalError::DivisionByZero(op.into()));
    }
    let nums = items.iter().map(|v| num(op, v)).collect::<Result<Vec<_>, _>>()?;
    let n = nums.len() as i128;
    if nums.iter().all(|x| matches!(x, Num::I(_))) {
        let sum: i128 = nums.iter().map(|x| if let Num::I(i) = x { *i as i128 } else { 0 }).sum();
        if sum % n == 0 {
            return i64::try_from(sum / n).map(Value::Integer).map_err(|_| EvalError::Overflow(op.into()));
        }
        return finite(op, sum as f64 / n as f64);
    }
    finite(op, nums.iter().map(|x| x.f()).sum::<f64>() / n as f64)
}

pub(crate) type KernelImpl = fn(&Registry, &str, &[Value]) -> Result<Value, EvalError>;

/// Name, arity, result type and implementation of every functional primitive.
pub(crate) fn seed() -> Vec<(&'static str, Arity, Option<TypeTag>, KernelImpl)> {
    use Arity::{AtLeast, Exact};
    use TypeTag::{Boolean, Decimal, Integer, List, Text};
    vec![
        ("add", Exact(2), None, |_, op, a| arith(op, &a[0], &a[1], i64::checked_add, |x, y| x + y)),
        ("sub", Exact(2), None, |_, op, a| arith(op, &a[0], &a[1], i64::checked_sub, |x, y| x - y)),
        ("mul", Exact(2), None, |_, op, a| arith(op, &a[0], &a[1], i64::checked_mul, |x, y| x * y)),
        ("div", Exact(2), Some(Decimal), |_, op, a| {
            let (x, y) = (num(op, &a[0])?.f(), num(op, &a[1])?.f());
            if y == 0.0 {
                return Err(EvalError::DivisionByZero(op.into()));
            }
            finite(op, x / y)
        }),
        ("quot", Exact(2), Some(Integer), |_, op, a| int_div(op, &a[0], &a[1], i64::checked_div_euclid)),
        ("mod", Exact(2), Some(Integer), |_, op, a| int_div(op, &a[0], &a[1], i64::checked_rem_euclid)),
        ("neg", Exact(1), None, |_, op, a| match num(op, &a[0])? {
            Num::I(i) => i.checked_neg().map(Value::Integer).ok_or_else(|| EvalError::Overflow(op.into())),
            Num::D(d) => Ok(Value::Decimal(-d)),
        }),
        ("eq", Exact(2), Some(Boolean), |_, _, a| Ok(Value::Boolean(values_equal(&a[0], &a[1])))),
        ("ne", Exact(2), Some(Boolean), |_, _, a| Ok(Value::Boolean(!values_equal(&a[0], &a[1])))),
        ("lt", Exact(2), Some(Boolean), |_, op, a| Ok(Value::Boolean(compare(op, &a[0], &a[1])?.is_lt()))),
        ("le", Exact(2), Some(Boolean), |_, op, a| Ok(Value::Boolean(compare(op, &a[0], &a[1])?.is_le()))),
        ("gt", Exact(2), Some(Boolean), |_, op, a| Ok(Value::Boolean(compare(op, &a[0], &a[1])?.is_gt()))),
        ("ge", Exact(2), Some(Boolean), |_, op, a| Ok(Value::Boolean(compare(op, &a[0], &a[1])?.is_ge()))),
        ("and", AtLeast(1), Some(Boolean), |_, op, a| bools(op, a).map(|b| Value::Boolean(b.iter().all(|x| *x)))),
        ("or", AtLeast(1), Some(Boolean), |_, op, a| bools(op, a).map(|b| Value::Boolean(b.iter().any(|x| *x)))),
        ("nand", AtLeast(1), Some(Boolean), |_, op, a| bools(op, a).map(|b| Value::Boolean(!b.iter().all(|x| *x)))),
        ("nor", AtLeast(1), Some(Boolean), |_, op, a| bools(op, a).map(|b| Value::Boolean(!b.iter().any(|x| *x)))),
        ("not", Exact(1), Some(Boolean), |_, op, a| Ok(Value::Boolean(!boolean(op, &a[0])?))),
        ("is-true", Exact(1), Some(Boolean), |_, op, a| Ok(Value::Boolean(boolean(op, &a[0])?))),
        ("is-false", Exact(1), Some(Boolean), |_, op, a| Ok(Value::Boolean(!boolean(op, &a[0])?))),
        ("is-in", Exact(2), Some(Boolean), |_, op, a| Ok(Value::Boolean(list(op, &a[1])?.iter().any(|x| values_equal(x, &a[0]))))),
        ("average", Exact(1), None, |_, op, a| average(op, list(op, &a[0])?)),
        ("exists", Exact(1), Some(Boolean), |_, op, a| Ok(Value::Boolean(!list(op, &a[0])?.is_empty()))),
        ("size", Exact(1), Some(Integer), |_, op, a| {
            let n = match &a[0] {
                Value::List(xs) => xs.len(),
                Value::Record(fs) => fs.len(),
                Value::Text(s) => s.chars().count(),
                other => return Err(mismatch(op, "a list, record or text", other)),
            };
            Ok(Value::Integer(n as i64))
        }),
        ("field", Exact(2), None, |_, op, a| {
            let rec = a[0].as_record().ok_or_else(|| mismatch(op, "a record", &a[0]))?;
            let name = a[1].as_text().ok_or_else(|| mismatch(op, "a field name", &a[1]))?;
            rec.get(name).cloned().ok_or_else(|| EvalError::Unbound(format!("field `{name}`")))
        }),
        ("keep", Exact(2), Some(List), |reg, op, a| {
            let items = list(op, &a[0])?;
            let pred = a[1].as_text().ok_or_else(|| mismatch(op, "an operator name", &a[1]))?;
            let mut out = Vec::new();
            for item in items {
                if reg.call(pred, vec![item.clone()])?.as_bool() == Some(true) {
                    out.push(item.clone());
                }
            }
            Ok(Value::List(out))
        }),
        ("list", AtLeast(1), Some(List), |_, _, a| Ok(Value::List(a.to_vec()))),
        ("concat", AtLeast(1), Some(Text), |_, _, a| {
            Ok(Value::Text(
                a.iter()
                    .map(|v| match v {
                        Value::Text(s) => s.clone(),
                        Value::Integer(i) => i.to_string(),
                        Value::Decimal(d) => d.to_string(),
                        Value::Boolean(b) => b.to_string(),
                        other => format!("{other:?}"),
                    })
                    .collect(),
            ))
        }),
        ("ref", Exact(1), None, |_, _, a| Ok(a[0].clone())),
    ]
}

fn bools(op: &str, args: &[Value]) -> Result<Vec<bool>, EvalError> {
    args.iter().map(|v| boolean(op, v)).collect()
}

fn int_div(op: &str, a: &Value, b: &Value, f: fn(i64, i64) -> Option<i64>) -> Result<Value, EvalError> {
    let x = a.as_integer().ok_or_else(|| mismatch(op, "an integer", a))?;
    let y = b.as_integer().ok_or_else(|| mismatch(op, "an integer", b))?;
    if y == 0 {
        return Err(EvalError::DivisionByZero(op.into()));
    }
    f(x, y).map(Value::Integer).ok_or_else(|| EvalError::Overflow(op.into()))
}
