use std::collections::BTreeMap;

use lob_core::{ident, Ident, Operand, OperatorConstruct, OperatorKind, Param, TypeTag, Value};
use lob_engine::gates::{gate_body, gate_operators, nand_only, register_gates, GATES};
use lob_engine::{EvalError, Registry, RegistryError};
use proptest::prelude::*;

fn app(op: &str, args: Vec<Operand>) -> Operand {
    Operand::Application { operator: Ident::new(op).unwrap(), args }
}

fn int(i: i64) -> Operand {
    Operand::Constant(Value::Integer(i))
}

fn boolean(b: bool) -> Operand {
    Operand::Constant(Value::Boolean(b))
}

// ---- independent evaluator over integer and boolean expressions

#[derive(Debug, Clone)]
enum Expr {
    Int(i64),
    Bool(bool),
    Bin(&'static str, Box<Expr>, Box<Expr>),
    Many(&'static str, Vec<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Out {
    I(i64),
    B(bool),
    Err,
}

fn oracle(e: &Expr) -> Out {
    match e {
        Expr::Int(i) => Out::I(*i),
        Expr::Bool(b) => Out::B(*b),
        Expr::Not(x) => match oracle(x) {
            Out::B(b) => Out::B(!b),
            _ => Out::Err,
        },
        Expr::Bin(op, a, b) => match (oracle(a), oracle(b)) {
            (Out::I(x), Out::I(y)) => {
                let (x, y) = (x as i128, y as i128);
                let r = match *op {
                    "add" => x + y,
                    "sub" => x - y,
                    "mul" => x * y,
                    "lt" => return Out::B(x < y),
                    "eq" => return Out::B(x == y),
                    "quot" | "mod" if y == 0 => return Out::Err,
                    "quot" => x.div_euclid(y),
                    "mod" => x.rem_euclid(y),
                    _ => unreachable!(),
                };
                i64::try_from(r).map(Out::I).unwrap_or(Out::Err)
            }
            (Out::B(x), Out::B(y)) if *op == "eq" => Out::B(x == y),
            // Values of different kinds are never equal.
            (Out::I(_), Out::B(_)) | (Out::B(_), Out::I(_)) if *op == "eq" => Out::B(false),
            _ => Out::Err,
        },
        Expr::Many(op, xs) => {
            let mut bs = Vec::new();
            for x in xs {
                match oracle(x) {
                    Out::B(b) => bs.push(b),
                    _ => return Out::Err,
                }
            }
            let all = bs.iter().all(|b| *b);
            let any = bs.iter().any(|b| *b);
            Out::B(match *op {
                "and" => all,
                "or" => any,
                "nand" => !all,
                "nor" => !any,
                _ => unreachable!(),
            })
        }
    }
}

fn to_operand(e: &Expr) -> Operand {
    match e {
        Expr::Int(i) => int(*i),
        Expr::Bool(b) => boolean(*b),
        Expr::Not(x) => app("not", vec![to_operand(x)]),
        Expr::Bin(op, a, b) => app(op, vec![to_operand(a), to_operand(b)]),
        Expr::Many(op, xs) => app(op, xs.iter().map(to_operand).collect()),
    }
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![prop_oneof![-20i64..20, any::<i64>()].prop_map(Expr::Int), any::<bool>().prop_map(Expr::Bool),];
    leaf.prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            (prop::sample::select(vec!["add", "sub", "mul", "lt", "eq", "quot", "mod"]), inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Bin(
                op,
                Box::new(a),
                Box::new(b)
            )),
            (prop::sample::select(vec!["and", "or", "nand", "nor"]), prop::collection::vec(inner.clone(), 1..4)).prop_map(|(op, xs)| Expr::Many(op, xs)),
            inner.prop_map(|x| Expr::Not(Box::new(x))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn evaluator_agrees_with_oracle(e in expr()) {
        let reg = Registry::with_primitives();
        let got = match reg.evaluate(&to_operand(&e), &BTreeMap::new()) {
            Ok(Value::Integer(i)) => Out::I(i),
            Ok(Value::Boolean(b)) => Out::B(b),
            Ok(other) => panic!("unexpected {other:?}"),
            Err(_) => Out::Err,
        };
        prop_assert_eq!(got, oracle(&e));
    }

    #[test]
    fn and_is_a_left_fold(bs in prop::collection::vec(any::<bool>(), 1..12)) {
        let reg = Registry::with_primitives();
        let got = reg.call("and", bs.iter().map(|b| Value::Boolean(*b)).collect()).unwrap();
        prop_assert_eq!(got, Value::Boolean(bs.iter().all(|b| *b)));
    }

    #[test]
    fn average_of_integers(xs in prop::collection::vec(-1000i64..1000, 1..20)) {
        let reg = Registry::with_primitives();
        let got = reg.call("average", vec![Value::List(xs.iter().map(|x| Value::Integer(*x)).collect())]).unwrap();
        let sum: i64 = xs.iter().sum();
        let n = xs.len() as i64;
        if sum % n == 0 {
            prop_assert_eq!(got, Value::Integer(sum / n));
        } else {
            let Value::Decimal(d) = got else { panic!("expected a decimal") };
            prop_assert!((d - sum as f64 / n as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn average_edge_cases() {
    let reg = Registry::with_primitives();
    let avg = |xs: Vec<Value>| reg.call("average", vec![Value::List(xs)]);
    assert_eq!(avg(vec![]), Err(EvalError::DivisionByZero("average".into())));
    assert_eq!(avg(vec![Value::Integer(2), Value::Integer(4)]), Ok(Value::Integer(3)));
    assert_eq!(avg(vec![Value::Integer(1), Value::Integer(2)]), Ok(Value::Decimal(1.5)));
    assert_eq!(avg(vec![Value::Integer(1), Value::Decimal(2.0)]), Ok(Value::Decimal(1.5)));
    assert!(matches!(avg(vec![Value::text("x")]), Err(EvalError::TypeMismatch { .. })));
}

#[test]
fn nor_truth_table() {
    let reg = Registry::with_primitives();
    for (a, b, want) in [(false, false, true), (false, true, false), (true, false, false), (true, true, false)] {
        assert_eq!(reg.call("nor", vec![a.into(), b.into()]), Ok(Value::Boolean(want)), "nor({a}, {b})");
    }
}

#[test]
fn every_gate_is_nand_only_and_matches_its_table() {
    let mut reg = Registry::with_primitives();
    register_gates(&mut reg).unwrap();
    assert_eq!(gate_operators().len(), 16);
    for (name, table) in GATES {
        assert!(nand_only(&gate_body(name).unwrap()), "{name} uses something other than nand");
        for a in [false, true] {
            for b in [false, true] {
                let want = table[(a as usize) << 1 | b as usize];
                assert_eq!(reg.call(name, vec![a.into(), b.into()]), Ok(Value::Boolean(want)), "{name}({a}, {b})");
            }
        }
    }
    // The sixteen tables are pairwise distinct: every two-input function appears once.
    let mut tables: Vec<_> = GATES.iter().map(|(_, t)| *t).collect();
    tables.sort();
    tables.dedup();
    assert_eq!(tables.len(), 16);
}

#[test]
fn division_and_overflow() {
    let reg = Registry::with_primitives();
    assert_eq!(reg.call("div", vec![1.into(), 4.into()]), Ok(Value::Decimal(0.25)));
    assert!(matches!(reg.call("div", vec![1.into(), 0.into()]), Err(EvalError::DivisionByZero(_))));
    assert!(matches!(reg.call("add", vec![i64::MAX.into(), 1.into()]), Err(EvalError::Overflow(_))));
    assert!(matches!(reg.call("mul", vec![Value::Decimal(f64::MAX), 2.into()]), Err(EvalError::NonFinite(_))));
}

#[test]
fn user_functional_operator_widens_integers() {
    let mut reg = Registry::with_primitives();
    let half = OperatorConstruct::functional(
        ident!("half"),
        vec![Param { name: ident!("x"), ty: TypeTag::Decimal }],
        TypeTag::Decimal,
        app("div", vec![Operand::var(ident!("x"), TypeTag::Decimal), int(2)]),
    )
    .unwrap();
    reg.register_operator(half).unwrap();
    assert_eq!(reg.call("half", vec![3.into()]), Ok(Value::Decimal(1.5)));
    assert!(matches!(reg.call("half", vec![Value::text("3")]), Err(EvalError::TypeMismatch { .. })));
}

#[test]
fn redefinition_is_refused() {
    let mut reg = Registry::with_primitives();
    let dup = OperatorConstruct::functional(ident!("add"), vec![], TypeTag::Integer, int(1)).unwrap();
    assert_eq!(reg.register_operator(dup), Err(RegistryError::Duplicate("add".into())));
    let ok = OperatorConstruct::functional(ident!("one"), vec![], TypeTag::Integer, int(1)).unwrap();
    reg.register_operator(ok.clone()).unwrap();
    assert_eq!(reg.register_operator(ok), Err(RegistryError::Duplicate("one".into())));
}

#[test]
fn malformed_operator_is_refused() {
    let mut reg = Registry::with_primitives();
    let bad = OperatorConstruct::functional(ident!("bad"), vec![], TypeTag::Integer, app("no-such-op", vec![int(1)])).unwrap();
    assert!(matches!(reg.register_operator(bad), Err(RegistryError::Invalid { .. })));
}

#[test]
fn actional_operators_inline_to_primitives() {
    let mut reg = Registry::with_primitives();
    let x = || Operand::var(ident!("x"), TypeTag::Boolean);
    let inner = OperatorConstruct {
        name: ident!("reset"),
        kind: OperatorKind::Actional,
        params: vec![Param { name: ident!("x"), ty: TypeTag::Boolean }],
        result: None,
        body: vec![app("put", vec![x(), boolean(false)])],
    };
    let outer = OperatorConstruct {
        name: ident!("reset-twice"),
        kind: OperatorKind::Actional,
        params: vec![Param { name: ident!("x"), ty: TypeTag::Boolean }],
        result: None,
        body: vec![app("reset", vec![x()]), app("annotate", vec![x(), Operand::Constant(Value::text("reset"))])],
    };
    reg.register_operator(inner).unwrap();
    reg.register_operator(outer).unwrap();
    let prims: Vec<&str> = reg.normalized("reset-twice").unwrap().iter().map(|i| i.primitive.as_str()).collect();
    assert_eq!(prims, ["put", "annotate"]);
    assert!(prims.iter().all(|p| reg.normalized(p).is_none()));
}

#[test]
fn aggregate_names_fields_after_variables() {
    let reg = Registry::with_primitives();
    let env = BTreeMap::from([(ident!("first-name"), Value::text("Ada")), (ident!("family-name"), Value::text("Lovelace"))]);
    let op = app("aggregate", vec![Operand::var(ident!("first-name"), TypeTag::Text), Operand::var(ident!("family-name"), TypeTag::Text)]);
    let v = reg.evaluate(&op, &env).unwrap();
    assert_eq!(v.as_record().unwrap()["family-name"], Value::text("Lovelace"));
}
