//! The sixteen two-input boolean functions, each built from `nand` alone.
//!
//! Registered as functional operators, they can serve as connector operators: a connector
//! with two children passes their enabledness as `a` and `b`.

use lob_core::{Ident, Operand, OperatorConstruct, OperatorKind, Param, TypeTag};

use crate::error::RegistryError;
use crate::registry::Registry;

/// Gate name and truth table, indexed by `(a as usize) << 1 | b as usize`.
pub const GATES: [(&str, [bool; 4]); 16] = [
    ("gate-false", [false, false, false, false]),
    ("gate-nor", [true, false, false, false]),
    ("gate-inhibit-a", [false, true, false, false]),
    ("gate-not-a", [true, true, false, false]),
    ("gate-inhibit-b", [false, false, true, false]),
    ("gate-not-b", [true, false, true, false]),
    ("gate-xor", [false, true, true, false]),
    ("gate-nand", [true, true, true, false]),
    ("gate-and", [false, false, false, true]),
    ("gate-xnor", [true, false, false, true]),
    ("gate-b", [false, true, false, true]),
    ("gate-imply", [true, true, false, true]),
    ("gate-a", [false, false, true, true]),
    ("gate-converse", [true, false, true, true]),
    ("gate-or", [false, true, true, true]),
    ("gate-true", [true, true, true, true]),
];

fn nand(x: Operand, y: Operand) -> Operand {
    Operand::Application { operator: Ident::new("nand").expect("nand"), args: vec![x, y] }
}

fn var(name: &str) -> Operand {
    Operand::var(Ident::new(name).expect("param"), TypeTag::Boolean)
}

/// Body expression of a gate, using `nand` only.
pub fn gate_body(name: &str) -> Option<Operand> {
    let (a, b) = (var("a"), var("b"));
    let not = |x: Operand| nand(x.clone(), x);
    let and = |x: Operand, y: Operand| not(nand(x, y));
    let or = |x: Operand, y: Operand| nand(not(x), not(y));
    let tru = nand(a.clone(), not(a.clone()));
    let body = match name {
        "gate-false" => not(tru),
        "gate-nor" => not(or(a, b)),
        "gate-inhibit-a" => and(not(a), b),
        "gate-not-a" => not(a),
        "gate-inhibit-b" => and(a, not(b)),
        "gate-not-b" => not(b),
        "gate-xor" => {
            let n = nand(a.clone(), b.clone());
            nand(nand(a, n.clone()), nand(b, n))
        }
        "gate-nand" => nand(a, b),
        "gate-and" => and(a, b),
        "gate-xnor" => {
            let n = nand(a.clone(), b.clone());
            not(nand(nand(a, n.clone()), nand(b, n)))
        }
        "gate-b" => and(b.clone(), or(b, a)),
        "gate-imply" => nand(a, not(b)),
        "gate-a" => and(a.clone(), or(a, b)),
        "gate-converse" => nand(not(a), b),
        "gate-or" => or(a, b),
        "gate-true" => tru,
        _ => return None,
    };
    Some(body)
}

pub fn gate_operators() -> Vec<OperatorConstruct> {
    let params = vec![Param { name: Ident::new("a").expect("a"), ty: TypeTag::Boolean }, Param { name: Ident::new("b").expect("b"), ty: TypeTag::Boolean }];
    GATES
        .iter()
        .map(|(name, _)| OperatorConstruct {
            name: Ident::new(*name).expect("gate name"),
            kind: OperatorKind::Functional,
            params: params.clone(),
            result: Some(TypeTag::Boolean),
            body: vec![gate_body(name).expect("every gate has a body")],
        })
        .collect()
}

pub fn register_gates(registry: &mut Registry) -> Result<(), RegistryError> {
    gate_operators().into_iter().try_for_each(|g| registry.register_operator(g))
}

/// Whether an operand uses no operator but `nand`.
pub fn nand_only(op: &Operand) -> bool {
    match op {
        Operand::Application { operator, args } => operator == "nand" && args.iter().all(nand_only),
        _ => true,
    }
}
